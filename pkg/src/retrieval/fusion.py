"""Ranked lists from individual retrievers and Reciprocal Rank Fusion over
them."""
from typing import List, Tuple
from pydantic import BaseModel, validator
import pytypeutils as tus
import math


DEFAULT_K_RRF = 60


class RetrievalError(Exception):
    pass


class NoLists(RetrievalError):
    def __init__(self):
        super().__init__('rrf_fuse requires at least one ranked list')


class RankedList(BaseModel):
    """The output of a single retriever.

    Attributes:
    - `retriever_id (str)`: Which retriever produced the list, e.g. bm25 or
      the model name of a dense retriever
    - `entries (list[tuple[str, float]])`: (doc_id, score), best first
    """
    retriever_id: str
    entries: List[Tuple[str, float]] = []

    @validator('entries')
    def _ordered_and_unique(cls, v):
        seen = set()
        for idx, (doc_id, score) in enumerate(v):
            if doc_id in seen:
                raise ValueError(f'duplicate doc_id {doc_id}')
            seen.add(doc_id)
            if idx > 0 and score > v[idx - 1][1]:
                raise ValueError(f'scores must be non-increasing (at {doc_id})')
        return v

    def doc_ids(self) -> List[str]:
        return [doc_id for doc_id, _ in self.entries]


class FusedRanking(BaseModel):
    """Documents ordered by descending reciprocal rank fusion score, ties
    broken by ascending doc_id."""
    entries: List[Tuple[str, float]] = []

    def doc_ids(self) -> List[str]:
        return [doc_id for doc_id, _ in self.entries]


def rrf_fuse(lists: List[RankedList], k_rrf: float = DEFAULT_K_RRF) -> FusedRanking:
    """Merges the given ranked lists by summing, for each document, the
    reciprocal `1 / (k_rrf + rank)` over every list containing it, where
    ranks start at 1.

    The contributions are summed with `math.fsum`, so the score of a document
    does not depend on the order of the lists and equal rank multisets give
    exactly equal scores.

    Arguments:
    - `lists (list[RankedList])`: At least one ranked list
    - `k_rrf (float)`: The smoothing constant; must be positive

    Returns:
    - `fused (FusedRanking)`: Every document in any list, best first

    Raises:
    - `NoLists`: If no lists are given
    """
    tus.check(lists=(lists, (list, tuple)), k_rrf=(k_rrf, (int, float)))
    tus.check_listlike(lists=(lists, RankedList))
    if not lists:
        raise NoLists()
    if k_rrf <= 0:
        raise ValueError(f'k_rrf must be positive, got {k_rrf}')

    contributions = {}
    for ranked in lists:
        for rank, (doc_id, _) in enumerate(ranked.entries, start=1):
            contributions.setdefault(doc_id, []).append(1.0 / (k_rrf + rank))

    scored = [(doc_id, math.fsum(parts)) for doc_id, parts in contributions.items()]
    scored.sort(key=lambda item: (-item[1], item[0]))
    return FusedRanking(entries=scored)
