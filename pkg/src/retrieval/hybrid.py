"""Hybrid retrieval: BM25 plus any registered dense retrievers, merged with
Reciprocal Rank Fusion and resolved to documents through the corpus store.
"""
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional
from pydantic import BaseModel, validator
import pytypeutils as tus

from corpus.models import Document
from retrieval.fusion import RankedList, FusedRanking, rrf_fuse, DEFAULT_K_RRF
from retrieval.sparse import SparseIndex, bm25_rank


DEFAULT_DEPTH = 32
DEFAULT_CANDIDATE_DEPTH = 100


class EvidenceSet(BaseModel):
    """The documents retrieved for a query in a given iteration.

    Attributes:
    - `query_text (str)`: The query which was issued
    - `iteration (int)`: The round of the iterative pipeline, 0 based
    - `docs (list[Document])`: Best first, no duplicates
    - `scores (list[float])`: The fused score of each document in `docs`
    """
    query_text: str
    iteration: int = 0
    docs: List[Document] = []
    scores: List[float] = []

    @validator('docs')
    def _distinct(cls, v):
        ids = [doc.doc_id for doc in v]
        if len(set(ids)) != len(ids):
            raise ValueError('evidence documents must be distinct')
        return v

    def doc_ids(self) -> List[str]:
        return [doc.doc_id for doc in self.docs]


DenseClient = Callable[[str, int], RankedList]
"""A dense retriever: called with (query, top_n), returns its ranked list"""


class HybridRetriever:
    """Fuses BM25 with zero or more dense clients.

    Attributes:
    - `store (CorpusStore)`: Resolves doc ids to documents
    - `index (SparseIndex)`: The sparse index over the same store
    - `dense_clients (list[DenseClient])`: Registered dense retrievers, in the
      order their lists are passed to fusion
    - `k_rrf (float)`: The fusion constant
    - `candidate_depth (int)`: How many candidates each retriever contributes
      before fusion
    """
    def __init__(self, store, index: SparseIndex, dense_clients: Optional[List[DenseClient]] = None,
                 k_rrf: float = DEFAULT_K_RRF, candidate_depth: int = DEFAULT_CANDIDATE_DEPTH):
        tus.check(index=(index, SparseIndex), candidate_depth=(candidate_depth, int))
        self.store = store
        self.index = index
        self.dense_clients = list(dense_clients or [])
        self.k_rrf = k_rrf
        self.candidate_depth = candidate_depth

    def register_dense(self, client: DenseClient):
        tus.check_callable(client=client)
        self.dense_clients.append(client)

    def rank(self, query: str, dense_only: bool = False) -> FusedRanking:
        """Produces the fused ranking for the given query. Dense clients are
        queried concurrently and joined before fusion; their errors
        propagate. With `dense_only` the BM25 list is left out, which needs
        at least one dense client."""
        lists = [] if dense_only else [bm25_rank(self.index, query, self.candidate_depth)]
        if len(self.dense_clients) == 1:
            lists.append(self.dense_clients[0](query, self.candidate_depth))
        elif self.dense_clients:
            with ThreadPoolExecutor(max_workers=len(self.dense_clients)) as executor:
                futures = [
                    executor.submit(client, query, self.candidate_depth)
                    for client in self.dense_clients
                ]
                lists.extend(future.result() for future in futures)
        return rrf_fuse(lists, self.k_rrf)

    def retrieve(self, query: str, depth: int = DEFAULT_DEPTH, iteration: int = 0,
                 dense_only: bool = False) -> EvidenceSet:
        """Retrieves the top `depth` documents for the query.

        Documents a dense client returns which are not in the store are
        skipped rather than failing the query.

        Arguments:
        - `query (str)`: The query text
        - `depth (int)`: The maximum number of documents to return
        - `iteration (int)`: Recorded on the evidence set
        - `dense_only (bool)`: Rank by the dense clients alone

        Returns:
        - `evidence (EvidenceSet)`: At most `depth` distinct documents
        """
        tus.check(query=(query, str), depth=(depth, int), iteration=(iteration, int))
        fused = self.rank(query, dense_only=dense_only)

        docs = []
        scores = []
        for doc_id, score in fused.entries:
            if len(docs) >= depth:
                break
            if doc_id not in self.store:
                continue
            docs.append(self.store.get_document(doc_id))
            scores.append(score)

        return EvidenceSet(query_text=query, iteration=iteration, docs=docs, scores=scores)
