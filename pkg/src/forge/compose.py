"""Composes five document sets with varied entailment from a question's
retrieved candidates, and holds the per question state shared by the sample
constructors."""
from typing import Dict, List, Optional

import numpy as np
import pytypeutils as tus

from corpus.models import BenchmarkQuestion, Document
from forge.models import DOCSET_SIZE, TARGET_COMPOSITIONS, ComposedDocSet
from gateway.models import NliLabel
from gateway.prompts import answer_hypothesis, premise_text
from retrieval.hybrid import EvidenceSet
from verdicts.format import render_verdict


class ForgeError(Exception):
    pass


class TooFewCandidates(ForgeError):
    def __init__(self, q_id: str, found: int):
        super().__init__(f'{q_id} has {found} candidate documents, {DOCSET_SIZE} are needed')
        self.q_id = q_id
        self.found = found


class UnpairableSample(ForgeError):
    def __init__(self, q_id: str, category: str):
        super().__init__(f'no positive of {q_id} can be paired with its {category} negative')
        self.q_id = q_id
        self.category = category


def compose_document_sets(itgs, question: BenchmarkQuestion, candidates: EvidenceSet,
                          nli_endpoint: str = 'nli') -> List[ComposedDocSet]:
    """Labels every candidate by whether it entails the question's gold
    answer, then emits one five document set per achievable composition,
    filling each label class in fused rank order and presenting the set in
    fused rank order.

    Raises:
    - `TooFewCandidates`: If there are fewer than five candidates
    """
    tus.check(question=(question, BenchmarkQuestion), candidates=(candidates, EvidenceSet))
    if len(candidates.docs) < DOCSET_SIZE:
        raise TooFewCandidates(question.q_id, len(candidates.docs))

    hypothesis = answer_hypothesis(question)
    labels = {doc.doc_id: itgs.gateway.call_nli(doc, hypothesis, endpoint=nli_endpoint) for doc in candidates.docs}
    position = {doc_id: idx for idx, doc_id in enumerate(candidates.doc_ids())}
    entailing = [d for d in candidates.doc_ids() if labels[d] == NliLabel.entail]
    other = [d for d in candidates.doc_ids() if labels[d] != NliLabel.entail]

    result = []
    for n_entail, n_not in TARGET_COMPOSITIONS:
        if len(entailing) < n_entail or len(other) < n_not:
            continue
        chosen = sorted(entailing[:n_entail] + other[:n_not], key=position.get)
        result.append(ComposedDocSet(
            q_id=question.q_id, doc_ids=chosen, labels=[labels[d] for d in chosen],
            composition=(n_entail, n_not)
        ))
    return result


def cosine_matrix(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Pairwise cosine similarity of the rows. Zero vectors have similarity
    zero with everything."""
    def normalize(rows):
        norms = np.linalg.norm(rows, axis=1, keepdims=True)
        return np.divide(rows, norms, out=np.zeros_like(rows), where=norms > 0)
    return np.clip(normalize(left) @ normalize(right).T, -1.0, 1.0)


class QuestionMemo:
    """Oracle answers which do not depend on the document set, so each is
    asked once per question."""
    def __init__(self):
        self.plain_answer: Optional[str] = None
        self.answers_with: Dict[str, str] = {}
        self.embeddings: Dict[str, List[float]] = {}


class ForgeContext:
    """Everything the constructors need for one document set, with the
    drafts and oracle answers fetched on first use.

    Attributes:
    - `question (BenchmarkQuestion)`: The question
    - `group (str, None)`: Its difficulty group, if stratified
    - `docset (ComposedDocSet)`: The composed set
    - `docs (list[Document])`: The documents of the set, in order
    - `settings (ForgeSettings)`: Endpoints and thresholds
    """
    def __init__(self, itgs, question: BenchmarkQuestion, group: Optional[str], docset: ComposedDocSet,
                 docs: List[Document], settings, memo: QuestionMemo = None):
        self.itgs = itgs
        self.question = question
        self.group = group
        self.docset = docset
        self.docs = docs
        self.settings = settings
        self.memo = memo if memo is not None else QuestionMemo()
        self._drafts = {}

    def draft(self, endpoint: str):
        """(verdict, raw) from the given drafting endpoint; errors
        propagate and are not memoized"""
        if endpoint not in self._drafts:
            self._drafts[endpoint] = self.itgs.gateway.draft(self.question, self.docs, endpoint=endpoint)
        return self._drafts[endpoint]

    def primary(self):
        return self.draft(self.settings.primary_drafter)[0]

    def alternative(self):
        return self.draft(self.settings.alt_drafter)[0]

    def plain_answer(self) -> str:
        """The frozen generator's answer with no reasoning"""
        if self.memo.plain_answer is None:
            self.memo.plain_answer = self.itgs.gateway.call_generator(
                self.question, None, endpoint=self.settings.generator
            )
        return self.memo.plain_answer

    def answer_with(self, reasoning) -> str:
        """The frozen generator's answer given the reasoning"""
        key = render_verdict(reasoning)
        if key not in self.memo.answers_with:
            self.memo.answers_with[key] = self.itgs.gateway.call_generator(
                self.question, reasoning, endpoint=self.settings.generator
            )
        return self.memo.answers_with[key]

    def nli(self, premise, reasoning) -> str:
        return self.itgs.gateway.call_nli(premise, render_verdict(reasoning), endpoint=self.settings.nli).value

    def embed(self, doc: Document) -> List[float]:
        if doc.doc_id not in self.memo.embeddings:
            self.memo.embeddings[doc.doc_id] = self.itgs.gateway.embed(
                premise_text(doc), endpoint=self.settings.embedder
            )
        return self.memo.embeddings[doc.doc_id]


def set_similarity(itgs, source: List[Document], other: List[Document], embedder: str = 'embedder',
                   ctx: ForgeContext = None) -> float:
    """Mean over the documents of `other` of their best cosine similarity to
    any document of `source`.

    Raises:
    - `ValueError`: If either set is empty
    """
    if not source or not other:
        raise ValueError('similarity needs two non-empty document sets')

    def vector(doc):
        if ctx is not None:
            return ctx.embed(doc)
        return itgs.gateway.embed(premise_text(doc), endpoint=embedder)

    left = np.array([vector(d) for d in source], dtype=np.float64)
    right = np.array([vector(d) for d in other], dtype=np.float64)
    best = cosine_matrix(right, left).max(axis=1)
    return float(np.clip(best.mean(), -1.0, 1.0))
