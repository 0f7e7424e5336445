"""Samples and pairs of the preference corpus."""
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple
from pydantic import BaseModel, root_validator, validator

from gateway.models import NliLabel
from verdicts.models import Verdict


DOCSET_SIZE = 5

TARGET_COMPOSITIONS = ((5, 0), (4, 1), (3, 2), (2, 3), (1, 4), (0, 5))
"""(entailing, non entailing) document counts, in the order subsets are
emitted"""


class NegativeCategory(str, Enum):
    faulty_reasoning = 'faulty_reasoning'
    missing_answer = 'missing_answer'
    over_refusal = 'over_refusal'
    misattribution = 'misattribution'


class PositiveKind(str, Enum):
    reasoning = 'reasoning'
    refusal = 'refusal'


class ComposedDocSet(BaseModel):
    """Five documents and their NLI labels against the question and its gold
    answer, in fused retrieval order."""
    q_id: str
    doc_ids: List[str]
    labels: List[NliLabel]
    composition: Tuple[int, int]

    class Config:
        use_enum_values = True

    @root_validator(skip_on_failure=True)
    def _consistent(cls, values):
        doc_ids, labels, (n_entail, n_not) = values['doc_ids'], values['labels'], values['composition']
        if len(doc_ids) != DOCSET_SIZE or len(set(doc_ids)) != DOCSET_SIZE:
            raise ValueError(f'a document set has exactly {DOCSET_SIZE} distinct documents')
        if len(labels) != len(doc_ids):
            raise ValueError('one label per document is required')
        entailing = sum(1 for label in labels if label == NliLabel.entail)
        if (entailing, len(labels) - entailing) != (n_entail, n_not):
            raise ValueError(f'labels do not match composition {(n_entail, n_not)}')
        return values


class PositiveSample(BaseModel):
    """A verified positive: reasoning whose answer matched gold, or a
    refusal the documents could not have avoided."""
    q_id: str
    doc_ids: List[str]
    verdict: Verdict
    kind: PositiveKind
    provenance: str
    group: Optional[str] = None

    class Config:
        use_enum_values = True


class NegativeSample(BaseModel):
    """A hallucinated verdict together with the oracle outcomes that
    classified it. `evidence` is exactly what the category predicate reads."""
    q_id: str
    doc_ids: List[str]
    verdict: Verdict
    category: NegativeCategory
    evidence: Dict[str, Any]
    provenance: str
    group: Optional[str] = None

    class Config:
        use_enum_values = True


class PreferencePair(BaseModel):
    q_id: str
    question: str
    options: Dict[str, str]
    doc_ids: List[str]
    chosen: Verdict
    rejected: Verdict
    category: NegativeCategory
    provenance: Dict[str, str]
    group: Optional[str] = None

    class Config:
        use_enum_values = True

    @root_validator(skip_on_failure=True)
    def _distinct(cls, values):
        if values['chosen'] == values['rejected']:
            raise ValueError('chosen and rejected verdicts must differ')
        return values


class ForgeManifest(BaseModel):
    """Counts and settings describing one emitted corpus"""
    pairs: int = 0
    pairs_per_category: Dict[str, int] = {}
    pairs_per_group: Dict[str, int] = {}
    negatives_per_category: Dict[str, int] = {}
    negatives_per_group: Dict[str, int] = {}
    positives: Dict[str, int] = {}
    unpaired_negatives: int = 0
    positives_without_negatives: int = 0
    quarantined_drafts: int = 0
    docsets: int = 0
    thresholds: Dict[str, float] = {}
    endpoints: Dict[str, str] = {}
    balance: str = 'per_question'
    max_pairs_per_category: Optional[int] = None
    seed: int = 0

    @validator('pairs_per_category', 'negatives_per_category')
    def _sorted(cls, v):
        return dict(sorted(v.items()))
