"""Configuration and records of the iterative verify and retrieve loop."""
from enum import Enum
from typing import List, Optional
from pydantic import BaseModel, root_validator, validator

from verdicts.models import Verdict


class PipelineConfig(BaseModel):
    """How questions are answered.

    Attributes:
    - `t_max (int)`: The most verify rounds per question
    - `depth (int)`: How many documents each round retrieves
    - `verifier_view (int)`: How many of those the verifier is shown
    - `enable_iteration (bool)`: False stops after the first round
    - `enable_mtam_verifier (bool)`: False swaps the trained verifier for the
      base model endpoint
    - `enable_retrieval (bool)`: False skips retrieval and verification and
      answers from the generator's own knowledge
    - `abort_on_unparseable (bool)`: True aborts a question on an
      unparseable verifier response instead of retrying the round's query
    - `verifier_endpoint`, `base_verifier_endpoint`, `generator_endpoint`
      (str): Endpoint names
    """
    t_max: int = 3
    depth: int = 32
    verifier_view: int = 5
    enable_iteration: bool = True
    enable_mtam_verifier: bool = True
    enable_retrieval: bool = True
    abort_on_unparseable: bool = False
    verifier_endpoint: str = 'verifier'
    base_verifier_endpoint: str = 'base_verifier'
    generator_endpoint: str = 'generator'

    @validator('t_max', 'depth', 'verifier_view')
    def _positive(cls, v):
        if v < 1:
            raise ValueError('must be at least 1')
        return v

    @root_validator(skip_on_failure=True)
    def _view_within_depth(cls, values):
        if values['verifier_view'] > values['depth']:
            raise ValueError('verifier_view may not exceed depth')
        return values

    def active_verifier(self) -> str:
        return self.verifier_endpoint if self.enable_mtam_verifier else self.base_verifier_endpoint

    def rounds_allowed(self) -> int:
        if not self.enable_retrieval:
            return 0
        return self.t_max if self.enable_iteration else 1


class VerdictKind(str, Enum):
    cite_reason = 'cite_reason'
    nka = 'nka'
    unparseable = 'unparseable'
    no_evidence = 'no_evidence'


class Outcome(str, Enum):
    validated = 'validated'
    fallback = 'fallback'


class RoundRecord(BaseModel):
    """One verify round.

    `verdict` and `gap` are set when the verifier response parsed. A round
    with no retrievable documents skips the verifier and has kind
    `no_evidence`.
    """
    iteration: int
    query: str
    doc_ids: List[str]
    verifier_model: Optional[str] = None
    verifier_raw: Optional[str] = None
    verdict_kind: VerdictKind
    verdict: Optional[Verdict] = None
    gap: List[str] = []

    class Config:
        use_enum_values = True


class IterationTrace(BaseModel):
    rounds: List[RoundRecord] = []
    outcome: Outcome = Outcome.fallback

    class Config:
        use_enum_values = True

    def shown_doc_ids(self) -> List[str]:
        """Every document shown to the verifier, first appearance order"""
        return list(dict.fromkeys(doc_id for r in self.rounds for doc_id in r.doc_ids))


class AnswerRecord(BaseModel):
    """The result of answering one question.

    Attributes:
    - `predicted (str, None)`: The generator's label; None only on error
    - `final_verdict (Verdict, None)`: The validated reasoning, or None on
      fallback
    - `error (str, None)`: `Type: message` if the question failed
    """
    q_id: str
    question: str = ''
    predicted: Optional[str] = None
    gold: str
    trace: IterationTrace = IterationTrace()
    final_verdict: Optional[Verdict] = None
    error: Optional[str] = None

    def rounds_used(self) -> int:
        return len(self.trace.rounds)
