"""Records of self-assessment and the difficulty groups derived from them."""
from enum import Enum
from typing import List, Optional
from pydantic import BaseModel, root_validator, validator

from gateway.models import DecodingParams


DEFAULT_CRITERIA = ('hallucination', 'authenticity', 'completeness', 'reliability')

DEFAULT_SCHEDULE = tuple(
    DecodingParams(temperature=temperature, top_k=40, top_p=0.9)
    for temperature in (0.2, 0.5, 0.8, 1.0)
)


class DifficultyGroup(str, Enum):
    stable = 'stable'
    medium = 'medium'
    challenging = 'challenging'


class SelfAssessmentRound(BaseModel):
    """One answer under one decoding setting. A round whose call failed has
    no prediction and an error, and counts as incorrect."""
    round_index: int
    decoding: DecodingParams
    predicted: Optional[str] = None
    correct: bool
    error: Optional[str] = None


class DifficultyLabel(BaseModel):
    """`l` is the number of incorrect rounds out of `k`"""
    l: int  # noqa: E741
    k: int
    group: DifficultyGroup

    class Config:
        use_enum_values = True

    @root_validator(skip_on_failure=True)
    def _group_matches_count(cls, values):
        expected = group_for(values['l'], values['k'])
        if values['group'] != expected:
            raise ValueError(f'l={values["l"]} of k={values["k"]} is {expected.value}, not {values["group"]}')
        return values


def group_for(incorrect: int, k: int) -> DifficultyGroup:
    if not 0 <= incorrect <= k:
        raise ValueError(f'incorrect rounds {incorrect} outside 0..{k}')
    if incorrect == 0:
        return DifficultyGroup.stable
    if incorrect == k:
        return DifficultyGroup.challenging
    return DifficultyGroup.medium


class EvalCriteria(BaseModel):
    criteria: List[str] = list(DEFAULT_CRITERIA)

    @validator('criteria')
    def _unique_names(cls, v):
        if not v:
            raise ValueError('at least one criterion is required')
        if len(set(v)) != len(v):
            raise ValueError('criteria names must be unique')
        return v


class StratifiedQuestion(BaseModel):
    """The persisted record for one stratified question"""
    q_id: str
    rounds: List[SelfAssessmentRound]
    l: int  # noqa: E741
    group: DifficultyGroup

    class Config:
        use_enum_values = True


class Stratification(BaseModel):
    """The disjoint partition into groups, by q_id in input order, plus the
    questions quarantined because none of their rounds could be run."""
    stable: List[str] = []
    medium: List[str] = []
    challenging: List[str] = []
    quarantined: List[str] = []
    records: List[StratifiedQuestion] = []

    def group_of(self, q_id: str) -> Optional[str]:
        for record in self.records:
            if record.q_id == q_id:
                return record.group
        return None
