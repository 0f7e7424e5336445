"""The Medical Dual Verdict: either citation-grounded reasoning or a
Negative Knowledge Assertion, plus the gap analysis a verifier attaches to a
refusal."""
from typing import List, Union
from pydantic import BaseModel, Field, validator
from typing_extensions import Literal
import re

from parsing.ext_tokens import CITATION_REGEX


NKA_SENTENCE = (
    'Insufficient evidence was identified in the retrieved content to support '
    'a medically reliable answer.'
)
"""The canonical refusal sentence"""

NKA_PREFIX = 'Insufficient evidence was identified'
"""Any verdict starting with this (case-insensitively) is a refusal"""

MAX_GAP_TERMS = 5


def is_nka_text(text: str) -> bool:
    return text.strip().lower().startswith(NKA_PREFIX.lower())


class CiteStatement(BaseModel):
    """One statement and the 1-based indices of the documents it cites.

    The text must already be stripped and must not itself contain citation
    tokens, so that rendering and parsing are inverse operations.
    """
    text: str
    citations: List[int]

    @validator('text')
    def _clean_text(cls, v):
        if not v or v != v.strip():
            raise ValueError('statement text must be non-empty and stripped')
        if re.search(CITATION_REGEX, v):
            raise ValueError('statement text may not contain citations')
        return v

    @validator('citations')
    def _cited(cls, v):
        if not v:
            raise ValueError('a statement needs at least one citation')
        if any(c < 1 for c in v):
            raise ValueError('citations are 1-based')
        return v


class CiteReason(BaseModel):
    """Statements in order. The first may not begin with the refusal prefix."""
    kind: Literal['cite_reason'] = 'cite_reason'
    statements: List[CiteStatement]

    @validator('statements')
    def _non_empty(cls, v):
        if not v:
            raise ValueError('CiteReason needs at least one statement')
        if is_nka_text(v[0].text):
            raise ValueError(f'reasoning may not begin with "{NKA_PREFIX}"')
        return v


class NegativeKnowledgeAssertion(BaseModel):
    kind: Literal['nka'] = 'nka'
    text: str = NKA_SENTENCE

    @validator('text')
    def _canonical(cls, v):
        if v != v.strip() or not is_nka_text(v):
            raise ValueError(f'refusals must begin with "{NKA_PREFIX}"')
        return v


Verdict = Union[CiteReason, NegativeKnowledgeAssertion]


class VerdictField(BaseModel):
    """Wraps a verdict so it can be (de)serialized on its own"""
    verdict: Verdict = Field(..., discriminator='kind')


class GapAnalysis(BaseModel):
    """The evidence the verifier found missing, as short retrievable
    concepts."""
    missing_aspects: List[str]

    @validator('missing_aspects')
    def _bounded(cls, v):
        cleaned = [term.strip() for term in v if term.strip()]
        if not 1 <= len(cleaned) <= MAX_GAP_TERMS:
            raise ValueError(f'gap analysis needs 1 to {MAX_GAP_TERMS} terms, got {len(cleaned)}')
        return cleaned
