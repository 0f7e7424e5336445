"""Describes endpoints and the typed results of gateway calls."""
from enum import Enum
from typing import Optional
from pydantic import BaseModel, Field, validator, root_validator

from verdicts.models import Verdict, GapAnalysis, NegativeKnowledgeAssertion


class EndpointRole(str, Enum):
    verifier = 'verifier'
    generator = 'generator'
    nli = 'nli'
    embedder = 'embedder'
    dense_search = 'dense_search'
    drafter = 'drafter'
    assessor = 'assessor'


class AgentEndpoint(BaseModel):
    """One external model service.

    Attributes:
    - `role (EndpointRole)`: What the service does
    - `base_url (str)`: `http(s)://...` for JSON over POST,
      `amqp://host[:port]/queue` for the message queue transport, or
      `mock://` for the scripted transport
    - `model_name (str)`: Identifies the model; part of every request
      fingerprint and the retriever id of dense results
    - `timeout_ms (int)`: Per attempt
    - `max_retries (int)`: Retries after the first attempt
    - `max_concurrency (int)`: In-flight requests allowed to this endpoint
    - `dimension (int, None)`: For embedders, the vector dimension. If unset it
      is fixed by the first response.
    """
    role: EndpointRole
    base_url: str = 'mock://'
    model_name: str
    timeout_ms: int = 30000
    max_retries: int = 2
    max_concurrency: int = 8
    dimension: Optional[int] = None

    class Config:
        use_enum_values = True

    @validator('timeout_ms')
    def _positive_timeout(cls, v):
        if v <= 0:
            raise ValueError('timeout_ms must be positive')
        return v

    @validator('max_retries')
    def _non_negative_retries(cls, v):
        if v < 0:
            raise ValueError('max_retries must be non-negative')
        return v

    @validator('max_concurrency')
    def _positive_concurrency(cls, v):
        if v < 1:
            raise ValueError('max_concurrency must be at least 1')
        return v


class NliLabel(str, Enum):
    entail = 'entail'
    not_entail = 'not_entail'


class VerifierOutput(BaseModel):
    """A parsed verifier response. A gap analysis accompanies every refusal
    and never accompanies reasoning."""
    verdict: Verdict = Field(..., discriminator='kind')
    gap: Optional[GapAnalysis] = None
    raw: str

    @root_validator(skip_on_failure=True)
    def _gap_iff_refusal(cls, values):
        is_refusal = isinstance(values['verdict'], NegativeKnowledgeAssertion)
        if is_refusal != (values.get('gap') is not None):
            raise ValueError('gap analysis must be present exactly when the verdict is a refusal')
        return values


class GatewayCall(BaseModel):
    """The record kept for every call made through the gateway"""
    endpoint: str
    role: str
    task: str
    request_hash: str
    latency_ms: float
    attempts: int
    outcome: str
    fingerprint: Optional[str] = None


class DecodingParams(BaseModel):
    temperature: float = 0.0
    top_k: int = 40
    top_p: float = 0.9
