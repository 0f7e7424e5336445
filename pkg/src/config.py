"""Loads the application configuration. The file is JSON, found at the path
given by `--config`, else the `MEDVERIFY_CONFIG` environment variable, else
`cfg/config.json`. A missing file means every default.
"""
from typing import Dict, List, Optional
import json
import os

from pydantic import BaseModel, validator

from gateway.models import AgentEndpoint, DecodingParams, EndpointRole
from medrank.models import DEFAULT_CRITERIA, DEFAULT_SCHEDULE
from pipeline.models import PipelineConfig
from retrieval.fusion import DEFAULT_K_RRF
from retrieval.hybrid import DEFAULT_CANDIDATE_DEPTH, DEFAULT_DEPTH


CONFIG_ENV_VAR = 'MEDVERIFY_CONFIG'
LOG_LEVEL_ENV_VAR = 'MEDVERIFY_LOG_LEVEL'
DEFAULT_CONFIG_PATH = os.path.join('cfg', 'config.json')


class ConfigError(Exception):
    def __init__(self, path: str, reason: str):
        super().__init__(f'bad config {path}: {reason}')
        self.path = path
        self.reason = reason


class StoreSettings(BaseModel):
    directory: str = os.path.join('data', 'store')


class RetrievalSettings(BaseModel):
    """`dense_endpoints` names the dense_search endpoints fused with BM25, in
    fusion order"""
    depth: int = DEFAULT_DEPTH
    k_rrf: float = DEFAULT_K_RRF
    candidate_depth: int = DEFAULT_CANDIDATE_DEPTH
    dense_endpoints: List[str] = []

    @validator('k_rrf')
    def _positive_k(cls, v):
        if v <= 0:
            raise ValueError('k_rrf must be positive')
        return v


class GatewaySettings(BaseModel):
    """`mock_script` routes every endpoint through the scripted transport
    loaded from that file"""
    backoff_ms: int = 200
    mock_script: Optional[str] = None
    call_log: Optional[str] = None


class MedrankSettings(BaseModel):
    endpoint: str = 'assessor'
    k: int = 4
    criteria: List[str] = list(DEFAULT_CRITERIA)
    schedule: List[DecodingParams] = list(DEFAULT_SCHEDULE)

    @validator('k')
    def _at_least_two(cls, v):
        if v < 2:
            raise ValueError('k must be at least 2')
        return v


class ForgeSettings(BaseModel):
    """Preference corpus construction.

    Attributes:
    - `delta (float)`: Distractor sets must be more similar than this to the
      source set
    - `candidate_depth (int)`: Retrieved candidates per question, from which
      five document sets are composed
    - `distractor_pool (int)`: Retrieved documents considered as distractors
    - `balance (str)`: Only `per_question` is supported: each negative pairs
      with a positive of its own question
    - `max_pairs_per_category (int, None)`: If set, categories with more
      pairs are sampled down to this many, seeded by `seed`
    """
    delta: float = 0.8
    candidate_depth: int = 10
    distractor_pool: int = 20
    primary_drafter: str = 'primary_drafter'
    alt_drafter: str = 'alt_drafter'
    nli: str = 'nli'
    generator: str = 'generator'
    embedder: str = 'embedder'
    balance: str = 'per_question'
    max_pairs_per_category: Optional[int] = None
    seed: int = 0

    @validator('balance')
    def _known_policy(cls, v):
        if v != 'per_question':
            raise ValueError(f'unknown balance policy {v}')
        return v

    @validator('candidate_depth')
    def _enough_candidates(cls, v):
        if v < 5:
            raise ValueError('candidate_depth must be at least 5')
        return v


class DpoSettings(BaseModel):
    beta: float = 0.1
    h: float = 1e-5


class EvaluationSettings(BaseModel):
    nli: str = 'nli'
    generator: str = 'generator'


class CacheSettings(BaseModel):
    memcached_host: Optional[str] = None
    memcached_port: int = 11211


def default_endpoints() -> Dict[str, AgentEndpoint]:
    """Scripted endpoints for every role, so a bare config runs offline"""
    roles = {
        'verifier': EndpointRole.verifier,
        'base_verifier': EndpointRole.verifier,
        'generator': EndpointRole.generator,
        'nli': EndpointRole.nli,
        'embedder': EndpointRole.embedder,
        'primary_drafter': EndpointRole.drafter,
        'alt_drafter': EndpointRole.drafter,
        'assessor': EndpointRole.assessor,
    }
    return {
        name: AgentEndpoint(role=role, base_url='mock://', model_name=f'mock-{name}')
        for name, role in roles.items()
    }


class AppConfig(BaseModel):
    store: StoreSettings = StoreSettings()
    retrieval: RetrievalSettings = RetrievalSettings()
    pipeline: PipelineConfig = PipelineConfig()
    endpoints: Dict[str, AgentEndpoint] = default_endpoints()
    gateway: GatewaySettings = GatewaySettings()
    medrank: MedrankSettings = MedrankSettings()
    forge: ForgeSettings = ForgeSettings()
    dpo: DpoSettings = DpoSettings()
    evaluation: EvaluationSettings = EvaluationSettings()
    cache: CacheSettings = CacheSettings()
    log_level: str = 'INFO'
    parallelism: int = 1

    @validator('parallelism')
    def _positive_parallelism(cls, v):
        if v < 1:
            raise ValueError('parallelism must be at least 1')
        return v


def resolve_config_path(flag_path: Optional[str] = None) -> str:
    if flag_path:
        return flag_path
    return os.environ.get(CONFIG_ENV_VAR) or DEFAULT_CONFIG_PATH


def load_config(flag_path: Optional[str] = None) -> AppConfig:
    """Loads and validates the configuration.

    Raises:
    - `ConfigError`: If the file is not valid JSON or fails validation, or
      an explicitly named file does not exist
    """
    path = resolve_config_path(flag_path)
    explicit = bool(flag_path) or bool(os.environ.get(CONFIG_ENV_VAR))
    if not os.path.exists(path):
        if explicit:
            raise ConfigError(path, 'file does not exist')
        config = AppConfig()
    else:
        try:
            with open(path, 'r', encoding='utf-8') as infile:
                raw = json.load(infile)
            config = AppConfig.parse_obj(raw)
        except ValueError as exc:
            raise ConfigError(path, str(exc))

    env_level = os.environ.get(LOG_LEVEL_ENV_VAR)
    if env_level:
        config = config.copy(update={'log_level': env_level})
    return config
