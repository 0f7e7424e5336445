"""Lazily opened handles to everything a runner talks to. Use as a context
manager; whatever was opened is closed on exit.

    with LazyIntegrations(config, logger_iden='runners/bench.py#main') as itgs:
        itgs.logger.info('Loaded {} documents', len(itgs.store))
"""
from loguru import logger as root_logger
from pymemcache.client.base import Client as MemcacheClient
import os

from config import AppConfig
from corpus.store import CorpusStore
from gateway.cache import EmbeddingCache
from gateway.client import Gateway
from gateway.mock import ScriptedTransport
from retrieval.hybrid import HybridRetriever
from retrieval.sparse import build_index, load_index, save_index


class LazyIntegrations:
    """Provides the logger, corpus store, sparse index, hybrid retriever,
    model gateway and embedding cache, each created on first use.

    Any handle may be supplied up front instead, which is how tests inject
    scripted gateways and prepared stores.

    Attributes:
    - `config (AppConfig)`: The configuration handles are built from
    - `logger_iden (str)`: Bound to every log line as `iden`
    """
    def __init__(self, config: AppConfig = None, logger_iden: str = 'unknown', mock=None,
                 store=None, index=None, retriever=None, gateway=None, cache=None):
        self.config = config if config is not None else AppConfig()
        self.logger_iden = logger_iden
        self._mock = mock
        self._logger = None
        self._store = store
        self._index = index
        self._retriever = retriever
        self._gateway = gateway
        self._cache = cache
        self._memcache_client = None
        self._owns_store = store is None

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_value, traceback):
        self.close()
        return False

    def close(self):
        if self._store is not None and self._owns_store:
            self._store.close()
            self._store = None
        if self._memcache_client is not None:
            self._memcache_client.close()
            self._memcache_client = None

    @property
    def logger(self):
        if self._logger is None:
            self._logger = root_logger.bind(iden=self.logger_iden)
        return self._logger

    @property
    def store(self) -> CorpusStore:
        if self._store is None:
            self._store = CorpusStore.open(self.config.store.directory)
        return self._store

    @property
    def index(self):
        """The persisted sparse index, built and saved on first use if the
        store has none"""
        if self._index is None:
            index = load_index(self.store.directory)
            if index is None:
                self.logger.info('No sparse index in {}, building one', self.store.directory)
                index = build_index(self.store)
                save_index(index, self.store.directory)
            self._index = index
        return self._index

    @property
    def retriever(self) -> HybridRetriever:
        if self._retriever is None:
            settings = self.config.retrieval
            retriever = HybridRetriever(
                self.store, self.index, k_rrf=settings.k_rrf, candidate_depth=settings.candidate_depth
            )
            for name in settings.dense_endpoints:
                retriever.register_dense(self.gateway.dense_client(name))
            self._retriever = retriever
        return self._retriever

    @property
    def cache(self):
        """The embedding cache, or None if memcached is not configured"""
        if self._cache is None:
            host = self.config.cache.memcached_host or os.environ.get('MEMCACHED_HOST')
            if host is None:
                return None
            port = int(os.environ.get('MEMCACHED_PORT', self.config.cache.memcached_port))
            self._memcache_client = MemcacheClient((host, port))
            self._cache = EmbeddingCache(self._memcache_client)
        return self._cache

    @property
    def gateway(self) -> Gateway:
        if self._gateway is None:
            settings = self.config.gateway
            mock = self._mock
            if mock is None and settings.mock_script:
                mock = ScriptedTransport.from_file(settings.mock_script)
            self._gateway = Gateway(
                self.config.endpoints, mock=mock, force_mock=bool(settings.mock_script),
                cache=self.cache, backoff_ms=settings.backoff_ms, logger=self.logger
            )
        return self._gateway
