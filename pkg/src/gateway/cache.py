"""Caches embeddings in memcached, keyed by model and text."""
from typing import List, Optional
import hashlib
import json


EMBED_CACHE_PREFIX = 'embed:'
EMBED_CACHE_EXPIRE_SECONDS = 60 * 60 * 24 * 7


class EmbeddingCache:
    """Wraps a pymemcache client. Any client with get and set works, such as
    `pymemcache.test.utils.MockMemcacheClient`."""
    def __init__(self, client, expire: int = EMBED_CACHE_EXPIRE_SECONDS):
        self.client = client
        self.expire = expire

    @staticmethod
    def key(model_name: str, text: str) -> str:
        digest = hashlib.sha256(f'{model_name}\x1f{text}'.encode('utf-8')).hexdigest()
        return EMBED_CACHE_PREFIX + digest

    def get(self, model_name: str, text: str) -> Optional[List[float]]:
        raw = self.client.get(self.key(model_name, text))
        if raw is None:
            return None
        if isinstance(raw, bytes):
            raw = raw.decode('utf-8')
        return json.loads(raw)

    def set(self, model_name: str, text: str, vector: List[float]):
        self.client.set(self.key(model_name, text), json.dumps(vector), expire=self.expire)
