"""Text embeddings (remote, cached, or hashed bag-of-words mock) and cosine similarity."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .corpus import DEFAULT_ANALYZER, AnalyzerConfig, analyze
from .llm_gateway import HttpBackend, ProtocolError, ResponseCache, digest

REMOTE_DIM = 1536
MOCK_DIM = 256
MAX_INPUT_CHARS = 8000

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def fnv1a_64(data: bytes) -> int:
    h = FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & _MASK64
    return h


def bucket(token: str, dim: int) -> int:
    return fnv1a_64(token.encode("utf-8")) % dim


def mock_embed(text: str, dim: int = MOCK_DIM, analyzer: AnalyzerConfig = DEFAULT_ANALYZER) -> np.ndarray:
    """Hashed bag-of-words vector, L2-normalised.

    Each analyzed token adds one to bucket ``fnv1a_64(token) % dim``.
    """
    if dim < 2:
        raise ValueError("dim must be >= 2")
    tokens = analyze(text, analyzer)
    if not tokens:
        raise ValueError("text analyzes to zero tokens")
    vec = np.zeros(dim, dtype=np.float64)
    for tok in tokens:
        vec[bucket(tok, dim)] += 1.0
    return vec / np.linalg.norm(vec)


def cosine_sim(a: Sequence[float], b: Sequence[float]) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("cosine similarity is undefined for a zero vector")
    return float(np.dot(a, b) / (na * nb))


class Embedder:
    """Cache-backed encoder; ``backend`` is ``"mock"`` or ``"remote"``."""

    def __init__(
        self,
        backend: str = "mock",
        *,
        model: str | None = None,
        dim: int | None = None,
        cache: ResponseCache | None = None,
        http: HttpBackend | None = None,
        endpoint: str | None = None,
        max_chars: int = MAX_INPUT_CHARS,
        analyzer: AnalyzerConfig = DEFAULT_ANALYZER,
    ):
        if backend not in ("mock", "remote"):
            raise ValueError(f"unknown embedding backend {backend!r}")
        if backend == "remote" and http is None:
            if not endpoint:
                raise ValueError("remote embedding backend needs an endpoint")
            http = HttpBackend(endpoint)
        self.backend = backend
        self.dim = dim or (MOCK_DIM if backend == "mock" else REMOTE_DIM)
        self.model = model or (f"mock-bow-{self.dim}" if backend == "mock" else "text-embedding-ada-002")
        self.cache = cache if cache is not None else ResponseCache(None)
        self.http = http
        self.max_chars = max_chars
        self.analyzer = analyzer
        self.hits = 0

    def cache_key(self, text: str) -> str:
        return digest(self.backend, self.model, text)

    def embed(self, text: str) -> np.ndarray:
        if not text or not text.strip():
            raise ValueError("cannot embed empty text")
        text = text[: self.max_chars]
        key = self.cache_key(text)
        hit = self.cache.get(key)
        if hit is not None:
            self.hits += 1
            return np.asarray(hit["embedding"], dtype=np.float64)
        if self.backend == "mock":
            vec = mock_embed(text, self.dim, self.analyzer)
        else:
            vec = self._remote(text)
        self.cache.put(key, {"request": {"model": self.model, "input": text}, "embedding": vec.tolist(), "backend": self.backend})
        return vec

    __call__ = embed

    def _remote(self, text: str) -> np.ndarray:
        body = self.http.post({"model": self.model, "input": text})
        try:
            vec = np.asarray(body["data"][0]["embedding"], dtype=np.float64)
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise ProtocolError("embedding response lacks data[0].embedding") from exc
        if vec.shape != (self.dim,):
            raise ProtocolError(f"expected a {self.dim}-dim embedding, got shape {vec.shape}")
        if not np.all(np.isfinite(vec)):
            raise ProtocolError("embedding contains non-finite values")
        return vec
