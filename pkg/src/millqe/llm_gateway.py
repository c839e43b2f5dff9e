"""Text-generation backends: OpenAI-compatible completions, a JSONL response
cache, and a deterministic offline mock."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import re
import threading
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Sequence

import httpx

log = logging.getLogger(__name__)

API_KEY_ENV = "LLM_API_KEY"
MOCK_ITEMS = 4


class BackendError(RuntimeError):
    """Base class for generation and embedding backend failures."""


class TransportError(BackendError):
    pass


class ProtocolError(BackendError):
    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status


class EmptyGenerationError(BackendError):
    pass


def digest(*parts: Any) -> str:
    payload = json.dumps(list(parts), sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class ResponseCache:
    """Append-only JSONL cache; the last record for a key wins on load."""

    def __init__(self, path: str | Path | None):
        self.path = Path(path) if path is not None else None
        self._lock = threading.Lock()
        self._mem: dict[str, dict] = {}
        self._loaded = False

    def reload(self) -> None:
        with self._lock:
            self._load_locked()

    def _load_locked(self) -> None:
        self._mem = {}
        self._loaded = True
        if self.path is None or not self.path.exists():
            return
        with open(self.path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError:
                    # a torn final line after a crash
                    log.warning("ignoring unreadable cache line in %s", self.path)
                    continue
                self._mem[rec["key"]] = rec

    def evict_memory(self) -> None:
        """Drop the in-memory view; the next lookup re-reads the file."""
        with self._lock:
            self._mem = {}
            self._loaded = False

    def get(self, key: str) -> dict | None:
        with self._lock:
            if not self._loaded:
                self._load_locked()
            return self._mem.get(key)

    def put(self, key: str, record: dict) -> None:
        rec = {"key": key, **record, "timestamp": time.time()}
        with self._lock:
            self._mem[key] = rec
            if self.path is not None:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(rec, ensure_ascii=False) + "\n")

    def __len__(self) -> int:
        with self._lock:
            return len(self._mem)


@dataclass(frozen=True)
class GenerationRequest:
    prompt: str
    model: str = "gpt-3.5-turbo-instruct"
    temperature: float = 0.7
    top_p: float = 1.0
    max_tokens: int = 512
    seed_tag: str = "s0"

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not 0 < self.top_p <= 1:
            raise ValueError("top_p must lie in (0, 1]")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")


@dataclass(frozen=True)
class GenerationResponse:
    text: str
    cached: bool
    backend: str


# --- mock ---------------------------------------------------------------------

_WORD = re.compile(r"[^\W_]+")


def mock_generate(req: GenerationRequest, vocab: Sequence[str], items: int = MOCK_ITEMS, salt: str = "") -> str:
    """Deterministic QQD-shaped completion built from ``vocab`` and prompt words.

    Every item carries at least one vocabulary word, so injected vocabulary is
    guaranteed to surface in the output.
    """
    if not vocab:
        raise ValueError("mock vocabulary must be non-empty")
    rng = random.Random(digest(salt, req.prompt, req.seed_tag))
    prompt_words = [w.lower() for w in _WORD.findall(req.prompt)] or list(vocab)
    pool = list(vocab) + prompt_words
    lines = []
    for i in range(1, items + 1):
        sub = " ".join(rng.choice(prompt_words) for _ in range(rng.randint(2, 4)))
        words = [rng.choice(vocab)] + [rng.choice(pool) for _ in range(rng.randint(6, 12))]
        rng.shuffle(words)
        passage = " ".join(words)
        lines.append(f"{i}. What about {sub}? {passage[0].upper()}{passage[1:]}.")
    return "\n".join(lines)


# --- HTTP ---------------------------------------------------------------------


class HttpBackend:
    """JSON POST with bounded retries, exponential backoff and an in-flight cap."""

    def __init__(
        self,
        endpoint: str,
        api_key: str | None = None,
        retries: int = 3,
        backoff: float = 0.5,
        max_in_flight: int = 4,
        timeout: float = 60.0,
        transport: httpx.BaseTransport | None = None,
        sleep=time.sleep,
    ):
        if retries < 1:
            raise ValueError("retries must be >= 1")
        self.endpoint = endpoint
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        self.retries = retries
        self.backoff = backoff
        self._slots = threading.BoundedSemaphore(max_in_flight)
        self._client = httpx.Client(timeout=timeout, transport=transport)
        self._sleep = sleep
        self.attempts = 0

    def post(self, payload: dict) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        last: Exception | None = None
        for attempt in range(1, self.retries + 1):
            self.attempts += 1
            try:
                with self._slots:
                    resp = self._client.post(self.endpoint, json=payload, headers=headers)
            except httpx.TransportError as exc:
                last = TransportError(f"{self.endpoint}: {exc}")
                log.warning("attempt %d/%d to %s failed: %s", attempt, self.retries, self.endpoint, exc)
            else:
                if resp.status_code == 429 or resp.status_code >= 500:
                    last = ProtocolError(f"{self.endpoint}: HTTP {resp.status_code}", resp.status_code)
                    log.warning("attempt %d/%d to %s got HTTP %d", attempt, self.retries, self.endpoint, resp.status_code)
                elif not 200 <= resp.status_code < 300:
                    raise ProtocolError(f"{self.endpoint}: HTTP {resp.status_code}: {resp.text[:200]}", resp.status_code)
                else:
                    log.debug("attempt %d/%d to %s succeeded", attempt, self.retries, self.endpoint)
                    try:
                        return resp.json()
                    except ValueError as exc:
                        raise ProtocolError(f"{self.endpoint}: response is not JSON", resp.status_code) from exc
            if attempt < self.retries:
                self._sleep(self.backoff * 2 ** (attempt - 1))
        assert last is not None
        raise last

    def close(self) -> None:
        self._client.close()


class LLMGateway:
    """Cached completion generator backed by either a remote endpoint or the mock."""

    def __init__(
        self,
        backend: str = "mock",
        *,
        cache: ResponseCache | None = None,
        vocab: Sequence[str] = ("context",),
        mock_items: int = MOCK_ITEMS,
        seed: int = 0,
        http: HttpBackend | None = None,
        endpoint: str | None = None,
    ):
        if backend not in ("mock", "remote"):
            raise ValueError(f"unknown generation backend {backend!r}")
        if backend == "remote" and http is None:
            if not endpoint:
                raise ValueError("remote generation backend needs an endpoint")
            http = HttpBackend(endpoint)
        self.backend = backend
        self.cache = cache if cache is not None else ResponseCache(None)
        self.vocab = list(vocab)
        self.mock_items = mock_items
        self.seed = seed
        self.http = http

    def _backend_id(self) -> str:
        # seed and vocabulary change mock output, so they are part of its identity
        if self.backend == "mock":
            return f"mock:{self.seed}:{digest(self.vocab, self.mock_items)[:12]}"
        return "remote"

    def cache_key(self, req: GenerationRequest) -> str:
        return digest(self._backend_id(), req.model, req.prompt, req.temperature, req.top_p, req.max_tokens, req.seed_tag)

    def generate(self, req: GenerationRequest) -> GenerationResponse:
        key = self.cache_key(req)
        hit = self.cache.get(key)
        if hit is not None:
            return GenerationResponse(hit["text"], True, self.backend)
        if self.backend == "mock":
            text = mock_generate(req, self.vocab, self.mock_items, salt=str(self.seed))
        else:
            text = self._remote(req)
        if not text.strip():
            raise EmptyGenerationError(f"empty completion for seed_tag={req.seed_tag}")
        self.cache.put(key, {"request": asdict(req), "text": text, "backend": self.backend})
        return GenerationResponse(text, False, self.backend)

    def _remote(self, req: GenerationRequest) -> str:
        payload = {
            "model": req.model,
            "prompt": req.prompt,
            "temperature": req.temperature,
            "top_p": req.top_p,
            "max_tokens": req.max_tokens,
        }
        body = self.http.post(payload)
        try:
            return str(body["choices"][0]["text"])
        except (KeyError, IndexError, TypeError) as exc:
            raise ProtocolError("completion response lacks choices[0].text") from exc
