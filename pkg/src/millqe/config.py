"""Experiment configuration: a flat TOML file overridden by command-line flags."""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .corpus import AnalyzerConfig
from .expander import ExpansionConfig
from .index import BM25Params
from .prompts import load_shots


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    corpus: str | None = None
    corpus_format: str | None = None
    index: str | None = None
    queries: str | None = None
    qrels: str | None = None
    output_dir: str = "out"
    tag: str | None = None

    method: str = "MILL"
    prompt_kind: str | None = None
    n_candidates: int = 5
    k_candidates: int = 5
    n_select: int = 3
    k_select: int = 3
    query_repeats: int = 5
    baseline_samples: int = 3
    ensembled_prf: int = 3
    shots: str | None = None
    k1: float = 1.2
    b: float = 0.75
    k3: float = 8.0
    depth: int = 1000

    llm_backend: str = "mock"
    llm_endpoint: str | None = None
    llm_model: str = "gpt-3.5-turbo-instruct"
    temperature: float = 0.7
    top_p: float = 1.0
    max_tokens: int = 512
    embed_backend: str = "mock"
    embed_endpoint: str | None = None
    embed_model: str | None = None
    embed_dim: int | None = None
    embed_max_chars: int = 8000
    cache_dir: str | None = None
    retries: int = 3
    max_in_flight: int = 4
    mock_vocab: list[str] = field(default_factory=lambda: ["context"])
    vocab_file: str | None = None
    mock_items: int = 4

    seed: int = 0
    workers: int = field(default_factory=lambda: os.cpu_count() or 1)
    strict: bool = False
    diagnostics: bool = False

    stopwords: bool = True
    stemming: bool = True
    lowercase: bool = True

    @classmethod
    def keys(cls) -> set[str]:
        return {f.name for f in fields(cls)}

    def analyzer(self) -> AnalyzerConfig:
        return AnalyzerConfig(lowercase=self.lowercase, stopwords=self.stopwords, stemming=self.stemming)

    def bm25(self) -> BM25Params:
        return BM25Params(k1=self.k1, b=self.b, k3=self.k3)

    def expansion(self) -> ExpansionConfig:
        return ExpansionConfig(
            method=self.method,
            prompt_kind=self.prompt_kind,
            n_candidates=self.n_candidates,
            k_candidates=self.k_candidates,
            n_select=self.n_select,
            k_select=self.k_select,
            query_repeats=self.query_repeats,
            baseline_samples=self.baseline_samples,
            ensembled_prf=self.ensembled_prf,
            model=self.llm_model,
            temperature=self.temperature,
            top_p=self.top_p,
            max_tokens=self.max_tokens,
            bm25=self.bm25(),
            shots=load_shots(self.shots) if self.shots else None,
        )

    def vocab(self) -> list[str]:
        if self.vocab_file:
            words = [w.strip() for w in Path(self.vocab_file).read_text(encoding="utf-8").splitlines()]
            return [w for w in words if w]
        return list(self.mock_vocab)

    def validate(self) -> None:
        for name in ("corpus", "index", "queries", "qrels", "shots", "vocab_file"):
            path = getattr(self, name)
            if path is not None and not Path(path).exists():
                raise ConfigError(f"{name} path does not exist: {path}")
        if self.llm_backend not in ("mock", "remote") or self.embed_backend not in ("mock", "remote"):
            raise ConfigError("backends must be 'mock' or 'remote'")
        if self.llm_backend == "remote" and not self.llm_endpoint:
            raise ConfigError("llm_endpoint is required for the remote generation backend")
        if self.embed_backend == "remote" and not self.embed_endpoint:
            raise ConfigError("embed_endpoint is required for the remote embedding backend")
        if self.workers < 1 or self.depth < 1:
            raise ConfigError("workers and depth must be >= 1")
        try:
            self.expansion()
            self.bm25()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if not self.vocab():
            raise ConfigError("mock vocabulary is empty")


def _flatten(data: dict[str, Any]) -> dict[str, Any]:
    # tables are a grouping convenience only: [expansion] n_select = 3 -> n_select
    flat = {}
    for key, value in data.items():
        if isinstance(value, dict):
            flat.update(_flatten(value))
        else:
            flat[key.replace("-", "_")] = value
    return flat


def load_config(path: str | Path | None = None, overrides: dict[str, Any] | None = None) -> ExperimentConfig:
    values: dict[str, Any] = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                values.update(_flatten(tomllib.load(fh)))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    unknown = set(values) - ExperimentConfig.keys()
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return ExperimentConfig(**values)
