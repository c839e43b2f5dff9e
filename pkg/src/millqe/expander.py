"""Expanded-query composition and the per-query expansion pipelines."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Protocol, Sequence

from .corpus import Query
from .embedder import Embedder
from .index import BM25Params, PostingsIndex
from .llm_gateway import GenerationRequest, LLMGateway
from .prompts import FewShotExample, PromptKind, build_prompt, default_shots
from .verifier import ContextualDocument, Source, VerificationResult, mutual_verify

log = logging.getLogger(__name__)


class Method(str, Enum):
    NONE = "no-expansion"
    MILL = "MILL"
    WO_PRF = "w/o_PRF"
    WO_MV = "w/o_MV"
    WO_QQD = "w/o_QQD"
    BASELINE = "baseline"
    ENSEMBLED = "ensembled"

    @classmethod
    def parse(cls, name: str) -> "Method":
        norm = name.strip().lower().replace("-", "_").replace("/", "_")
        for m in cls:
            if m.value.lower().replace("-", "_").replace("/", "_") == norm or m.name.lower() == norm:
                return m
        raise ValueError(f"unknown expansion method {name!r}")


@dataclass
class ExpansionConfig:
    method: Method = Method.MILL
    prompt_kind: PromptKind | None = None  # baseline / ensembled only
    n_candidates: int = 5
    k_candidates: int = 5
    n_select: int = 3
    k_select: int = 3
    query_repeats: int = 5
    baseline_samples: int = 3
    ensembled_prf: int = 3
    model: str = "gpt-3.5-turbo-instruct"
    temperature: float = 0.7
    top_p: float = 1.0
    max_tokens: int = 512
    bm25: BM25Params = field(default_factory=BM25Params)
    shots: Sequence[FewShotExample] | None = None

    def __post_init__(self):
        if not isinstance(self.method, Method):
            self.method = Method.parse(self.method)
        if self.prompt_kind is not None and not isinstance(self.prompt_kind, PromptKind):
            self.prompt_kind = PromptKind.parse(self.prompt_kind)
        if self.n_select > self.n_candidates or self.k_select > self.k_candidates:
            raise ValueError("selection sizes cannot exceed candidate counts")
        if min(self.n_candidates, self.k_candidates, self.n_select, self.k_select) < 1:
            raise ValueError("candidate and selection counts must be >= 1")
        if self.query_repeats < 1:
            raise ValueError("query_repeats must be >= 1")
        if self.baseline_samples < 1 or self.ensembled_prf < 0:
            raise ValueError("baseline_samples must be >= 1 and ensembled_prf >= 0")
        if self.method in (Method.BASELINE, Method.ENSEMBLED) and self.prompt_kind is None:
            raise ValueError(f"method {self.method.value} needs a prompt_kind")

    @property
    def label(self) -> str:
        if self.method is Method.BASELINE:
            return self.prompt_kind.value
        if self.method is Method.ENSEMBLED:
            return self.prompt_kind.value + "*"
        return self.method.value


@dataclass
class ExpandedQuery:
    query_id: str
    text: str
    provenance: dict
    verification: VerificationResult | None = field(default=None, repr=False)


class ExpansionError(RuntimeError):
    def __init__(self, query_id: str, cause: Exception):
        super().__init__(f"query {query_id}: {cause}")
        self.query_id = query_id


def _component(doc: ContextualDocument) -> dict:
    rec = {"source": doc.source.value, "origin_rank": doc.origin_rank, "ref": doc.ref}
    if doc.score is not None:
        rec["score"] = doc.score
    return rec


def compose(
    q: Query,
    prf_sel: Sequence[ContextualDocument],
    llm_sel: Sequence[ContextualDocument],
    repeats: int = 5,
) -> ExpandedQuery:
    """Original query ``repeats`` times, then PRF texts, then generated texts."""
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    parts = [q.text] * repeats + [d.text for d in prf_sel] + [d.text for d in llm_sel]
    provenance = {
        "query_id": q.query_id,
        "original_query": q.text,
        "repeats": repeats,
        "components": [_component(d) for d in [*prf_sel, *llm_sel]],
        "prf_ids": [d.ref for d in prf_sel],
        "llm_tags": [d.ref for d in llm_sel],
    }
    return ExpandedQuery(q.query_id, " ".join(parts), provenance)


class Expander(Protocol):
    """Anything that turns a query into an expanded query.

    Traditional term-based expanders (Bo1, KL, RM3, ...) plug in here through
    :data:`EXTERNAL_EXPANDERS`; none ship with this package.
    """

    def expand(self, q: Query) -> ExpandedQuery: ...


EXTERNAL_EXPANDERS: dict[str, Callable[..., Expander]] = {}


def register_expander(name: str, factory: Callable[..., Expander]) -> None:
    EXTERNAL_EXPANDERS[name] = factory


def _prf_docs(q: Query, index: PostingsIndex, k: int, params: BM25Params) -> list[ContextualDocument]:
    ranked = index.search(q.text, k=k, params=params, query_id=q.query_id)
    return [
        ContextualDocument(index.text(doc_id), Source.PRF, rank, ref=doc_id)
        for rank, (doc_id, _) in enumerate(ranked.entries, 1)
    ]


def _generate(prompt: str, n: int, cfg: ExpansionConfig, gateway: LLMGateway) -> list[ContextualDocument]:
    docs = []
    for i in range(n):
        req = GenerationRequest(
            prompt=prompt,
            model=cfg.model,
            temperature=cfg.temperature,
            top_p=cfg.top_p,
            max_tokens=cfg.max_tokens,
            seed_tag=f"s{i}",
        )
        resp = gateway.generate(req)
        docs.append(ContextualDocument(resp.text, Source.LLM, i, ref=req.seed_tag))
    return docs


def expand(
    q: Query,
    cfg: ExpansionConfig,
    index: PostingsIndex,
    gateway: LLMGateway | None = None,
    embedder: Embedder | None = None,
) -> ExpandedQuery:
    try:
        out = _expand(q, cfg, index, gateway, embedder)
    except ExpansionError:
        raise
    except Exception as exc:
        raise ExpansionError(q.query_id, exc) from exc
    out.provenance["method"] = cfg.label
    return out


def _expand(q, cfg: ExpansionConfig, index, gateway, embedder) -> ExpandedQuery:
    method = cfg.method
    if method is Method.NONE:
        return compose(q, [], [], 1)

    if method in (Method.BASELINE, Method.ENSEMBLED):
        kind = cfg.prompt_kind
        shots = list(cfg.shots) if cfg.shots is not None else list(default_shots(kind)) if kind.needs_shots else []
        prf_for_prompt = [d.text for d in _prf_docs(q, index, 3, cfg.bm25)] if kind.needs_prf else []
        prompt = build_prompt(kind, q.text, shots, prf_for_prompt)
        completions = _generate(prompt, cfg.baseline_samples, cfg, gateway)
        out = compose(q, [], completions, cfg.query_repeats)
        if method is Method.ENSEMBLED and cfg.ensembled_prf > 0:
            extra = _prf_docs(q, index, cfg.ensembled_prf, cfg.bm25)
            out.text = " ".join([out.text, *(d.text for d in extra)])
            out.provenance["components"] += [_component(d) for d in extra]
            out.provenance["prf_ids"] = [d.ref for d in extra]
        return out

    kind = PromptKind.QUERY2DOC if method is Method.WO_QQD else PromptKind.QQD
    generated = _generate(build_prompt(kind, q.text), cfg.n_candidates, cfg, gateway)

    if method is Method.WO_PRF:
        return compose(q, [], generated[: cfg.n_select], cfg.query_repeats)

    prf = _prf_docs(q, index, cfg.k_candidates, cfg.bm25)
    if method is Method.WO_MV:
        return compose(q, prf[: cfg.k_select], generated[: cfg.n_select], cfg.query_repeats)

    if not prf:
        log.warning("query %s: no PRF documents retrieved, falling back to w/o_PRF", q.query_id)
        out = compose(q, [], generated[: cfg.n_select], cfg.query_repeats)
        out.provenance["fallback"] = Method.WO_PRF.value
        return out

    result = mutual_verify(generated, prf, cfg.n_select, cfg.k_select, embedder)
    out = compose(q, result.selected_prf, result.selected_llm, cfg.query_repeats)
    out.provenance["candidates"] = {
        "prf_ids": [d.ref for d in prf],
        "llm_tags": [d.ref for d in generated],
        "prf_scores": {d.ref: result.prf_scores[d.origin_rank] for d in prf},
        "llm_scores": {d.ref: result.llm_scores[d.origin_rank] for d in generated},
    }
    out.verification = result
    return out


class PipelineExpander:
    """Binds backends and a config so a query can be expanded with one call."""

    def __init__(self, cfg: ExpansionConfig, index: PostingsIndex, gateway=None, embedder=None):
        self.cfg = cfg
        self.index = index
        self.gateway = gateway
        self.embedder = embedder

    def expand(self, q: Query) -> ExpandedQuery:
        return expand(q, self.cfg, self.index, self.gateway, self.embedder)
