"""Mutual verification of generated and retrieved contextual documents.

Every generated document is scored by its summed cosine similarity to all
PRF documents, every PRF document by its summed similarity to all generated
documents, and the top scorers on each side are kept.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Sequence

import numpy as np


class Source(str, Enum):
    LLM = "LLM"
    PRF = "PRF"


@dataclass(frozen=True)
class ContextualDocument:
    text: str
    source: Source
    origin_rank: int
    ref: str = ""  # doc_id for PRF, seed_tag for LLM
    embedding: np.ndarray | None = field(default=None, compare=False, repr=False)
    score: float | None = None

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("contextual documents must have non-empty text")
        if self.origin_rank < 0:
            raise ValueError("origin_rank must be non-negative")


@dataclass
class VerificationResult:
    selected_llm: list[ContextualDocument]
    selected_prf: list[ContextualDocument]
    llm_scores: dict[int, float]  # origin_rank -> summed similarity
    prf_scores: dict[int, float]
    grid: np.ndarray = field(repr=False)
    llm_candidates: list[ContextualDocument] = field(default_factory=list, repr=False)
    prf_candidates: list[ContextualDocument] = field(default_factory=list, repr=False)

    def to_diagnostics(self) -> dict:
        def rows(docs, scores, selected):
            chosen = {d.origin_rank for d in selected}
            return [
                {
                    "origin_rank": d.origin_rank,
                    "ref": d.ref,
                    "score": scores[d.origin_rank],
                    "selected": d.origin_rank in chosen,
                    "text": d.text,
                }
                for d in docs
            ]

        return {
            "llm": rows(self.llm_candidates, self.llm_scores, self.selected_llm),
            "prf": rows(self.prf_candidates, self.prf_scores, self.selected_prf),
            "similarity_grid": self.grid.tolist(),
        }


def _unit_rows(vecs: Sequence[Sequence[float]]) -> np.ndarray:
    mat = np.asarray([np.asarray(v, dtype=np.float64) for v in vecs])
    if mat.ndim != 2:
        raise ValueError("vectors must share one dimension")
    norms = np.linalg.norm(mat, axis=1)
    if np.any(norms == 0):
        raise ValueError("cosine similarity is undefined for a zero vector")
    return mat / norms[:, None]


def similarity_grid(llm_vecs, prf_vecs) -> np.ndarray:
    """Cosine similarities, shape (len(llm_vecs), len(prf_vecs))."""
    if len(llm_vecs) == 0 or len(prf_vecs) == 0:
        raise ValueError("mutual verification needs candidates on both sides")
    a = _unit_rows(llm_vecs)
    b = _unit_rows(prf_vecs)
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    return a @ b.T


def score_generated(llm_vecs, prf_vecs) -> list[float]:
    return similarity_grid(llm_vecs, prf_vecs).sum(axis=1).tolist()


def score_prf(prf_vecs, llm_vecs) -> list[float]:
    return similarity_grid(llm_vecs, prf_vecs).sum(axis=0).tolist()


def select_top(docs: Sequence[ContextualDocument], scores: Sequence[float], m: int) -> list[ContextualDocument]:
    """Highest-scoring ``min(m, len(docs))`` docs; ties go to the lower origin_rank."""
    if len(docs) != len(scores):
        raise ValueError(f"{len(docs)} docs but {len(scores)} scores")
    if m < 1:
        raise ValueError("m must be >= 1")
    order = sorted(range(len(docs)), key=lambda i: (-scores[i], docs[i].origin_rank))
    return [replace(docs[i], score=float(scores[i])) for i in order[:m]]


def mutual_verify(
    llm_docs: Sequence[ContextualDocument],
    prf_docs: Sequence[ContextualDocument],
    n_select: int,
    k_select: int,
    embed,
) -> VerificationResult:
    """Embed both candidate sets, cross-score them and keep the top of each.

    ``embed`` is an :class:`~millqe.embedder.Embedder` or any callable mapping
    text to a vector.
    """
    if not llm_docs or not prf_docs:
        raise ValueError("mutual verification needs candidates on both sides")
    if n_select < 1 or k_select < 1:
        raise ValueError("selection sizes must be >= 1")
    encode = embed.embed if hasattr(embed, "embed") else embed
    llm_docs = [d if d.embedding is not None else replace(d, embedding=encode(d.text)) for d in llm_docs]
    prf_docs = [d if d.embedding is not None else replace(d, embedding=encode(d.text)) for d in prf_docs]

    grid = similarity_grid([d.embedding for d in llm_docs], [d.embedding for d in prf_docs])
    s_llm = grid.sum(axis=1)
    s_prf = grid.sum(axis=0)
    return VerificationResult(
        selected_llm=select_top(llm_docs, s_llm.tolist(), n_select),
        selected_prf=select_top(prf_docs, s_prf.tolist(), k_select),
        llm_scores={d.origin_rank: float(s) for d, s in zip(llm_docs, s_llm)},
        prf_scores={d.origin_rank: float(s) for d, s in zip(prf_docs, s_prf)},
        grid=grid,
        llm_candidates=list(llm_docs),
        prf_candidates=list(prf_docs),
    )
