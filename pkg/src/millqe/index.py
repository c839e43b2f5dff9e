"""In-memory inverted index with BM25 ranking.

Documents are assigned internal ids in lexicographic ``doc_id`` order, so
postings sorted by internal id are also sorted by ``doc_id`` and the
ascending-``doc_id`` tie-break falls out of a stable sort on internal ids.
"""

from __future__ import annotations

import gzip
import json
import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .corpus import DEFAULT_ANALYZER, AnalyzerConfig, Document, TokenStream, analyze

INDEX_FORMAT = "millqe-index"
INDEX_VERSION = 1


class IndexBuildError(ValueError):
    pass


class IndexFormatError(ValueError):
    pass


@dataclass(frozen=True)
class BM25Params:
    k1: float = 1.2
    b: float = 0.75
    k3: float = 8.0

    def __post_init__(self):
        if self.k1 < 0 or self.k3 < 0:
            raise ValueError("k1 and k3 must be non-negative")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError("b must lie in [0, 1]")


@dataclass
class RankedList:
    query_id: str
    entries: list[tuple[str, float]] = field(default_factory=list)

    def doc_ids(self) -> list[str]:
        return [d for d, _ in self.entries]

    def __len__(self) -> int:
        return len(self.entries)


def idf(df: int, n_docs: int) -> float:
    return math.log(1.0 + (n_docs - df + 0.5) / (df + 0.5))


def term_weight(tf: float, doc_len: float, avg_len: float, df: int, n_docs: int, qtf: float, params: BM25Params) -> float:
    """Contribution of a single query term to a document's BM25 score."""
    if tf <= 0:
        return 0.0
    k1, b, k3 = params.k1, params.b, params.k3
    doc_part = ((k1 + 1.0) * tf) / (k1 * (1.0 - b + b * doc_len / avg_len) + tf)
    query_part = ((k3 + 1.0) * qtf) / (k3 + qtf)
    return idf(df, n_docs) * doc_part * query_part


class PostingsIndex:
    """Immutable term -> (doc, tf) index plus the stored passage texts."""

    def __init__(self, doc_ids, texts, doc_lengths, postings, analyzer: AnalyzerConfig):
        self.doc_ids: list[str] = list(doc_ids)
        self._texts: list[str] = list(texts)
        self.doc_lengths = np.asarray(doc_lengths, dtype=np.int64)
        self._postings: dict[str, tuple[np.ndarray, np.ndarray]] = postings
        self.analyzer = analyzer
        self._pos = {d: i for i, d in enumerate(self.doc_ids)}
        self.doc_count = len(self.doc_ids)
        self.avg_doc_length = float(self.doc_lengths.mean()) if self.doc_count else 0.0
        self.total_tokens = int(self.doc_lengths.sum())
        for ids, tfs in postings.values():
            ids.flags.writeable = False
            tfs.flags.writeable = False
        self.doc_lengths.flags.writeable = False

    # --- statistics -----------------------------------------------------------

    @property
    def vocabulary_size(self) -> int:
        return len(self._postings)

    def document_frequency(self, term: str) -> int:
        entry = self._postings.get(term)
        return 0 if entry is None else len(entry[0])

    def postings(self, term: str) -> list[tuple[str, int]]:
        entry = self._postings.get(term)
        if entry is None:
            return []
        ids, tfs = entry
        return [(self.doc_ids[i], int(tf)) for i, tf in zip(ids, tfs)]

    def doc_length(self, doc_id: str) -> int:
        return int(self.doc_lengths[self._pos[doc_id]])

    def text(self, doc_id: str) -> str:
        return self._texts[self._pos[doc_id]]

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._pos

    def stats(self) -> dict:
        return {
            "doc_count": self.doc_count,
            "vocabulary_size": self.vocabulary_size,
            "total_tokens": self.total_tokens,
            "avg_doc_length": self.avg_doc_length,
        }

    # --- search ---------------------------------------------------------------

    def search(self, text: str, k: int | None = 1000, params: BM25Params = BM25Params(), query_id: str = "") -> RankedList:
        return bm25_search(self, analyze(text, self.analyzer), k, params, query_id=query_id)

    # --- persistence ----------------------------------------------------------

    def save(self, path: str | Path) -> None:
        header = {
            "format": INDEX_FORMAT,
            "version": INDEX_VERSION,
            "analyzer": asdict(self.analyzer),
            "analyzer_hash": self.analyzer.fingerprint(),
            **self.stats(),
        }
        body = {
            "doc_ids": self.doc_ids,
            "texts": self._texts,
            "doc_lengths": self.doc_lengths.tolist(),
            "postings": {t: [ids.tolist(), tfs.tolist()] for t, (ids, tfs) in sorted(self._postings.items())},
        }
        with gzip.open(path, "wt", encoding="utf-8") as fh:
            fh.write(json.dumps(header, sort_keys=True) + "\n")
            json.dump(body, fh, separators=(",", ":"))

    @classmethod
    def load(cls, path: str | Path) -> "PostingsIndex":
        try:
            with gzip.open(path, "rt", encoding="utf-8") as fh:
                header = json.loads(fh.readline())
                if header.get("format") != INDEX_FORMAT:
                    raise IndexFormatError(f"{path}: not a {INDEX_FORMAT} file")
                if header.get("version") != INDEX_VERSION:
                    raise IndexFormatError(f"{path}: unsupported index version {header.get('version')}")
                body = json.loads(fh.read())
        except (OSError, json.JSONDecodeError, EOFError) as exc:
            raise IndexFormatError(f"{path}: unreadable index ({exc})") from exc
        analyzer = AnalyzerConfig(**header["analyzer"])
        if analyzer.fingerprint() != header["analyzer_hash"]:
            raise IndexFormatError(f"{path}: analyzer hash mismatch")
        postings = {
            t: (np.asarray(ids, dtype=np.int64), np.asarray(tfs, dtype=np.int64))
            for t, (ids, tfs) in body["postings"].items()
        }
        return cls(body["doc_ids"], body["texts"], body["doc_lengths"], postings, analyzer)

    @staticmethod
    def read_header(path: str | Path) -> dict:
        with gzip.open(path, "rt", encoding="utf-8") as fh:
            return json.loads(fh.readline())


def build_index(docs: Iterable[Document], analyzer: AnalyzerConfig = DEFAULT_ANALYZER) -> PostingsIndex:
    by_id: dict[str, Document] = {}
    for doc in docs:
        if doc.doc_id in by_id:
            raise IndexBuildError(f"duplicate doc_id {doc.doc_id!r}")
        by_id[doc.doc_id] = doc
    if not by_id:
        raise IndexBuildError("empty corpus")

    doc_ids = sorted(by_id)
    lengths = []
    accum: dict[str, tuple[list[int], list[int]]] = {}
    for i, doc_id in enumerate(doc_ids):
        counts = Counter(analyze(by_id[doc_id].text, analyzer))
        lengths.append(sum(counts.values()))
        for term, tf in counts.items():
            ids, tfs = accum.setdefault(term, ([], []))
            ids.append(i)
            tfs.append(tf)
    postings = {t: (np.asarray(ids, dtype=np.int64), np.asarray(tfs, dtype=np.int64)) for t, (ids, tfs) in accum.items()}
    return PostingsIndex(doc_ids, [by_id[d].text for d in doc_ids], lengths, postings, analyzer)


def bm25_search(
    index: PostingsIndex,
    query_tokens: TokenStream,
    k: int | None = 1000,
    params: BM25Params = BM25Params(),
    query_id: str = "",
) -> RankedList:
    """Top-``k`` documents for an analyzed query; ``k=None`` returns every match."""
    if k is not None and k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    qtf = Counter(query_tokens)
    n_docs = index.doc_count
    avg_len = index.avg_doc_length
    scores = np.zeros(n_docs, dtype=np.float64)
    matched = np.zeros(n_docs, dtype=bool)
    k1, b, k3 = params.k1, params.b, params.k3
    for term, q in qtf.items():
        entry = index._postings.get(term)
        if entry is None:
            continue
        ids, tfs = entry
        tf = tfs.astype(np.float64)
        norm = k1 * (1.0 - b + b * index.doc_lengths[ids] / avg_len)
        weight = idf(len(ids), n_docs) * ((k3 + 1.0) * q) / (k3 + q)
        scores[ids] += weight * ((k1 + 1.0) * tf) / (norm + tf)
        matched[ids] = True

    cand = np.flatnonzero(matched)
    if cand.size == 0:
        return RankedList(query_id, [])
    # internal ids are in doc_id order, so a stable sort on -score keeps ties ascending
    order = cand[np.argsort(-scores[cand], kind="stable")]
    if k is not None:
        order = order[:k]
    return RankedList(query_id, [(index.doc_ids[i], float(scores[i])) for i in order])
