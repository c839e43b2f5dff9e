"""Corpus, query and text-analysis plumbing.

Corpora come in two flavours: BEIR-style JSONL (``_id``, ``title``, ``text``)
and MSMARCO-style TSV (``doc_id<TAB>text``). Queries use the same two layouts.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
from dataclasses import asdict, dataclass
from functools import lru_cache
from pathlib import Path
from typing import Iterator, Literal

from nltk.stem.porter import PorterStemmer

from ._stopwords import ENGLISH_STOPWORDS

log = logging.getLogger(__name__)

OnError = Literal["skip", "raise"]


@dataclass(frozen=True)
class Document:
    doc_id: str
    text: str
    title: str = ""


@dataclass(frozen=True)
class Query:
    query_id: str
    text: str


class RecordError(ValueError):
    """A malformed input record, tagged with its 1-based line number."""

    def __init__(self, path: str | Path, line_no: int, reason: str):
        self.path = str(path)
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"{path}:{line_no}: {reason}")


def _handle(err: RecordError, on_error: OnError) -> None:
    if on_error == "raise":
        raise err
    log.warning("skipping malformed record: %s", err)


def ingest_jsonl(path: str | Path, on_error: OnError = "skip") -> Iterator[Document]:
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                _handle(RecordError(path, line_no, f"invalid JSON ({exc.msg})"), on_error)
                continue
            if not isinstance(rec, dict):
                _handle(RecordError(path, line_no, "record is not a JSON object"), on_error)
                continue
            doc_id = rec.get("_id")
            if doc_id is None or str(doc_id) == "":
                _handle(RecordError(path, line_no, "missing _id"), on_error)
                continue
            body = str(rec.get("text") or "")
            title = str(rec.get("title") or "")
            text = f"{title} {body}" if title else body
            if not text.strip():
                _handle(RecordError(path, line_no, "empty text"), on_error)
                continue
            yield Document(doc_id=str(doc_id), text=text, title=title)


def ingest_tsv(path: str | Path, on_error: OnError = "skip") -> Iterator[Document]:
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 2:
                _handle(RecordError(path, line_no, f"expected 2 columns, got {len(fields)}"), on_error)
                continue
            doc_id, text = fields
            if not doc_id or not text.strip():
                _handle(RecordError(path, line_no, "empty id or text"), on_error)
                continue
            yield Document(doc_id=doc_id, text=text)


def _guess_format(path: str | Path) -> str:
    suffix = Path(path).suffix.lower()
    return "jsonl" if suffix in (".jsonl", ".json") else "tsv"


def ingest(path: str | Path, fmt: str | None = None, on_error: OnError = "skip") -> Iterator[Document]:
    fmt = fmt or _guess_format(path)
    if fmt == "jsonl":
        return ingest_jsonl(path, on_error)
    if fmt == "tsv":
        return ingest_tsv(path, on_error)
    raise ValueError(f"unknown corpus format {fmt!r}")


def read_queries(path: str | Path, fmt: str | None = None, on_error: OnError = "skip") -> list[Query]:
    """Load a query set (TSV ``qid<TAB>text`` or JSONL ``_id``/``text``)."""
    docs = ingest(path, fmt, on_error)
    queries: list[Query] = []
    seen: set[str] = set()
    for doc in docs:
        if doc.doc_id in seen:
            raise ValueError(f"duplicate query id {doc.doc_id!r} in {path}")
        seen.add(doc.doc_id)
        queries.append(Query(doc.doc_id, doc.text))
    return queries


# --- analysis -----------------------------------------------------------------

TokenStream = list[str]

_SPLIT = re.compile(r"[^\W_]+")
_stemmer = PorterStemmer(PorterStemmer.ORIGINAL_ALGORITHM)


@lru_cache(maxsize=200_000)
def _stem(token: str) -> str:
    return _stemmer.stem(token, to_lowercase=False)


@dataclass(frozen=True)
class AnalyzerConfig:
    lowercase: bool = True
    stopwords: bool = True
    stemming: bool = True

    def fingerprint(self) -> str:
        payload = json.dumps(asdict(self), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


DEFAULT_ANALYZER = AnalyzerConfig()


def analyze(text: str, config: AnalyzerConfig = DEFAULT_ANALYZER) -> TokenStream:
    if config.lowercase:
        text = text.lower()
    tokens = _SPLIT.findall(text)
    if config.stopwords:
        tokens = [t for t in tokens if t.lower() not in ENGLISH_STOPWORDS]
    if config.stemming:
        tokens = [_stem(t) for t in tokens]
    return [t for t in tokens if t]
