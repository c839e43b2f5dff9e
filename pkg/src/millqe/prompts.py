"""Prompt templates for query-query-document generation and the LLM baselines."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence


class PromptKind(str, Enum):
    QQD = "QQD"
    QUERY2TERM = "Query2Term"
    QUERY2TERM_FS = "Query2Term-FS"
    QUERY2TERM_PRF = "Query2Term-PRF"
    QUERY2DOC = "Query2Doc"
    QUERY2DOC_FS = "Query2Doc-FS"
    QUERY2DOC_PRF = "Query2Doc-PRF"
    COT = "CoT"
    COT_PRF = "CoT-PRF"

    @property
    def needs_shots(self) -> bool:
        return self in (PromptKind.QUERY2TERM_FS, PromptKind.QUERY2DOC_FS)

    @property
    def needs_prf(self) -> bool:
        return self in (PromptKind.QUERY2TERM_PRF, PromptKind.QUERY2DOC_PRF, PromptKind.COT_PRF)

    @classmethod
    def parse(cls, name: str) -> "PromptKind":
        norm = name.replace("_", "-").lower()
        for kind in cls:
            if kind.value.lower() == norm or kind.name.lower() == name.lower():
                return kind
        raise ValueError(f"unknown prompt kind {name!r}")


N_SHOTS = 3
N_PRF = 3

QQD_INSTRUCTION = "what sub-queries should be searched to answer the following query: {query}."
QQD_GENERATE = "Please generate the sub-queries and write passages to answer these generated queries."
TERM_INSTRUCTION = "Write some keywords for the given query:"
DOC_INSTRUCTION = "Write a passage answer the following query:"
COT_INSTRUCTION = "Answer the following query:"
COT_RATIONALE = "Give the rationale before answering."


@dataclass(frozen=True)
class FewShotExample:
    query: str
    completion: str

    def __post_init__(self):
        if not self.query.strip() or not self.completion.strip():
            raise ValueError("few-shot examples need a non-empty query and completion")


# Neutral placeholders, not taken from any published experiment. Supply real
# shots with load_shots() for few-shot baselines.
DEFAULT_TERM_SHOTS = (
    FewShotExample("how long do tomatoes take to ripen", "tomato, ripening time, days, vine, ethylene, color change"),
    FewShotExample("symptoms of iron deficiency", "fatigue, anemia, pale skin, ferritin, shortness of breath"),
    FewShotExample("what is a suspension bridge", "bridge, cables, towers, deck, tension, span"),
)
DEFAULT_DOC_SHOTS = (
    FewShotExample(
        "how long do tomatoes take to ripen",
        "Most tomatoes ripen 20 to 30 days after the fruit sets. Warm temperatures and ethylene speed the change from green to red.",
    ),
    FewShotExample(
        "symptoms of iron deficiency",
        "Iron deficiency commonly causes fatigue, pale skin and shortness of breath. A blood test measuring ferritin confirms it.",
    ),
    FewShotExample(
        "what is a suspension bridge",
        "A suspension bridge hangs its deck from vertical cables attached to main cables strung between tall towers.",
    ),
)


def load_shots(path: str | Path) -> list[FewShotExample]:
    """Read few-shot examples from JSONL records with ``query`` and ``completion``."""
    shots = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            if not line.strip():
                continue
            rec = json.loads(line)
            try:
                shots.append(FewShotExample(rec["query"], rec["completion"]))
            except KeyError as exc:
                raise ValueError(f"{path}:{line_no}: missing field {exc}") from None
    return shots


def default_shots(kind: PromptKind) -> tuple[FewShotExample, ...]:
    return DEFAULT_TERM_SHOTS if kind is PromptKind.QUERY2TERM_FS else DEFAULT_DOC_SHOTS


def _few_shot(instruction: str, label: str, query: str, shots: Sequence[FewShotExample]) -> str:
    lines = [instruction, "", "Context:"]
    for shot in shots:
        lines += [f"query: {shot.query}", f"{label}: {shot.completion}"]
    lines += ["", f"query: {query}", f"{label}:"]
    return "\n".join(lines)


def _with_prf(instruction: str, query: str, prf_docs: Sequence[str], cue: str) -> str:
    return "\n".join([instruction, "", "Context:", *prf_docs, "", f"query: {query}", cue])


def build_prompt(
    kind: PromptKind,
    query: str,
    shots: Sequence[FewShotExample] = (),
    prf_docs: Sequence[str] = (),
) -> str:
    kind = PromptKind(kind)
    if kind.needs_shots and len(shots) != N_SHOTS:
        raise ValueError(f"{kind.value} needs exactly {N_SHOTS} few-shot examples, got {len(shots)}")
    if kind.needs_prf and len(prf_docs) != N_PRF:
        raise ValueError(f"{kind.value} needs exactly {N_PRF} PRF documents, got {len(prf_docs)}")

    if kind is PromptKind.QQD:
        return QQD_INSTRUCTION.format(query=query) + "\n" + QQD_GENERATE
    if kind is PromptKind.QUERY2TERM:
        return f"{TERM_INSTRUCTION} {query}"
    if kind is PromptKind.QUERY2TERM_FS:
        return _few_shot(TERM_INSTRUCTION, "keywords", query, shots)
    if kind is PromptKind.QUERY2TERM_PRF:
        return _with_prf(TERM_INSTRUCTION, query, prf_docs, "keywords:")
    if kind is PromptKind.QUERY2DOC:
        return f"{DOC_INSTRUCTION} {query}"
    if kind is PromptKind.QUERY2DOC_FS:
        return _few_shot(DOC_INSTRUCTION, "passage", query, shots)
    if kind is PromptKind.QUERY2DOC_PRF:
        return _with_prf(DOC_INSTRUCTION, query, prf_docs, "passage:")
    if kind is PromptKind.COT:
        return f"{COT_INSTRUCTION} {query}\n{COT_RATIONALE}"
    if kind is PromptKind.COT_PRF:
        return _with_prf(COT_INSTRUCTION, query, prf_docs, COT_RATIONALE)
    raise AssertionError(kind)


_ITEM = re.compile(r"(?:^|(?<=\s))(\d+)\.\s+")


def parse_qqd(completion: str) -> list[tuple[str, str]]:
    """Split a QQD completion into (sub-query, passage) pairs for display.

    Items start at ``<digits>.`` markers. Within an item the text up to the
    first ``?`` is the sub-query; items without one become ``(item, "")``.
    """
    text = completion.strip()
    starts = [m for m in _ITEM.finditer(text)]
    if not starts:
        return [(text, "")]
    pairs = []
    for i, m in enumerate(starts):
        end = starts[i + 1].start() if i + 1 < len(starts) else len(text)
        item = text[m.end():end].strip()
        q_end = item.find("?")
        if q_end < 0:
            pairs.append((item, ""))
        else:
            pairs.append((item[: q_end + 1].strip(), item[q_end + 1:].strip()))
    return pairs
