"""TREC-style evaluation: qrels/run I/O, rank metrics and paired t-tests."""

from __future__ import annotations

import json
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from scipy import stats

from .index import RankedList

log = logging.getLogger(__name__)

METRICS = ("NDCG", "AP", "Recall", "MRR")
CUTOFFS = (10, 100, 1000)
MAX_RUN_DEPTH = 1000

Qrels = dict[str, dict[str, int]]
Run = dict[str, list[tuple[str, float]]]


class FormatError(ValueError):
    def __init__(self, path, line_no: int, reason: str):
        super().__init__(f"{path}:{line_no}: {reason}")
        self.line_no = line_no


class DegenerateVarianceError(ValueError):
    """Paired differences have zero variance, so the t statistic is undefined."""

    def __init__(self, identical: bool):
        self.identical = identical
        super().__init__("identical runs" if identical else "paired differences are constant")


# --- I/O ----------------------------------------------------------------------


def parse_qrels(path: str | Path) -> Qrels:
    qrels: Qrels = defaultdict(dict)
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            fields = line.split()
            if not fields:
                continue
            if len(fields) != 4:
                raise FormatError(path, line_no, f"expected 4 columns, got {len(fields)}")
            qid, _, doc_id, grade_s = fields
            try:
                grade = int(grade_s)
            except ValueError:
                raise FormatError(path, line_no, f"grade {grade_s!r} is not an integer") from None
            if grade < 0:
                raise FormatError(path, line_no, f"negative grade {grade}")
            if doc_id in qrels[qid]:
                log.warning("%s:%d: duplicate judgment for (%s, %s); keeping the later grade", path, line_no, qid, doc_id)
            qrels[qid][doc_id] = grade
    return dict(qrels)


def normalize_ranking(entries: Iterable[tuple[str, float]]) -> list[tuple[str, float]]:
    """Sort by descending score, ties by ascending doc id."""
    return sorted(entries, key=lambda e: (-e[1], e[0]))


def parse_run(path: str | Path) -> Run:
    raw: dict[str, dict[str, float]] = defaultdict(dict)
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            fields = line.split()
            if not fields:
                continue
            if len(fields) != 6:
                raise FormatError(path, line_no, f"expected 6 columns, got {len(fields)}")
            qid, _, doc_id, rank_s, score_s, _ = fields
            try:
                int(rank_s)
                score = float(score_s)
            except ValueError:
                raise FormatError(path, line_no, "rank must be an integer and score a number") from None
            if doc_id in raw[qid]:
                raise FormatError(path, line_no, f"document {doc_id} listed twice for query {qid}")
            raw[qid][doc_id] = score
    return {qid: normalize_ranking(docs.items()) for qid, docs in raw.items()}


def format_run_lines(ranked: RankedList, tag: str, depth: int = MAX_RUN_DEPTH) -> list[str]:
    return [f"{ranked.query_id} Q0 {doc_id} {rank} {score!r} {tag}" for rank, (doc_id, score) in enumerate(ranked.entries[:depth], 1)]


def write_run(path: str | Path, ranked_lists: Iterable[RankedList], tag: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ranked in ranked_lists:
            for line in format_run_lines(ranked, tag):
                fh.write(line + "\n")


# --- metrics (per query) --------------------------------------------------------


def _relevant(judged: Mapping[str, int], rel_threshold: int) -> set[str]:
    return {d for d, g in judged.items() if g >= rel_threshold}


def ndcg_at(ranking: Sequence[str], judged: Mapping[str, int], n: int) -> float:
    """Linear-gain NDCG: gain ``grade`` discounted by ``log2(rank + 1)``."""
    if n < 1:
        raise ValueError("cutoff must be >= 1")
    ideal = sorted((g for g in judged.values() if g > 0), reverse=True)[:n]
    idcg = sum(g / math.log2(i + 2) for i, g in enumerate(ideal))
    if idcg == 0:
        return 0.0
    dcg = sum(judged.get(d, 0) / math.log2(i + 2) for i, d in enumerate(ranking[:n]))
    return dcg / idcg


def ap_at(ranking: Sequence[str], judged: Mapping[str, int], n: int, rel_threshold: int = 1) -> float:
    """Average precision truncated at ``n``, normalised by all relevant docs."""
    relevant = _relevant(judged, rel_threshold)
    if not relevant:
        return 0.0
    hits = 0
    total = 0.0
    for i, d in enumerate(ranking[:n], 1):
        if d in relevant:
            hits += 1
            total += hits / i
    return total / len(relevant)


def recall_at(ranking: Sequence[str], judged: Mapping[str, int], n: int, rel_threshold: int = 1) -> float:
    relevant = _relevant(judged, rel_threshold)
    if not relevant:
        return 0.0
    return len(relevant.intersection(ranking[:n])) / len(relevant)


def mrr_at(ranking: Sequence[str], judged: Mapping[str, int], n: int, rel_threshold: int = 1) -> float:
    relevant = _relevant(judged, rel_threshold)
    for i, d in enumerate(ranking[:n], 1):
        if d in relevant:
            return 1.0 / i
    return 0.0


def metric_value(metric: str, ranking: Sequence[str], judged: Mapping[str, int], n: int, rel_threshold: int = 1) -> float:
    if metric == "NDCG":
        return ndcg_at(ranking, judged, n)
    if metric == "AP":
        return ap_at(ranking, judged, n, rel_threshold)
    if metric == "Recall":
        return recall_at(ranking, judged, n, rel_threshold)
    if metric == "MRR":
        return mrr_at(ranking, judged, n, rel_threshold)
    raise ValueError(f"unknown metric {metric!r}")


# --- aggregate ------------------------------------------------------------------


def measure_name(metric: str, cutoff: int) -> str:
    return f"{metric}@{cutoff}"


@dataclass
class MetricReport:
    per_query: dict[str, dict[str, float]]
    measures: list[str]
    mean: dict[str, float] = field(init=False)

    def __post_init__(self):
        nq = len(self.per_query)
        self.mean = {m: (sum(v[m] for v in self.per_query.values()) / nq if nq else 0.0) for m in self.measures}

    def values(self, measure: str) -> dict[str, float]:
        return {qid: row[measure] for qid, row in self.per_query.items()}

    def to_json(self) -> str:
        return json.dumps({"measures": self.measures, "mean": self.mean, "per_query": self.per_query}, indent=2, sort_keys=True)

    def to_tsv(self) -> str:
        lines = ["query_id\t" + "\t".join(self.measures)]
        for qid in sorted(self.per_query):
            lines.append(qid + "\t" + "\t".join(f"{self.per_query[qid][m]:.6f}" for m in self.measures))
        lines.append("all\t" + "\t".join(f"{self.mean[m]:.6f}" for m in self.measures))
        return "\n".join(lines) + "\n"


def evaluate(
    run: Run | str | Path,
    qrels: Qrels | str | Path,
    cutoffs: Sequence[int] = CUTOFFS,
    metrics: Sequence[str] = METRICS,
    rel_threshold: int = 1,
) -> MetricReport:
    """Per-query and macro-averaged metrics over every query in ``qrels``.

    Queries absent from the run score zero.
    """
    if not isinstance(run, dict):
        run = parse_run(run)
    if not isinstance(qrels, dict):
        qrels = parse_qrels(qrels)
    measures = [measure_name(m, c) for m in metrics for c in cutoffs]
    per_query = {}
    for qid, judged in qrels.items():
        ranking = [d for d, _ in run.get(qid, [])]
        per_query[qid] = {
            measure_name(m, c): metric_value(m, ranking, judged, c, rel_threshold) for m in metrics for c in cutoffs
        }
    return MetricReport(per_query, measures)


def paired_ttest(a: Sequence[float], b: Sequence[float]) -> tuple[float, float]:
    """Two-sided paired t-test on ``a - b`` with ``n - 1`` degrees of freedom."""
    if len(a) != len(b):
        raise ValueError(f"paired samples differ in length: {len(a)} vs {len(b)}")
    n = len(a)
    if n < 2:
        raise ValueError("paired t-test needs at least two pairs")
    diffs = [x - y for x, y in zip(a, b)]
    if max(diffs) == min(diffs):
        raise DegenerateVarianceError(identical=all(d == 0 for d in diffs))
    mean = sum(diffs) / n
    var = sum((d - mean) ** 2 for d in diffs) / (n - 1)
    t = mean / math.sqrt(var / n)
    p = 2.0 * stats.t.sf(abs(t), df=n - 1)
    return t, float(min(p, 1.0))
