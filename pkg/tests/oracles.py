"""Brute-force reference implementations used only by the tests.

These are written independently of the package code paths they check.
"""

import math

import numpy as np


def brute_metrics(ranking, judged, cutoff, rel_threshold=1):
    """All four metrics at one cutoff, from explicit per-rank tables."""
    top = list(ranking)[:cutoff]
    grades = [judged.get(d, 0) for d in top]
    binary = [1 if g >= rel_threshold else 0 for g in grades]
    n_rel = sum(1 for g in judged.values() if g >= rel_threshold)

    discounts = [1.0 / math.log(r + 1, 2) for r in range(1, len(top) + 1)]
    dcg = sum(g * w for g, w in zip(grades, discounts))
    best = sorted(judged.values(), reverse=True)[:cutoff]
    idcg = sum(g / math.log(r + 1, 2) for r, g in enumerate(best, 1))
    ndcg = dcg / idcg if idcg > 0 else 0.0

    precisions = [sum(binary[:r]) / r for r in range(1, len(top) + 1)]
    ap = sum(p for p, b in zip(precisions, binary) if b) / n_rel if n_rel else 0.0
    recall = sum(binary) / n_rel if n_rel else 0.0
    first = next((r for r, b in enumerate(binary, 1) if b), None)
    mrr = 1.0 / first if first else 0.0
    return {"NDCG": ndcg, "AP": ap, "Recall": recall, "MRR": mrr}


def brute_selection(llm_vecs, prf_vecs, n_select, k_select):
    """Selected index sets via an explicit double loop over the similarity grid."""
    n, k = len(llm_vecs), len(prf_vecs)
    grid = [[0.0] * k for _ in range(n)]
    for i in range(n):
        for j in range(k):
            a = np.asarray(llm_vecs[i], dtype=float)
            b = np.asarray(prf_vecs[j], dtype=float)
            grid[i][j] = float(sum(x * y for x, y in zip(a, b)) / (math.sqrt(sum(x * x for x in a)) * math.sqrt(sum(y * y for y in b))))
    row = [sum(grid[i]) for i in range(n)]
    col = [sum(grid[i][j] for i in range(n)) for j in range(k)]
    llm_order = sorted(range(n), key=lambda i: (-row[i], i))
    prf_order = sorted(range(k), key=lambda j: (-col[j], j))
    return llm_order[:n_select], prf_order[:k_select], row, col


def t_two_sided_p(t, df, steps=20000):
    """Two-sided p-value by Simpson integration of the Student-t density over [0, |t|]."""
    c = math.gamma((df + 1) / 2) / (math.sqrt(df * math.pi) * math.gamma(df / 2))

    def pdf(x):
        return c * (1 + x * x / df) ** (-(df + 1) / 2)

    h = abs(t) / steps
    acc = pdf(0) + pdf(abs(t))
    for i in range(1, steps):
        acc += (4 if i % 2 else 2) * pdf(i * h)
    return 1.0 - 2.0 * acc * h / 3
