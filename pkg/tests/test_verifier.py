import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from millqe.verifier import (
    ContextualDocument,
    Source,
    mutual_verify,
    score_generated,
    score_prf,
    select_top,
    similarity_grid,
)
from oracles import brute_selection


def docs(n, source=Source.LLM, start=0):
    return [ContextualDocument(f"doc {i}", source, i + start, ref=f"r{i}") for i in range(n)]


def with_vecs(vecs, source, start=0):
    return [ContextualDocument(f"{source.value} {i}", source, i + start, embedding=np.asarray(v, float)) for i, v in enumerate(vecs)]


def no_embed(text):
    raise AssertionError("embeddings were supplied")


def test_score_generated_examples():
    prf = [[1, 0], [0, 1]]
    assert score_generated([[1, 0]], prf) == [1.0]
    assert score_generated([[0, 1]], prf) == [1.0]
    s = 1 / math.sqrt(2)
    assert score_generated([[s, s]], prf)[0] == pytest.approx(1.41421356, abs=1e-8)


def test_score_prf_examples():
    assert score_prf([[1, 0]], [[1, 0]]) == [1.0]
    assert score_prf([[1, 0], [0, 1]], [[1, 0]]) == [1.0, 0.0]
    assert score_prf([[7, 7]], [[0.1, 0.1]]) == pytest.approx([1.0], abs=1e-12)


def test_empty_side_and_dimension_errors():
    with pytest.raises(ValueError):
        score_generated([[1, 0]], [])
    with pytest.raises(ValueError):
        similarity_grid([[1, 0]], [[1, 0, 0]])
    with pytest.raises(ValueError):
        mutual_verify(docs(2), [], 1, 1, no_embed)


def test_select_top_examples():
    d = docs(3)
    assert [x.origin_rank for x in select_top(d, [0.9, 0.1, 0.5], 2)] == [0, 2]
    assert [x.origin_rank for x in select_top(d[:2], [0.5, 0.5], 1)] == [0]
    assert [x.origin_rank for x in select_top(d, [0.2, 0.3, 0.1], 10)] == [1, 0, 2]
    assert select_top(d, [0.9, 0.1, 0.5], 1)[0].score == 0.9
    with pytest.raises(ValueError):
        select_top(d, [0.1], 1)


def test_saturation_cases():
    r = mutual_verify(with_vecs([[1, 0]], Source.LLM), with_vecs([[0, 1]], Source.PRF, 1), 1, 1, no_embed)
    assert len(r.selected_llm) == len(r.selected_prf) == 1
    llm = with_vecs([[1, 0], [0.9, 0.1], [0, 1]], Source.LLM)
    prf = with_vecs([[1, 0.1], [0.2, 1]], Source.PRF, 1)
    r = mutual_verify(llm, prf, 3, 2, no_embed)
    assert sorted(d.origin_rank for d in r.selected_llm) == [0, 1, 2]
    scores = [d.score for d in r.selected_llm]
    assert scores == sorted(scores, reverse=True)


def test_embeds_text_when_no_vector():
    from millqe.embedder import Embedder

    emb = Embedder("mock")
    llm = [ContextualDocument("cats purr loudly", Source.LLM, 0), ContextualDocument("rockets fly", Source.LLM, 1)]
    prf = [ContextualDocument("cats purr", Source.PRF, 1)]
    r = mutual_verify(llm, prf, 1, 1, emb)
    assert r.selected_llm[0].text == "cats purr loudly"
    diag = r.to_diagnostics()
    assert [row["selected"] for row in diag["llm"]] == [True, False]
    assert len(diag["similarity_grid"]) == 2


def random_instance(rng):
    n, k = rng.integers(1, 9, size=2)
    dim = int(rng.integers(2, 12))
    llm = rng.normal(size=(n, dim))
    prf = rng.normal(size=(k, dim))
    return llm, prf, int(rng.integers(1, n + 1)), int(rng.integers(1, k + 1))


def test_oracle_equivalence_500_instances():
    rng = np.random.default_rng(7)
    for _ in range(500):
        llm, prf, n_sel, k_sel = random_instance(rng)
        r = mutual_verify(with_vecs(llm, Source.LLM), with_vecs(prf, Source.PRF), n_sel, k_sel, no_embed)
        exp_llm, exp_prf, row, col = brute_selection(llm, prf, n_sel, k_sel)
        assert [d.origin_rank for d in r.selected_llm] == exp_llm
        assert [d.origin_rank for d in r.selected_prf] == exp_prf
        assert sum(r.llm_scores.values()) == pytest.approx(sum(r.prf_scores.values()), abs=1e-9)
        assert list(r.llm_scores.values()) == pytest.approx(row, abs=1e-9)
        assert list(r.prf_scores.values()) == pytest.approx(col, abs=1e-9)


unit = st.lists(st.floats(-1, 1, allow_nan=False), min_size=4, max_size=4).filter(lambda v: np.linalg.norm(v) > 1e-3)
instance = st.tuples(st.lists(unit, min_size=1, max_size=6), st.lists(unit, min_size=1, max_size=6))


@settings(max_examples=100, deadline=None)
@given(instance, st.randoms(use_true_random=False))
def test_permutation_equivariance(inst, rnd):
    llm, prf = inst
    perm = list(range(len(llm)))
    rnd.shuffle(perm)
    base = score_generated(llm, prf)
    permuted = score_generated([llm[i] for i in perm], prf)
    assert permuted == pytest.approx([base[i] for i in perm], abs=1e-12)
    k_sel = max(1, len(prf) // 2)
    a = mutual_verify(with_vecs(llm, Source.LLM), with_vecs(prf, Source.PRF), 1, k_sel, no_embed)
    b = mutual_verify(with_vecs([llm[i] for i in perm], Source.LLM), with_vecs(prf, Source.PRF), 1, k_sel, no_embed)
    col_a = np.array(list(a.prf_scores.values()))
    # the selected set is only well defined when the k-th and (k+1)-th scores differ
    ordered = np.sort(col_a)[::-1]
    if len(ordered) == k_sel or ordered[k_sel - 1] - ordered[k_sel] > 1e-9:
        assert {d.origin_rank for d in a.selected_prf} == {d.origin_rank for d in b.selected_prf}


@settings(max_examples=100, deadline=None)
@given(instance)
def test_grid_sums_agree(inst):
    llm, prf = inst
    assert sum(score_generated(llm, prf)) == pytest.approx(sum(score_prf(prf, llm)), abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(instance, st.integers(1, 5))
def test_selection_monotone_in_n(inst, n_sel):
    llm, prf = inst
    l, p = with_vecs(llm, Source.LLM), with_vecs(prf, Source.PRF)
    small = {d.origin_rank for d in mutual_verify(l, p, n_sel, 1, no_embed).selected_llm}
    large = {d.origin_rank for d in mutual_verify(l, p, n_sel + 1, 1, no_embed).selected_llm}
    assert small <= large
