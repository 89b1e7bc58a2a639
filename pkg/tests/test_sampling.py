import csv
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hamattn.attention import (AttentionPattern, OpCounter, TransformerParams, feed_forward,
                               multi_head_attn, transformer_block)
from hamattn.sampling import (HamiltonianCycle, PlanError, SubsetPlan, cycle_successor,
                              edge_coverage, edge_coverage_exhaustive, hamiltonian_pattern,
                              induced_cycle, pad_indices, sample_subset_plan, sampled_attention,
                              sampled_score_count, sampled_transformer_block, window_columns,
                              window_edges)

from oracles import (cycle_edge_frequency_exact, naive_sampled_parallel,
                     naive_sampled_sequential)


def params(h=2, m=3, d=4, r=5, seed=0):
    return TransformerParams.random(h, m, d, r, np.random.default_rng(seed))


# plans whose window size divides n: (n, n_s) with n_s - 1 | n, including n_s = n + 1
plan_shapes = st.integers(2, 16).flatmap(
    lambda n: st.tuples(st.just(n), st.sampled_from([w + 1 for w in range(1, n + 1) if n % w == 0])))


def test_cycle_successor():
    assert cycle_successor(5, 5) == 1
    assert cycle_successor(1, 3) == 2
    assert cycle_successor(1, 1) == 1
    for bad in [(0, 3), (4, 3)]:
        with pytest.raises(PlanError):
            cycle_successor(*bad)


def test_plan_shape():
    plan = sample_subset_plan(6, 3, seed=0)
    assert plan.l == 3
    assert all(len(b) == 2 for b in plan.blocks)
    assert sorted(plan.order) == list(range(6))
    assert plan == sample_subset_plan(6, 3, seed=0)
    assert plan.seed == 0


def test_plan_errors():
    with pytest.raises(PlanError):
        sample_subset_plan(7, 3, seed=0)
    with pytest.raises(PlanError):
        sample_subset_plan(6, 1, seed=0)
    with pytest.raises(PlanError):
        SubsetPlan(4, 3, ((0, 1), (1, 2)))
    with pytest.raises(PlanError):
        SubsetPlan(4, 6, ((0, 1, 2, 3),))


def test_first_position_marginal_uniform():
    rng = np.random.default_rng(0)
    firsts = np.array([sample_subset_plan(4, 3, rng).blocks[0][0] for _ in range(10000)])
    freq = np.bincount(firsts, minlength=4) / 10000
    assert np.all(np.abs(freq - 0.25) < 0.02)


def test_window_columns_example():
    plan = SubsetPlan(4, 3, ((3, 1), (2, 0)))
    assert window_columns(plan, 0) == [3, 1, 2]
    assert window_columns(plan, 1) == [2, 0, 3]
    with pytest.raises(PlanError):
        window_columns(plan, 2)


def test_window_columns_single_window_wraps():
    plan = SubsetPlan(3, 4, ((2, 0, 1),))
    assert window_columns(plan, 0) == [2, 0, 1, 2]


def test_hamiltonian_pattern():
    assert hamiltonian_pattern(4).sets == ((0, 1), (1, 2), (2, 3), (3,))
    assert hamiltonian_pattern(2).sets == ((0, 1), (1,))
    for s in range(2, 9):
        assert hamiltonian_pattern(s).total == 2 * s - 1
    with pytest.raises(PlanError):
        hamiltonian_pattern(1)


def test_induced_cycle_example():
    plan = SubsetPlan(4, 3, ((3, 1), (2, 0)))
    cyc = induced_cycle(plan)
    assert cyc.order == (3, 1, 2, 0)
    assert cyc.edges() == {frozenset(e) for e in [(3, 1), (1, 2), (2, 0), (0, 3)]}
    with pytest.raises(PlanError):
        HamiltonianCycle((0, 0, 1))


@settings(max_examples=60, deadline=None)
@given(plan_shapes, st.integers(0, 10**6))
def test_cycle_equals_union_of_window_links(shape, seed):
    n, n_s = shape
    plan = sample_subset_plan(n, n_s, seed)
    cyc = induced_cycle(plan)
    assert sorted(cyc.order) == list(range(n))
    assert cyc.edges() == window_edges(plan)


def test_sampled_attention_residual_identity():
    p = params()
    p = p.with_arrays(W_O=np.zeros_like(p.W_O))
    X = np.random.default_rng(1).standard_normal((4, 6))
    plan = sample_subset_plan(6, 3, 1)
    for mode in ("sequential", "parallel"):
        np.testing.assert_array_equal(sampled_attention(X, plan, p, mode), X)


def test_single_window_modes_coincide():
    p = params(seed=2)
    X = np.random.default_rng(2).standard_normal((4, 5))
    plan = sample_subset_plan(5, 6, 2)
    assert plan.l == 1
    np.testing.assert_array_equal(sampled_attention(X, plan, p, "sequential"),
                                  sampled_attention(X, plan, p, "parallel"))


@pytest.mark.parametrize("seed", range(50))
def test_sequential_matches_naive_composition(seed):
    rng = np.random.default_rng(seed)
    p = TransformerParams.random(2, 3, 4, 5, rng)
    X = rng.standard_normal((4, 6))
    plan = sample_subset_plan(6, 3, rng)
    out = sampled_attention(X, plan, p, "sequential")
    assert np.abs(out - naive_sampled_sequential(X, plan.blocks, p)).max() < 1e-12


@settings(max_examples=40, deadline=None)
@given(plan_shapes, st.integers(0, 10**6))
def test_both_modes_match_naive(shape, seed):
    n, n_s = shape
    rng = np.random.default_rng(seed)
    p = TransformerParams.random(2, 2, 3, 4, rng)
    X = rng.standard_normal((3, n))
    plan = sample_subset_plan(n, n_s, rng)
    seq = sampled_attention(X, plan, p, "sequential")
    par = sampled_attention(X, plan, p, "parallel")
    np.testing.assert_allclose(seq, naive_sampled_sequential(X, plan.blocks, p), atol=1e-12)
    np.testing.assert_allclose(par, naive_sampled_parallel(X, plan.blocks, p), atol=1e-12)


def test_parallel_equals_cycle_attention():
    p = params(seed=3)
    X = np.random.default_rng(3).standard_normal((4, 8))
    plan = sample_subset_plan(8, 3, 3)
    order = plan.order
    succ = {order[i]: order[(i + 1) % 8] for i in range(8)}
    pat = AttentionPattern(8, tuple((k, succ[k]) for k in range(8)))
    np.testing.assert_allclose(sampled_attention(X, plan, p, "parallel"),
                               multi_head_attn(X, p, pat), atol=1e-12)


def test_sampled_attention_errors():
    p = params()
    plan = sample_subset_plan(6, 3, 0)
    with pytest.raises(ValueError):
        sampled_attention(np.zeros((4, 6)), plan, p, "diagonal")
    with pytest.raises(ValueError):
        sampled_attention(np.zeros((4, 8)), plan, p)
    with pytest.raises(ValueError):
        sampled_attention(np.zeros((3, 6)), plan, p)


@settings(max_examples=40, deadline=None)
@given(plan_shapes, st.integers(0, 10**6), st.sampled_from(["sequential", "parallel"]))
def test_coupled_permutation_equivariance(shape, seed, mode):
    n, n_s = shape
    rng = np.random.default_rng(seed)
    p = TransformerParams.random(2, 2, 3, 4, rng)
    X = rng.standard_normal((3, n))
    plan = sample_subset_plan(n, n_s, rng)
    perm = rng.permutation(n)
    lhs = sampled_transformer_block(X[:, perm], plan.mapped(perm), p, mode)
    rhs = sampled_transformer_block(X, plan, p, mode)[:, perm]
    assert np.abs(lhs - rhs).max() < 1e-9


def test_sampled_block_structure():
    p = params(seed=4)
    X = np.random.default_rng(4).standard_normal((4, 6))
    plan = sample_subset_plan(6, 3, 4)
    A = sampled_attention(X, plan, p)
    np.testing.assert_array_equal(sampled_transformer_block(X, plan, p), feed_forward(A, p))
    z = p.with_arrays(W_1=np.zeros_like(p.W_1), W_2=np.zeros_like(p.W_2), W_O=np.zeros_like(p.W_O))
    np.testing.assert_array_equal(sampled_transformer_block(X, plan, z), X)
    assert np.abs(sampled_transformer_block(X, plan, p) - transformer_block(X, p)).max() > 1e-3


def test_sampled_block_draws_plan():
    p = params(seed=5)
    X = np.random.default_rng(5).standard_normal((4, 6))
    a = sampled_transformer_block(X, None, p, n_s=3, rng=7)
    b = sampled_transformer_block(X, sample_subset_plan(6, 3, 7), p)
    np.testing.assert_array_equal(a, b)
    with pytest.raises(PlanError):
        sampled_transformer_block(X, None, p)


@pytest.mark.parametrize("n, n_s", [(6, 3), (12, 4), (256, 5), (1024, 5)])
def test_score_count(n, n_s):
    p = params(h=3, d=4)
    X = np.random.default_rng(6).standard_normal((4, n))
    for mode in ("sequential", "parallel"):
        c = OpCounter()
        sampled_attention(X, sample_subset_plan(n, n_s, 6), p, mode, c)
        assert c.scores == 3 * sampled_score_count(n, n_s) == 3 * (n // (n_s - 1)) * (2 * n_s - 1)


def test_pad_indices():
    idx = pad_indices(10, 4, seed=0)
    assert len(idx) == 12 and list(idx[:10]) == list(range(10))
    assert set(idx[10:]) <= set(range(10))
    assert len(pad_indices(12, 4, seed=0)) == 12


def test_exhaustive_edge_frequency_n4():
    emap = edge_coverage_exhaustive(4)
    assert emap.samples == 24
    assert np.all(emap.counts[np.triu_indices(4, 1)] == 16)
    for e, f in cycle_edge_frequency_exact(4).items():
        assert f == Fraction(2, 3)
        i, j = sorted(e)
        assert Fraction(int(emap.counts[i, j]), emap.samples) == f


@pytest.mark.parametrize("n", [3, 4, 5, 6])
def test_exhaustive_equiprobable(n):
    emap = edge_coverage_exhaustive(n)
    iu = np.triu_indices(n, 1)
    assert all(Fraction(int(c), emap.samples) == Fraction(2, n - 1) for c in emap.counts[iu])


def test_monte_carlo_edge_frequency_n12():
    emap = edge_coverage(12, 4, 20000, seed=7)
    assert emap.max_deviation() < 0.01
    assert emap.total_edges() == 12 * 20000
    np.testing.assert_array_equal(emap.counts, emap.counts.T)
    assert emap.counts.max() <= emap.samples


def test_single_sample_has_n_edges():
    for n in (2, 3, 8):
        assert edge_coverage(n, 2, 1, seed=0).total_edges() == (1 if n == 2 else n)


def test_coverage_convergence():
    ratios = []
    for seed in range(3):
        rng = np.random.default_rng(seed)
        small = edge_coverage(12, 4, 100, rng).max_deviation()
        large = edge_coverage(12, 4, 10000, rng).max_deviation()
        ratios.append(small / large)
    assert 3 <= np.median(ratios) <= 30


def test_edge_csv(tmp_path):
    emap = edge_coverage(4, 3, 10, seed=1)
    path = tmp_path / "e.csv"
    emap.to_csv(path)
    rows = list(csv.DictReader(open(path)))
    assert list(rows[0]) == ["i", "j", "count", "samples", "freq"]
    assert len(rows) == 6
    assert all(int(r["i"]) < int(r["j"]) for r in rows)
    assert sum(int(r["count"]) for r in rows) == 40


def test_coverage_errors():
    with pytest.raises(PlanError):
        edge_coverage(4, 3, 0)
    with pytest.raises(PlanError):
        edge_coverage_exhaustive(10)
