import itertools
import json
from fractions import Fraction as F

import numpy as np
import pytest

from hamattn.core import exact_matrix
from hamattn.verifier import (AllMaxShift, BudgetError, SelectiveShift, VerifierConfig,
                              VerifierError, all_max_shift, build_schedule, column_ids,
                              contextual_map, cycle_pattern, grid_inputs, id_dot, pair_patterns,
                              quantize_to_grid, reflect, selective_shift, verifier_embedding,
                              verify_contextual_mapping)

from oracles import contextual_ids

HALF = F(1, 2)


def cfg(n, d, delta=HALF, **kw):
    return VerifierConfig(n, d, F(delta), **kw)


def test_config_validation():
    for bad in [(1, 1, HALF), (2, 0, HALF), (2, 1, F(2, 3)), (2, 1, F(1))]:
        with pytest.raises(ValueError):
            VerifierConfig(*bad)
    c = cfg(3, 1)
    assert c.inv_delta == 2 and c.selective_c == 2 and c.allmax_c == 288
    assert c.grid_size == 8
    assert VerifierConfig(2, 1, "1/4").delta == F(1, 4)


def test_embedding_examples():
    assert verifier_embedding(2, 1).tolist() == [[1, 0]]
    assert verifier_embedding(3, 1).tolist() == [[2, 0, 1]]
    assert verifier_embedding(3, 2).tolist() == [[2, 0, 1], [2, 0, 1]]


@pytest.mark.parametrize("n, d", [(2, 1), (3, 1), (2, 2), (4, 1)])
def test_embedded_columns_ordered(n, d):
    # column 1 < column 2 < ... < column n-1 < column 0 for every grid input
    c = cfg(n, d)
    u = id_dot(d, c.delta)
    for gp in grid_inputs(c):
        q = column_ids(gp.L, u)
        assert all(q[k] < q[k + 1] for k in range(1, n - 1))
        assert q[n - 1] < q[0]


def test_quantize():
    gp = quantize_to_grid(np.array([[F(0), F(1, 2)]]), HALF)
    assert gp.L.tolist() == [[1, F(1, 2)]]
    gp = quantize_to_grid(np.array([[0.74, 0.2]]), HALF)
    assert gp.grid.tolist() == [[F(1, 2), 0]]
    again = quantize_to_grid(gp.grid, HALF)
    assert again.L.tolist() == gp.L.tolist()
    for bad in (1.0, -0.1):
        with pytest.raises(ValueError):
            quantize_to_grid(np.array([[bad, 0.0]]), HALF)


def test_id_dot():
    assert id_dot(1, HALF) == [1]
    assert id_dot(2, F(1, 4)) == [1, 4]


def test_id_dot_injective_on_grid_columns():
    # n=4, d=2: every column of every embedded input, 16 distinct columns in all
    c = cfg(4, 2)
    u = id_dot(2, HALF)
    columns = {tuple(col) for gp in grid_inputs(c) for col in gp.L.T}
    assert len(columns) == 16
    assert len({u[0] * a + u[1] * b for a, b in columns}) == 16


def test_pair_patterns():
    pats = pair_patterns(3)
    # 1-based i=2 links columns 1 and 2: 0-based pattern 1 gives column 0 the set {1, 0}
    assert pats[1] == ((1, 0), (1,), ())
    union = set()
    for p in pats:
        assert sum(len(s) == 2 for s in p) == 1
        union |= {frozenset(s) for s in p if len(s) == 2}
    assert union == {frozenset((k, (k + 1) % 3)) for k in range(3)}
    assert reflect(pats[1]) == ((0,), (0, 1), ())


def test_cycle_pattern():
    assert cycle_pattern(3) == ((0, 1), (1, 2), (2, 0))
    assert cycle_pattern(3, include_self=False) == ((1,), (2,), (0,))


def test_selective_shift_examples():
    pattern = ((), (0, 1))
    L = exact_matrix([[1, 0]])
    out = selective_shift(L, pattern, 2, F(-1, 4), F(1, 4))
    assert out.tolist() == [[1, 2]]
    L = exact_matrix([[1, "1/2"]])
    out = selective_shift(L, pattern, 2, F(1, 4), F(3, 4))
    assert out.tolist() == [[1, F(3, 2)]]


def test_selective_shift_noop_outside_window():
    L = exact_matrix([[1, 0]])
    out = selective_shift(L, ((0, 1), (0, 1)), 2, F(5, 4), F(7, 4))
    assert out.tolist() == L.tolist()


def test_selective_shift_endpoint_raises():
    with pytest.raises(VerifierError):
        selective_shift(exact_matrix([[1, 0]]), ((), (0, 1)), 2, 0, F(1, 2))
    with pytest.raises(ValueError):
        selective_shift(exact_matrix([[1, 0]]), ((), (0, 1)), 2, 1, 0)


def test_selective_shift_touches_only_row_zero():
    L = exact_matrix([[1, 0], [3, 5]])
    out = selective_shift(L, ((), (0, 1)), 2, F(-1), F(100), u=[1, 2])
    assert out[1].tolist() == [3, 5]


def test_all_max_shift_examples():
    L = exact_matrix([[1, 2]])
    assert all_max_shift(L, cycle_pattern(2, include_self=False), 64).tolist() == [[129, 66]]
    assert all_max_shift(L, cycle_pattern(2), 0).tolist() == [[1, 2]]
    assert all_max_shift(L, ((0,), (1,)), 3).tolist() == [[4, 8]]
    with pytest.raises(ValueError):
        all_max_shift(exact_matrix([[1, 2], [0, 0]]), cycle_pattern(2), 1)


@pytest.mark.parametrize("n, d, n_sel, c_am", [(2, 1, 2, 64), (3, 1, 4, 288), (2, 2, 4, 256)])
def test_schedule_counts(n, d, n_sel, c_am):
    s = build_schedule(cfg(n, d))
    assert len(s.selective) == n_sel == (n - 1) * 2 ** d
    assert len(s.all_max) == n
    assert len(s.layers) == n_sel + n
    assert all(x.c == 2 ** d for x in s.selective)
    assert all(x.c == c_am for x in s.all_max)
    assert isinstance(s.layers[-1], AllMaxShift) and isinstance(s.layers[0], SelectiveShift)


def test_schedule_windows_n2():
    s = build_schedule(cfg(2, 1))
    assert [(x.b_lo, x.b_hi) for x in s.selective] == [(F(-1, 4), F(1, 4)), (F(1, 4), F(3, 4))]
    assert all(x.target == 1 for x in s.selective)


def test_contextual_map_examples():
    c = cfg(2, 1)
    gp = quantize_to_grid(np.array([[F(0), F(0)]]), HALF)
    ids = contextual_map(gp, c)
    assert ids.selective == [1, 2]
    assert ids.q == [8449, 8450]
    gp = quantize_to_grid(np.array([[F(0), F(1, 2)]]), HALF)
    assert contextual_map(gp, c).selective == [1, F(3, 2)]


def test_successor_only_all_max_leaves_interval():
    # applying the successor-only stack to the post-selective ids (1, 2)
    L = exact_matrix([[1, 2]])
    pattern = cycle_pattern(2, include_self=False)
    for _ in range(2):
        L = all_max_shift(L, pattern, 64)
    assert L.tolist() == [[4353, 8322]]
    lo, hi = 64 ** 2 * 2, 64 ** 2 * F(5, 2)
    assert not lo <= L[0, 0] <= hi


@pytest.mark.parametrize("n, d, delta", [(2, 1, HALF), (3, 1, HALF), (2, 2, HALF),
                                         (3, 1, F(1, 3)), (2, 1, F(1, 4))])
def test_contextual_map_matches_oracle(n, d, delta):
    c = cfg(n, d, delta)
    schedule = build_schedule(c)
    expected = contextual_ids(n, d, delta)
    for gp, (g, sel, q) in zip(grid_inputs(c), expected):
        flat = tuple(int(x / delta) for col in gp.grid.T for x in col)
        assert flat == g
        ids = contextual_map(gp, c, schedule)
        assert ids.selective == sel
        assert ids.q == q


@pytest.mark.parametrize("n, d, inputs, ids, gap", [
    (2, 1, 4, 8, "1/2"), (3, 1, 8, 24, "2"), (2, 2, 16, 32, "9/2")])
def test_certificate_passes(n, d, inputs, ids, gap):
    r = verify_contextual_mapping(cfg(n, d))
    assert r.passed
    assert (r.inputs, r.ids, r.min_id_gap) == (inputs, ids, gap)
    assert r.dominance is True and not r.witnesses


@pytest.mark.parametrize("n, d, delta", [(3, 1, F(1, 3)), (2, 1, F(1, 4)), (4, 1, HALF)])
def test_certificate_other_configs(n, d, delta):
    assert verify_contextual_mapping(cfg(n, d, delta)).passed


def test_certificate_skip_allmax_fails_with_witness():
    r = verify_contextual_mapping(cfg(2, 1), skip_allmax=True)
    assert not r.passed
    assert r.dominance is None
    assert not r.rule2_disjoint_across
    w = r.witnesses[0]
    assert w["rule"] == "disjoint_across"
    assert w["inputs"] == [[["0", "0"]], [["0", "1/2"]]]
    assert w["id"] == "1"


def test_certificate_json():
    r = verify_contextual_mapping(cfg(2, 1))
    data = json.loads(r.to_json())
    assert data["status"] == "PASS" and data["passed"] is True
    assert data["config"] == {"n": 2, "d": 1, "delta": "1/2"}
    assert {"inputs", "ids", "witnesses", "min_id_gap", "wall_time"} <= set(data)


def test_budget():
    with pytest.raises(BudgetError):
        verify_contextual_mapping(cfg(5, 3))
    with pytest.raises(BudgetError):
        verify_contextual_mapping(cfg(2, 1, max_bits=8))


def test_rows_beyond_first_unchanged():
    c = cfg(2, 2)
    sched = build_schedule(c)
    for gp in itertools.islice(grid_inputs(c), 5):
        ids = contextual_map(gp, c, sched)
        assert len(ids.q) == 2
