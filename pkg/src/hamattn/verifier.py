"""Exact certificate that stacked shift layers realize a contextual mapping.

Grid inputs ``G`` (entries in ``{0, delta, ..., 1 - delta}``) are offset per
column so column 0 lives in ``[n-1, n)`` and column ``i >= 1`` in
``[i-1, i)``. Each column is reduced to a scalar id ``u . L_k`` with
``u = (1, 1/delta, ..., delta^(1-d))``. Then:

1. ``(n-1) * delta^-d`` selective-shift layers. The block for target column
   ``t`` sweeps every possible id of that column with a window of width
   ``delta``; the one matching window adds ``delta^-d * (max - min)`` over
   ``{t-1, t}`` to row 0, pushing the target's id above everything seen so
   far.
2. ``n`` all-max-shift layers over the cycle pattern ``{k, k+1 mod n}``
   with ``c = 2 n^2 delta^(-nd-1)``, which spread the dominant id to every
   column.

Every quantity is a :class:`fractions.Fraction`. Matrices are ``d x n``
numpy object arrays; column indices are 0-based.
"""
from __future__ import annotations

import itertools
import json
import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np

from .core import exact_matrix, hardmax_cols, to_fraction

Pattern = tuple  # tuple of per-column index tuples; sets may be empty


class VerifierError(RuntimeError):
    """An intermediate claim of the construction failed."""


class BudgetError(RuntimeError):
    """The configuration exceeds the enumeration or bit-length budget."""


@dataclass(frozen=True)
class VerifierConfig:
    n: int
    d: int
    delta: Fraction
    max_inputs: int = 4096
    max_bits: int = 4096

    def __post_init__(self):
        object.__setattr__(self, "delta", to_fraction(self.delta))
        if self.n < 2:
            raise ValueError("n must be >= 2")
        if self.d < 1:
            raise ValueError("d must be >= 1")
        inv = 1 / self.delta
        if inv.denominator != 1 or inv < 2:
            raise ValueError(f"1/delta must be an integer >= 2, got delta={self.delta}")

    @property
    def inv_delta(self) -> int:
        return int(1 / self.delta)

    @property
    def selective_c(self) -> Fraction:
        return Fraction(self.inv_delta) ** self.d

    @property
    def allmax_c(self) -> Fraction:
        return 2 * self.n ** 2 * Fraction(self.inv_delta) ** (self.n * self.d + 1)

    @property
    def block_width(self) -> Fraction:
        """Spacing between column id intervals: ``sum_{i<d} delta^-i``."""
        return sum(Fraction(self.inv_delta) ** i for i in range(self.d))

    @property
    def grid_size(self) -> int:
        return self.inv_delta ** (self.n * self.d)

    def offsets(self) -> list[int]:
        return [self.n - 1] + [i - 1 for i in range(1, self.n)]

    def check_bits(self) -> None:
        # largest magnitude reached: about c^n * n * delta^-nd
        bound = self.allmax_c ** self.n * self.n * Fraction(self.inv_delta) ** (self.n * self.d) * 2
        bits = int(bound).bit_length()
        if bits > self.max_bits:
            raise BudgetError(f"ids need about {bits} bits, budget is {self.max_bits}")

    def describe(self) -> dict:
        return {"n": self.n, "d": self.d, "delta": str(self.delta)}


@dataclass(frozen=True)
class GridPoint:
    """Quantized, embedded input ``L = G + E`` (``d x n`` Fractions)."""

    L: np.ndarray
    delta: Fraction

    @property
    def grid(self) -> np.ndarray:
        d, n = self.L.shape
        return self.L - verifier_embedding(n, d)


def verifier_embedding(n: int, d: int) -> np.ndarray:
    """Column 0 filled with ``n - 1``, column ``i >= 1`` with ``i - 1``."""
    if n < 2:
        raise ValueError("n must be >= 2")
    offs = [n - 1] + [i - 1 for i in range(1, n)]
    return exact_matrix([[offs[k] for k in range(n)] for _ in range(d)])


def quantize_to_grid(X, delta) -> GridPoint:
    """Floor every entry of ``X`` (in ``[0, 1)``) to the ``delta`` lattice, then embed."""
    delta = to_fraction(delta)
    X = np.asarray(X, dtype=object)
    if X.ndim != 2:
        raise ValueError(f"X must be d x n, got shape {X.shape}")
    d, n = X.shape
    G = np.empty((d, n), dtype=object)
    for r in range(d):
        for k in range(n):
            x = Fraction(X[r, k])
            if not 0 <= x < 1:
                raise ValueError(f"entry ({r}, {k}) = {X[r, k]} outside [0, 1)")
            G[r, k] = (x // delta) * delta
    return GridPoint(G + verifier_embedding(n, d), delta)


def id_dot(d: int, delta) -> list[Fraction]:
    """``u = (1, delta^-1, ..., delta^-(d-1))``."""
    delta = to_fraction(delta)
    return [Fraction(1) / delta ** i for i in range(d)]


def column_ids(L: np.ndarray, u: Sequence[Fraction]) -> list[Fraction]:
    d, n = L.shape
    return [sum((u[r] * L[r, k] for r in range(d)), Fraction(0)) for k in range(n)]


def pair_patterns(n: int) -> list[Pattern]:
    """The ``n`` stacked two-token masks of the identity-order cycle.

    Pattern ``i`` gives column ``k = (i - 1) mod n`` the set ``(i, k)``,
    column ``i`` the set ``(i,)``, and every other column nothing.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    out = []
    for i in range(n):
        k = (i - 1) % n
        sets = [()] * n
        sets[k] = (i, k)
        sets[i] = (i,)
        out.append(tuple(sets))
    return out


def reflect(pattern: Pattern) -> Pattern:
    """Swap query and key roles: ``j`` joins column ``k``'s set iff ``k`` was in ``j``'s."""
    n = len(pattern)
    sets = [[] for _ in range(n)]
    for j, s in enumerate(pattern):
        for k in s:
            sets[k].append(j)
    return tuple(tuple(sorted(s)) for s in sets)


def cycle_pattern(n: int, include_self: bool = True) -> Pattern:
    """Column ``k`` sees ``k + 1 mod n`` (and itself unless ``include_self`` is False)."""
    if include_self:
        return tuple((k, (k + 1) % n) for k in range(n))
    return tuple(((k + 1) % n,) for k in range(n))


def _default_u(d: int, u):
    if u is not None:
        return list(u)
    if d == 1:
        return [Fraction(1)]
    raise ValueError("pass the id vector u when d > 1")


def _psi(q: Sequence[Fraction], A: Sequence[int], offset: Fraction) -> Fraction:
    """Hardmax attention with query ``u . L_k - b`` and keys ``u . L_j``.

    Returns the max id in ``A`` for a positive query, the min for a negative one.
    """
    keys = np.array([[q[j]] for j in A], dtype=object)
    onehot = hardmax_cols(keys * offset)
    return sum((q[j] * onehot[i, 0] for i, j in enumerate(A)), Fraction(0))


def selective_shift(L: np.ndarray, pattern: Pattern, c, b_lo, b_hi,
                    u: Optional[Sequence[Fraction]] = None) -> np.ndarray:
    """Two-head hardmax layer adding ``c (psi(b_lo) - psi(b_hi))`` to row 0.

    That difference is ``max - min`` over the column's set when its id lies
    strictly inside ``(b_lo, b_hi)`` and zero otherwise. An id equal to a
    window end raises :class:`VerifierError`.
    """
    c, b_lo, b_hi = Fraction(c), Fraction(b_lo), Fraction(b_hi)
    if not b_lo < b_hi:
        raise ValueError("need b_lo < b_hi")
    d, n = L.shape
    q = column_ids(L, _default_u(d, u))
    out = L.copy()
    for k in range(n):
        if q[k] == b_lo or q[k] == b_hi:
            raise VerifierError(f"id of column {k} ({q[k]}) sits on a window end")
        A = pattern[k]
        if not A:
            continue
        out[0, k] = L[0, k] + c * (_psi(q, A, q[k] - b_lo) - _psi(q, A, q[k] - b_hi))
    return out


def all_max_shift(L: np.ndarray, pattern: Pattern, c,
                  u: Optional[Sequence[Fraction]] = None) -> np.ndarray:
    """Add ``c * max_{j in A_k} u . L_j`` to row 0 of every column (simultaneously)."""
    c = Fraction(c)
    d, n = L.shape
    q = column_ids(L, _default_u(d, u))
    out = L.copy()
    for k in range(n):
        if pattern[k]:
            out[0, k] = L[0, k] + c * max(q[j] for j in pattern[k])
    return out


@dataclass(frozen=True)
class SelectiveShift:
    target: int
    pattern: Pattern
    c: Fraction
    b_lo: Fraction
    b_hi: Fraction


@dataclass(frozen=True)
class AllMaxShift:
    pattern: Pattern
    c: Fraction


@dataclass
class ShiftSchedule:
    config: VerifierConfig
    layers: list

    @property
    def selective(self) -> list[SelectiveShift]:
        return [x for x in self.layers if isinstance(x, SelectiveShift)]

    @property
    def all_max(self) -> list[AllMaxShift]:
        return [x for x in self.layers if isinstance(x, AllMaxShift)]


def build_schedule(config: VerifierConfig) -> ShiftSchedule:
    config.check_bits()
    inv, d, n, delta = config.inv_delta, config.d, config.n, config.delta
    per_block = inv ** d
    width = config.block_width
    pairs = pair_patterns(n)
    layers: list = []
    for t in range(1, n):
        # target t attends to {t-1, t}: the reflected pair mask
        pattern = reflect(pairs[t])
        base = (t - 1) * width
        for s in range(per_block):
            b = base + s * delta
            layers.append(SelectiveShift(t, pattern, config.selective_c,
                                         b - delta / 2, b + delta / 2))
    cyc = cycle_pattern(n)
    layers.extend(AllMaxShift(cyc, config.allmax_c) for _ in range(n))
    return ShiftSchedule(config, layers)


@dataclass
class IdVector:
    """Final ids ``q`` plus the ids right after the selective phase."""

    q: list
    selective: list


def contextual_map(grid_point: Union[GridPoint, np.ndarray], config: VerifierConfig,
                   schedule: Optional[ShiftSchedule] = None, skip_allmax: bool = False) -> IdVector:
    """Run the schedule on one input, checking the intermediate claims.

    Checked exactly: rows ``1..d-1`` never change; after the block for
    target ``t`` its id exceeds that of ``t - 1``; after the selective phase
    the ids are strictly increasing left to right.
    """
    L = grid_point.L if isinstance(grid_point, GridPoint) else grid_point
    schedule = schedule or build_schedule(config)
    u = id_dot(config.d, config.delta)
    rows = L[1:].copy()
    cur = L
    layers = schedule.layers
    for idx, layer in enumerate(layers):
        if isinstance(layer, AllMaxShift):
            break
        cur = selective_shift(cur, layer.pattern, layer.c, layer.b_lo, layer.b_hi, u)
        last_of_block = idx + 1 == len(layers) or getattr(layers[idx + 1], "target", None) != layer.target
        if last_of_block:
            q = column_ids(cur, u)
            if not q[layer.target] > q[layer.target - 1]:
                raise VerifierError(f"layer {idx}: id of column {layer.target} did not "
                                    f"overtake column {layer.target - 1}")
    selective = column_ids(cur, u)
    if any(not selective[k] < selective[k + 1] for k in range(config.n - 1)):
        raise VerifierError(f"after selective phase: ids not strictly increasing: "
                            f"{[str(x) for x in selective]}")
    if not skip_allmax:
        for layer in schedule.all_max:
            cur = all_max_shift(cur, layer.pattern, layer.c, u)
    if not np.array_equal(cur[1:], rows):
        raise VerifierError("a shift layer modified rows other than row 0")
    return IdVector(column_ids(cur, u), selective)


def grid_inputs(config: VerifierConfig):
    """Every ``L`` in the embedded grid; entry ``(r, k)`` of input ``g`` is ``g[k * d + r] * delta``."""
    if config.grid_size > config.max_inputs:
        raise BudgetError(f"{config.grid_size} grid inputs exceed the budget of {config.max_inputs}")
    n, d, delta = config.n, config.d, config.delta
    E = verifier_embedding(n, d)
    for g in itertools.product(range(config.inv_delta), repeat=n * d):
        G = np.empty((d, n), dtype=object)
        for k in range(n):
            for r in range(d):
                G[r, k] = g[k * d + r] * delta
        yield GridPoint(G + E, delta)


def _grid_label(gp: GridPoint) -> list:
    return [[str(x) for x in row] for row in gp.grid]


@dataclass
class CertificateReport:
    config: dict
    inputs: int = 0
    ids: int = 0
    skip_allmax: bool = False
    rule1_distinct_within: bool = True
    rule2_disjoint_across: bool = True
    selective_order: bool = True
    dominance: Optional[bool] = True
    witnesses: list = field(default_factory=list)
    min_id_gap: Optional[str] = None
    wall_time: float = 0.0

    @property
    def passed(self) -> bool:
        return (self.rule1_distinct_within and self.rule2_disjoint_across
                and self.selective_order and self.dominance is not False)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["passed"] = self.passed
        out["status"] = "PASS" if self.passed else "FAIL"
        return out

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def verify_contextual_mapping(config: VerifierConfig, skip_allmax: bool = False,
                              max_witnesses: int = 10) -> CertificateReport:
    """Enumerate the whole embedded grid and certify both contextual-mapping rules.

    Rule 1: the ``n`` ids of one input are distinct. Rule 2: ids of two
    different inputs never coincide. Also checks the post-selective order
    and, unless ``skip_allmax``, that every final id lies in
    ``[C^n l_n, C^n (l_n + delta)]`` where ``C`` is the all-max constant and
    ``l_n`` the largest post-selective id.
    """
    start = time.perf_counter()
    if config.grid_size > config.max_inputs:
        raise BudgetError(f"{config.grid_size} grid inputs exceed the budget of {config.max_inputs}")
    schedule = build_schedule(config)
    report = CertificateReport(config.describe(), skip_allmax=skip_allmax,
                               dominance=None if skip_allmax else True)
    scale = config.allmax_c ** config.n
    owner: dict[Fraction, tuple[int, int]] = {}
    labels = []

    def witness(entry):
        if len(report.witnesses) < max_witnesses:
            report.witnesses.append(entry)

    for idx, gp in enumerate(grid_inputs(config)):
        labels.append(_grid_label(gp))
        report.inputs += 1
        try:
            ids = contextual_map(gp, config, schedule, skip_allmax)
        except VerifierError as exc:
            report.selective_order = False
            witness({"rule": "selective_order", "input": labels[-1], "error": str(exc)})
            continue
        q = ids.q
        report.ids += len(q)
        if not skip_allmax:
            top = ids.selective[-1]
            lo, hi = scale * top, scale * (top + config.delta)
            bad = [k for k, x in enumerate(q) if not lo <= x <= hi]
            if bad:
                report.dominance = False
                witness({"rule": "dominance", "input": labels[-1], "columns": bad})
        for k, x in enumerate(q):
            if x in owner:
                other, k2 = owner[x]
                if other == idx:
                    report.rule1_distinct_within = False
                    witness({"rule": "distinct_within", "input": labels[-1],
                             "columns": [k2, k], "id": str(x)})
                else:
                    report.rule2_disjoint_across = False
                    witness({"rule": "disjoint_across", "inputs": [labels[other], labels[-1]],
                             "columns": [k2, k], "id": str(x)})
            else:
                owner[x] = (idx, k)
    all_ids = sorted(owner)
    if not (report.rule1_distinct_within and report.rule2_disjoint_across):
        report.min_id_gap = "0"
    elif len(all_ids) > 1:
        report.min_id_gap = str(min(b - a for a, b in zip(all_ids, all_ids[1:])))
    report.wall_time = time.perf_counter() - start
    return report
