"""Random element sampling and the sampled (Hamiltonian-cycle) attention.

A :class:`SubsetPlan` cuts a random permutation of the ``n`` tokens into
``l`` consecutive blocks of ``n_s - 1`` indices. Window ``i`` is its own block
followed by the first index of the next block (wrapping), and inside a
window token ``k`` attends to ``{k, k+1}`` while the final token attends only
to itself. Chained together the windows trace one Hamiltonian cycle through
all ``n`` tokens.

Token and window indices are 0-based everywhere except
:func:`cycle_successor`, which keeps the 1-based window numbering of its
defining formula.
"""
from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .attention import (AttentionPattern, OpCounter, ShapeError, TransformerParams,
                        feed_forward)


class PlanError(ValueError):
    pass


def cycle_successor(v: int, l: int) -> int:
    """``1 + (v mod l)`` for a 1-based window number ``v`` in ``[1, l]``."""
    if l < 1 or not 1 <= v <= l:
        raise PlanError(f"window number {v} out of range [1, {l}]")
    return 1 + (v % l)


@dataclass(frozen=True)
class SubsetPlan:
    """``l`` disjoint ordered blocks ``R^1..R^l`` of size ``n_s - 1`` covering ``range(n)``.

    ``n_s = n + 1`` (a single block holding every token) is accepted as the
    degenerate one-window case.
    """

    n: int
    n_s: int
    blocks: tuple
    seed: Optional[int] = None

    def __post_init__(self):
        blocks = tuple(tuple(int(j) for j in b) for b in self.blocks)
        object.__setattr__(self, "blocks", blocks)
        if self.n_s < 2 or self.n_s > self.n + 1:
            raise PlanError(f"n_s must be in [2, n + 1], got n_s={self.n_s}, n={self.n}")
        if any(len(b) != self.n_s - 1 for b in blocks):
            raise PlanError(f"every block must hold n_s - 1 = {self.n_s - 1} indices")
        if (self.n_s - 1) * len(blocks) != self.n:
            raise PlanError(f"(n_s - 1) * l = {(self.n_s - 1) * len(blocks)} != n = {self.n}")
        flat = [j for b in blocks for j in b]
        if sorted(flat) != list(range(self.n)):
            raise PlanError("blocks must partition range(n)")

    @property
    def l(self) -> int:
        return len(self.blocks)

    @property
    def order(self) -> tuple:
        """Concatenation ``R^1 R^2 ... R^l``."""
        return tuple(j for b in self.blocks for j in b)

    def window_matrix(self) -> np.ndarray:
        """``(l, n_s)`` array whose row ``i`` is ``window_columns(self, i)``."""
        B = np.array(self.blocks, dtype=int)
        link = np.roll(B[:, 0], -1)
        return np.column_stack([B, link])

    def mapped(self, perm) -> "SubsetPlan":
        """The same plan for the column-permuted input ``X[:, perm]``.

        Column ``j`` of ``X[:, perm]`` is column ``perm[j]`` of ``X``, so every
        index ``c`` is replaced by its position in ``perm``.
        """
        perm = np.asarray(perm)
        inv = np.empty_like(perm)
        inv[perm] = np.arange(len(perm))
        return SubsetPlan(self.n, self.n_s, tuple(tuple(inv[list(b)]) for b in self.blocks))

    @classmethod
    def from_order(cls, order, n_s: int, seed: Optional[int] = None) -> "SubsetPlan":
        order = list(order)
        n = len(order)
        if n_s < 2 or (n_s - 1) == 0 or n % (n_s - 1):
            raise PlanError(f"n_s - 1 = {n_s - 1} must divide n = {n}")
        w = n_s - 1
        return cls(n, n_s, tuple(tuple(order[i:i + w]) for i in range(0, n, w)), seed)


def sample_subset_plan(n: int, n_s: int, seed=None) -> SubsetPlan:
    """Draw a uniformly random plan.

    ``seed`` may be an int or a ``numpy.random.Generator``; passing a
    generator lets callers draw many independent plans from one stream.
    """
    if n_s < 2:
        raise PlanError(f"n_s must be >= 2, got {n_s}")
    if n % (n_s - 1):
        raise PlanError(f"n_s - 1 = {n_s - 1} does not divide n = {n}; see pad_indices")
    rng = np.random.default_rng(seed)
    plan_seed = int(seed) if isinstance(seed, (int, np.integer)) else None
    return SubsetPlan.from_order(rng.permutation(n).tolist(), n_s, plan_seed)


def pad_indices(n: int, n_s: int, seed=None) -> np.ndarray:
    """Column indices that make ``n`` divisible by ``n_s - 1``.

    Returns ``range(n)`` followed by uniformly chosen duplicates; the first
    ``n`` output columns of any model run on ``X[:, idx]`` belong to the
    original points.
    """
    w = n_s - 1
    if w < 1:
        raise PlanError(f"n_s must be >= 2, got {n_s}")
    extra = (-n) % w
    rng = np.random.default_rng(seed)
    return np.concatenate([np.arange(n), rng.integers(0, n, size=extra)])


def window_columns(plan: SubsetPlan, i: int) -> list[int]:
    """Block ``i`` followed by the first index of block ``i + 1`` (wrapping)."""
    if not 0 <= i < plan.l:
        raise PlanError(f"window {i} out of range [0, {plan.l})")
    nxt = cycle_successor(i + 1, plan.l) - 1
    return list(plan.blocks[i]) + [plan.blocks[nxt][0]]


def hamiltonian_pattern(n_s: int) -> AttentionPattern:
    """Path pattern: ``A_k = {k, k+1}`` for ``k < n_s - 1`` and ``A_{n_s-1} = {n_s-1}``."""
    if n_s < 2:
        raise PlanError(f"n_s must be >= 2, got {n_s}")
    sets = [(k, k + 1) for k in range(n_s - 1)] + [(n_s - 1,)]
    return AttentionPattern(n_s, tuple(sets))


@dataclass(frozen=True)
class HamiltonianCycle:
    order: tuple

    def __post_init__(self):
        if sorted(self.order) != list(range(len(self.order))):
            raise PlanError("a Hamiltonian cycle must visit every index exactly once")

    @property
    def n(self) -> int:
        return len(self.order)

    def edges(self) -> set[frozenset]:
        o = self.order
        return {frozenset((o[i], o[(i + 1) % len(o)])) for i in range(len(o))
                if o[i] != o[(i + 1) % len(o)]}


def induced_cycle(plan: SubsetPlan) -> HamiltonianCycle:
    return HamiltonianCycle(plan.order)


def window_edges(plan: SubsetPlan) -> set[frozenset]:
    """Union of every window's non-self path links, mapped to global indices."""
    pat = hamiltonian_pattern(plan.n_s)
    out = set()
    for i in range(plan.l):
        cols = window_columns(plan, i)
        for e in pat.edges():
            a, b = tuple(e)
            if cols[a] != cols[b]:
                out.add(frozenset((cols[a], cols[b])))
    return out


# --------------------------------------------------------------------------
# sampled attention


def _window_attention(T: np.ndarray, params: TransformerParams,
                      counter: Optional[OpCounter] = None) -> np.ndarray:
    """Residual multi-head Hamiltonian-path attention on a stack of windows.

    ``T`` has shape ``(d, w, n_s)``: ``w`` windows of ``n_s`` tokens each.
    """
    d, w, s = T.shape
    V = np.einsum("jmd,dws->jmws", params.W_V, T)
    K = np.einsum("jmd,dws->jmws", params.W_K, T)
    Q = np.einsum("jmd,dws->jmws", params.W_Q, T)
    heads = V.copy()
    if s > 1:
        scale = params.score_scale
        s_self = scale * np.einsum("jmws,jmws->jws", K[..., :-1], Q[..., :-1])
        s_next = scale * np.einsum("jmws,jmws->jws", K[..., 1:], Q[..., :-1])
        top = np.maximum(s_self, s_next)
        a = np.exp(s_self - top)
        b = np.exp(s_next - top)
        z = a + b
        heads[..., :-1] = (a / z)[:, None] * V[..., :-1] + (b / z)[:, None] * V[..., 1:]
    if counter is not None:
        for _ in range(params.h):
            counter.add_head(w * (2 * s - 1), w * s, params.m, d)
    h, m = params.h, params.m
    return T + np.einsum("dk,kws->dws", params.W_O, heads.reshape(h * m, w, s))


def _check_plan(X: np.ndarray, plan: SubsetPlan, params: TransformerParams) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] != params.d:
        raise ShapeError(f"X must be {params.d} x n, got {X.shape}")
    if plan.n != X.shape[1]:
        raise ShapeError(f"plan covers {plan.n} tokens, X has {X.shape[1]}")
    return X


def sampled_attention(X, plan: SubsetPlan, params: TransformerParams, mode: str = "sequential",
                      counter: Optional[OpCounter] = None) -> np.ndarray:
    """Apply the shared residual attention ``g`` to every window of ``plan``.

    ``mode="sequential"`` composes the windows in order: window ``i + 1`` sees
    the columns window ``i`` already rewrote, including the linking column,
    and the last window's link rewrites the first column of block 0 a second
    time. ``mode="parallel"`` feeds every window the original ``X`` and lets
    each window write only its own block, which equals attention over the
    induced cycle. With a single window both modes coincide.

    The sequential result is computed in two batched passes instead of a
    Python loop over windows: the linking column's update inside window
    ``i`` is self-only and so depends on that column alone.
    """
    X = _check_plan(X, plan, params)
    if mode not in ("sequential", "parallel"):
        raise ValueError(f"mode must be 'sequential' or 'parallel', got {mode!r}")
    W = plan.window_matrix()
    T = X[:, W]
    Y = X.copy()
    if mode == "parallel" or plan.l == 1:
        out = _window_attention(T, params, counter)
        Y[:, W[:, :-1]] = out[:, :, :-1]
        return Y

    # window i-1 already rewrote the first column of window i (self-only step)
    self_map = np.eye(params.d) + params.W_O @ params.W_V.reshape(params.h * params.m, params.d)
    T[:, 1:, 0] = self_map @ X[:, W[1:, 0]]
    head = _window_attention(T[:, :-1], params, counter)
    last = T[:, -1].copy()
    last[:, -1] = head[:, 0, 0]
    tail = _window_attention(last[:, None, :], params, counter)[:, 0]
    Y[:, W[:-1, :-1]] = head[:, :, :-1]
    Y[:, W[-1, :-1]] = tail[:, :-1]
    Y[:, W[0, 0]] = tail[:, -1]
    return Y


def _resolve_plan(n: int, plan, n_s, rng) -> SubsetPlan:
    if plan is not None:
        return plan
    if n_s is None:
        raise PlanError("pass either a plan or n_s")
    return sample_subset_plan(n, n_s, rng)


def sampled_transformer_block(X, plan: Optional[SubsetPlan], params: TransformerParams,
                              mode: str = "sequential", counter: Optional[OpCounter] = None,
                              n_s: Optional[int] = None, rng=None) -> np.ndarray:
    """``SAttn(X) + W_2 ReLU(W_1 SAttn(X))``.

    With ``plan=None`` a fresh plan of window size ``n_s`` is drawn from ``rng``.
    """
    X = np.asarray(X, dtype=float)
    plan = _resolve_plan(X.shape[1], plan, n_s, rng)
    return feed_forward(sampled_attention(X, plan, params, mode, counter), params)


def sampled_score_count(n: int, n_s: int) -> int:
    """Score evaluations per head for one sampled-attention pass: ``l (2 n_s - 1)``."""
    if n % (n_s - 1):
        raise PlanError(f"n_s - 1 = {n_s - 1} does not divide n = {n}")
    return (n // (n_s - 1)) * (2 * n_s - 1)


# --------------------------------------------------------------------------
# edge coverage


@dataclass
class EdgeFrequencyMap:
    """Symmetric tally of how often each unordered pair is a cycle edge."""

    n: int
    counts: np.ndarray
    samples: int

    def frequency(self) -> np.ndarray:
        return self.counts / self.samples

    def pairs(self):
        """Yield ``(i, j, count)`` for ``i < j``."""
        iu, ju = np.triu_indices(self.n, k=1)
        for i, j in zip(iu, ju):
            yield int(i), int(j), int(self.counts[i, j])

    def expected_frequency(self) -> float:
        return 2.0 / (self.n - 1)

    def max_deviation(self) -> float:
        iu = np.triu_indices(self.n, k=1)
        return float(np.max(np.abs(self.frequency()[iu] - self.expected_frequency())))

    def total_edges(self) -> int:
        return int(np.triu(self.counts, k=1).sum())

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["i", "j", "count", "samples", "freq"])
            for i, j, c in self.pairs():
                writer.writerow([i, j, c, self.samples, repr(c / self.samples)])


def _tally(n: int, orders: np.ndarray) -> np.ndarray:
    a = orders
    b = np.roll(orders, -1, axis=1)
    counts = np.zeros((n, n), dtype=np.int64)
    np.add.at(counts, (a.ravel(), b.ravel()), 1)
    counts = counts + counts.T
    np.fill_diagonal(counts, 0)
    if n == 2:
        # the 2-cycle traverses its single edge twice
        counts //= 2
    return counts


def edge_coverage(n: int, n_s: int, samples: int, seed=None) -> EdgeFrequencyMap:
    """Tally cycle edges over ``samples`` independently drawn plans."""
    if samples < 1:
        raise PlanError("samples must be >= 1")
    if n < 2:
        raise PlanError("n must be >= 2")
    rng = np.random.default_rng(seed)
    orders = np.array([sample_subset_plan(n, n_s, rng).order for _ in range(samples)])
    return EdgeFrequencyMap(n, _tally(n, orders), samples)


def edge_coverage_exhaustive(n: int) -> EdgeFrequencyMap:
    """Tally over all ``n!`` equally likely orders (the exact distribution)."""
    if not 2 <= n <= 9:
        raise PlanError("exhaustive enumeration supports 2 <= n <= 9")
    orders = np.array(list(itertools.permutations(range(n))))
    return EdgeFrequencyMap(n, _tally(n, orders), len(orders))
