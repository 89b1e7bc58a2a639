"""Dense and pattern-sparse multi-head self-attention (forward passes).

Shapes follow the column-token convention: ``X`` is ``d x n``. The
score matrix of one head is ``(W_K X)^T (W_Q X)``; softmax normalizes each
column, so output column ``k`` is a convex combination of value columns.
No ``1/sqrt(m)`` factor is applied unless ``TransformerParams.scaled`` is set.

Operation counts are collected through an optional :class:`OpCounter`
passed to each call; nothing global is mutated.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .core import relu, softmax_cols

CHECKPOINT_FORMAT = "hamattn-params"
CHECKPOINT_VERSION = 1
PARAM_NAMES = ("W_V", "W_K", "W_Q", "W_O", "W_1", "W_2", "W_p")


class ShapeError(ValueError):
    pass


@dataclass
class OpCounter:
    """Per-call instrumentation.

    ``scores`` counts key-query dot products summed over heads, so one dense
    head on ``n`` tokens adds ``n**2``. ``flops`` is a multiply-add estimate
    covering projections, scores and the weighted value sum.
    """

    scores: int = 0
    flops: int = 0

    def add_head(self, n_scores: int, n_tokens: int, m: int, d: int) -> None:
        self.scores += int(n_scores)
        self.flops += 2 * 3 * m * d * n_tokens + 2 * 2 * m * int(n_scores)


@dataclass
class TransformerParams:
    """Weights of one transformer block.

    ``W_V``, ``W_K``, ``W_Q`` are stacked per head with shape ``(h, m, d)``.
    """

    W_V: np.ndarray
    W_K: np.ndarray
    W_Q: np.ndarray
    W_O: np.ndarray
    W_1: np.ndarray
    W_2: np.ndarray
    W_p: np.ndarray
    scaled: bool = False

    def __post_init__(self):
        for name in PARAM_NAMES:
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        self.validate()

    @property
    def h(self) -> int:
        return self.W_V.shape[0]

    @property
    def m(self) -> int:
        return self.W_V.shape[1]

    @property
    def d(self) -> int:
        return self.W_V.shape[2]

    @property
    def r(self) -> int:
        return self.W_1.shape[0]

    @property
    def score_scale(self) -> float:
        return 1.0 / np.sqrt(self.m) if self.scaled else 1.0

    def validate(self) -> None:
        if self.W_V.ndim != 3:
            raise ShapeError(f"W_V must be (h, m, d), got {self.W_V.shape}")
        h, m, d, r = self.h, self.m, self.d, self.W_1.shape[0] if self.W_1.ndim == 2 else -1
        expected = {
            "W_V": (h, m, d),
            "W_K": (h, m, d),
            "W_Q": (h, m, d),
            "W_O": (d, m * h),
            "W_1": (r, d),
            "W_2": (d, r),
            "W_p": (d, 3),
        }
        for name, shape in expected.items():
            arr = getattr(self, name)
            if arr.shape != shape:
                raise ShapeError(f"{name} has shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} has non-finite entries")

    @classmethod
    def random(cls, h: int, m: int, d: int, r: int, rng=None, scale: float = 1.0,
               scaled: bool = False) -> "TransformerParams":
        """Gaussian init with variance ``scale / fan_in``."""
        rng = np.random.default_rng(rng)

        def g(*shape, fan_in):
            return rng.standard_normal(shape) * np.sqrt(scale / fan_in)

        return cls(
            W_V=g(h, m, d, fan_in=d),
            W_K=g(h, m, d, fan_in=d),
            W_Q=g(h, m, d, fan_in=d),
            W_O=g(d, m * h, fan_in=m * h),
            W_1=g(r, d, fan_in=d),
            W_2=g(d, r, fan_in=r),
            W_p=g(d, 3, fan_in=3),
            scaled=scaled,
        )

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def copy(self) -> "TransformerParams":
        return replace(self, **{k: v.copy() for k, v in self.arrays().items()})

    def with_arrays(self, **arrays) -> "TransformerParams":
        return replace(self, **arrays)

    @classmethod
    def zeros_like(cls, other: "TransformerParams") -> "TransformerParams":
        return replace(other, **{k: np.zeros_like(v) for k, v in other.arrays().items()})


@dataclass(frozen=True)
class AttentionPattern:
    """Per-query index sets: token ``k`` attends to the tokens in ``sets[k]``.

    Indices are 0-based. Every set is non-empty and contains its own query.
    """

    n_tokens: int
    sets: tuple

    def __post_init__(self):
        sets = tuple(tuple(int(j) for j in s) for s in self.sets)
        object.__setattr__(self, "sets", sets)
        if len(sets) != self.n_tokens:
            raise ShapeError(f"pattern has {len(sets)} sets for {self.n_tokens} tokens")
        for k, s in enumerate(sets):
            if not s:
                raise ValueError(f"attention set {k} is empty")
            if k not in s:
                raise ValueError(f"attention set {k} does not contain its query")
            if min(s) < 0 or max(s) >= self.n_tokens:
                raise ValueError(f"attention set {k} has an out-of-range index")

    @classmethod
    def complete(cls, n: int) -> "AttentionPattern":
        full = tuple(range(n))
        return cls(n, (full,) * n)

    @property
    def total(self) -> int:
        """Number of score evaluations per head."""
        return sum(len(s) for s in self.sets)

    def groups(self):
        """Yield ``(queries, index_matrix)`` for queries sharing a set size."""
        by_size: dict[int, list[int]] = {}
        for k, s in enumerate(self.sets):
            by_size.setdefault(len(s), []).append(k)
        for size in sorted(by_size):
            qs = np.array(by_size[size])
            yield qs, np.array([self.sets[k] for k in qs], dtype=int)

    def edges(self) -> set[frozenset]:
        """Undirected non-self links."""
        return {frozenset((k, j)) for k, s in enumerate(self.sets) for j in s if j != k}


def _check_X(X: np.ndarray, d: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] != d:
        raise ShapeError(f"X must be {d} x n, got {X.shape}")
    return X


def positional_embedding(coords: np.ndarray, W_p: np.ndarray) -> np.ndarray:
    """``W_p @ coords``: a per-column linear map of xyz positions."""
    coords = np.asarray(coords, dtype=float)
    W_p = np.asarray(W_p, dtype=float)
    if coords.ndim != 2 or coords.shape[0] != 3:
        raise ShapeError(f"coords must be 3 x n, got {coords.shape}")
    if W_p.ndim != 2 or W_p.shape[1] != 3:
        raise ShapeError(f"W_p must be d x 3, got {W_p.shape}")
    return W_p @ coords


def dense_head(X, W_V, W_K, W_Q, counter: Optional[OpCounter] = None,
               scale: float = 1.0, chunk: int = 2048) -> np.ndarray:
    """One dense self-attention head, ``(W_V X) softmax_cols((W_K X)^T W_Q X)``.

    Query columns are processed in blocks of ``chunk`` to bound memory; the
    block size only changes floating-point summation order.
    """
    W_V, W_K, W_Q = (np.asarray(W, dtype=float) for W in (W_V, W_K, W_Q))
    X = _check_X(X, W_V.shape[1])
    if W_K.shape != W_Q.shape or W_K.shape[1] != X.shape[0]:
        raise ShapeError("W_K and W_Q must both be m x d")
    n = X.shape[1]
    V, K, Q = W_V @ X, W_K @ X, W_Q @ X
    out = np.empty((V.shape[0], n))
    for start in range(0, n, chunk):
        sl = slice(start, min(n, start + chunk))
        P = softmax_cols(scale * (K.T @ Q[:, sl]))
        out[:, sl] = V @ P
    if counter is not None:
        counter.add_head(n * n, n, W_K.shape[0], X.shape[0])
    return out


def sparse_head(X, pattern: AttentionPattern, W_V, W_K, W_Q,
                counter: Optional[OpCounter] = None, scale: float = 1.0) -> np.ndarray:
    """Self-attention head restricted to ``pattern``.

    Column ``k`` only sees ``X[:, pattern.sets[k]]``; the softmax runs over
    that set alone.
    """
    W_V, W_K, W_Q = (np.asarray(W, dtype=float) for W in (W_V, W_K, W_Q))
    X = _check_X(X, W_V.shape[1])
    n = X.shape[1]
    if pattern.n_tokens != n:
        raise ShapeError(f"pattern is for {pattern.n_tokens} tokens, X has {n}")
    V, K, Q = W_V @ X, W_K @ X, W_Q @ X
    out = np.empty((V.shape[0], n))
    for qs, idx in pattern.groups():
        # scores: (set size, queries), one column per query
        s = np.einsum("mcs,mc->sc", K[:, idx], Q[:, qs])
        P = softmax_cols(scale * s)
        out[:, qs] = np.einsum("mcs,sc->mc", V[:, idx], P)
    if counter is not None:
        counter.add_head(pattern.total, n, W_K.shape[0], X.shape[0])
    return out


def multi_head_attn(X, params: TransformerParams, pattern: Optional[AttentionPattern] = None,
                    counter: Optional[OpCounter] = None) -> np.ndarray:
    """Residual multi-head attention ``X + W_O [Head^1; ...; Head^h]``.

    With ``pattern=None`` every head is dense.
    """
    X = _check_X(X, params.d)
    heads = []
    for j in range(params.h):
        if pattern is None:
            heads.append(dense_head(X, params.W_V[j], params.W_K[j], params.W_Q[j],
                                    counter=counter, scale=params.score_scale))
        else:
            heads.append(sparse_head(X, pattern, params.W_V[j], params.W_K[j], params.W_Q[j],
                                     counter=counter, scale=params.score_scale))
    return X + params.W_O @ np.vstack(heads)


def feed_forward(A: np.ndarray, params: TransformerParams) -> np.ndarray:
    return A + params.W_2 @ relu(params.W_1 @ A)


def transformer_block(X, params: TransformerParams, pattern: Optional[AttentionPattern] = None,
                      counter: Optional[OpCounter] = None) -> np.ndarray:
    """``Attn(X) + W_2 ReLU(W_1 Attn(X))``."""
    return feed_forward(multi_head_attn(X, params, pattern, counter), params)


def knn_pattern(coords: np.ndarray, k: int, chunk: int = 1024) -> AttentionPattern:
    """Each point attends to its ``k`` Euclidean nearest neighbours, itself first.

    Distance ties go to the lower column index.
    """
    coords = np.asarray(coords, dtype=float)
    if coords.ndim != 2 or coords.shape[0] != 3:
        raise ShapeError(f"coords must be 3 x n, got {coords.shape}")
    n = coords.shape[1]
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    pts = coords.T
    sq = np.einsum("ij,ij->i", pts, pts)
    sets = []
    for start in range(0, n, chunk):
        rows = np.arange(start, min(n, start + chunk))
        d2 = sq[rows, None] + sq[None, :] - 2.0 * pts[rows] @ pts.T
        np.maximum(d2, 0.0, out=d2)
        d2[np.arange(len(rows)), rows] = -1.0  # self always first
        order = np.argsort(d2, axis=1, kind="stable")[:, :k]
        sets.extend(tuple(r) for r in order)
    return AttentionPattern(n, tuple(sets))


def save_params(params: TransformerParams, path, extra: Optional[dict] = None) -> None:
    """Write a version-tagged ``.npz`` checkpoint.

    Layout: one array per name in ``PARAM_NAMES`` (in that order), extra
    arrays under ``extra/<name>``, and ``meta``: a JSON string holding
    ``format``, ``version``, ``h``, ``m``, ``d``, ``r``, ``scaled`` and
    ``order`` (the array names in write order).
    """
    extra = dict(extra or {})
    order = list(PARAM_NAMES) + [f"extra/{k}" for k in extra]
    meta = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "h": params.h, "m": params.m, "d": params.d, "r": params.r,
        "scaled": bool(params.scaled),
        "order": order,
    }
    arrays = dict(params.arrays())
    arrays.update({f"extra/{k}": np.asarray(v) for k, v in extra.items()})
    with open(path, "wb") as fh:
        np.savez(fh, meta=np.array(json.dumps(meta)), **arrays)


def load_params(path) -> tuple[TransformerParams, dict[str, np.ndarray]]:
    """Inverse of :func:`save_params`; returns ``(params, extra)``."""
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        if meta.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"{path}: not a {CHECKPOINT_FORMAT} checkpoint")
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {meta.get('version')}")
        params = TransformerParams(**{k: data[k] for k in PARAM_NAMES}, scaled=meta["scaled"])
        extra = {k[len("extra/"):]: data[k] for k in meta["order"] if k.startswith("extra/")}
    return params, extra
