"""Point-set classifier with hand-written backward passes.

Pipeline for a batch of clouds of equal size ``n``::

    X   = W_in F + W_p P                      (features + positional embedding)
    A   = attention(X)                        (kind-dependent, residual)
    Y   = A + W_2 ReLU(W_1 A)
    f   = max over tokens of Y                (per feature)
    z   = W_c f + b_c  ->  softmax cross-entropy

Attention kinds: ``dense``, ``sparse-hamiltonian`` (path over the stored
point order), ``sampled`` (random windows, see :mod:`hamattn.sampling`),
``knn`` and ``none`` (feed-forward only).

Everything is batched over clouds (leading axis B). The sampled kind
shares one plan across a batch, so its window loop is also batched.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .attention import PARAM_NAMES, TransformerParams, knn_pattern
from .sampling import (SubsetPlan, hamiltonian_pattern, pad_indices, sample_subset_plan,
                       window_columns)

log = logging.getLogger(__name__)

KINDS = ("dense", "sparse-hamiltonian", "sampled", "knn", "none")
HEAD_NAMES = ("W_in", "W_c", "b_c")


class StaleCacheError(RuntimeError):
    pass


class TrainingDivergedError(FloatingPointError):
    pass


@dataclass
class TrainConfig:
    epochs: int = 30
    batch_size: int = 32
    lr: float = 3e-3
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    kind: str = "sampled"
    mode: str = "sequential"
    n_s: int = 5
    k: int = 16
    h: int = 4
    m: int = 8
    d: int = 32
    r: int = 64
    scaled: bool = False

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown attention kind {self.kind!r}; expected one of {KINDS}")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"optimizer must be 'sgd' or 'adam', got {self.optimizer!r}")
        if self.mode not in ("sequential", "parallel"):
            raise ValueError(f"mode must be 'sequential' or 'parallel', got {self.mode!r}")
        for name in ("epochs", "batch_size", "h", "m", "d", "r", "k"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.lr <= 0 or self.eps <= 0:
            raise ValueError("lr and eps must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("betas must lie in [0, 1)")
        if self.n_s < 2:
            raise ValueError("n_s must be >= 2")

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config field(s): {sorted(unknown)}")
        cfg = cls(**data)
        cfg.validate()
        return cfg


@dataclass
class HeadParams:
    """Input projection ``W_in`` (d x f) and linear classifier ``W_c`` (C x d), ``b_c`` (C)."""

    W_in: np.ndarray
    W_c: np.ndarray
    b_c: np.ndarray

    @classmethod
    def random(cls, f: int, d: int, n_classes: int, rng=None) -> "HeadParams":
        rng = np.random.default_rng(rng)
        return cls(
            W_in=rng.standard_normal((d, f)) / np.sqrt(max(f, 1)),
            W_c=rng.standard_normal((n_classes, d)) / np.sqrt(d),
            b_c=np.zeros(n_classes),
        )

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in HEAD_NAMES}


@dataclass
class Model:
    block: TransformerParams
    head: HeadParams
    version: int = 0

    def params(self) -> dict[str, np.ndarray]:
        """All learnable arrays by name (live references, not copies)."""
        out = dict(self.block.arrays())
        out.update(self.head.arrays())
        return out

    def set_params(self, params: dict[str, np.ndarray]) -> None:
        for name, value in params.items():
            target = self.block if name in PARAM_NAMES else self.head
            setattr(target, name, np.asarray(value, dtype=float))
        self.version += 1

    def copy(self) -> "Model":
        return Model(self.block.copy(),
                     HeadParams(**{k: v.copy() for k, v in self.head.arrays().items()}),
                     self.version)

    @classmethod
    def init(cls, config: TrainConfig, feature_dim: int, n_classes: int, rng=None) -> "Model":
        rng = np.random.default_rng(rng)
        block = TransformerParams.random(config.h, config.m, config.d, config.r, rng,
                                         scaled=config.scaled)
        return cls(block, HeadParams.random(feature_dim, config.d, n_classes, rng))


Gradients = dict  # name -> array, same keys and shapes as Model.params()


# --------------------------------------------------------------------------
# batched attention primitives (B, d, n)


def _outer_sum(A, B):
    """``sum_b A[b] @ B[b].T`` for stacks (B, p, n) and (B, q, n)."""
    return np.tensordot(A, B, axes=([0, 2], [0, 2]))


def _project(W, X):
    """Stack of per-head projections: (h, m, d) x (B, d, n) -> (B, h, m, n)."""
    h, m, d = W.shape
    return (W.reshape(h * m, d) @ X).reshape(X.shape[0], h, m, X.shape[2])


def _dense_mha_forward(X, p: TransformerParams):
    V, K, Q = _project(p.W_V, X), _project(p.W_K, X), _project(p.W_Q, X)
    S = np.swapaxes(K, 2, 3) @ Q
    if p.score_scale != 1.0:
        S *= p.score_scale
    S -= S.max(axis=2, keepdims=True)
    P = np.exp(S, out=S)
    P /= P.sum(axis=2, keepdims=True)
    H = V @ P
    B, h, m, n = H.shape
    heads = H.reshape(B, h * m, n)
    out = X + p.W_O @ heads
    return out, (X, V, K, Q, P, heads)


def _dense_mha_backward(dout, cache, p: TransformerParams, grads: Gradients):
    X, V, K, Q, P, heads = cache
    B, h, m, n = V.shape
    grads["W_O"] += _outer_sum(dout, heads)
    dH = (p.W_O.T @ dout).reshape(B, h, m, n)
    dP = np.swapaxes(V, 2, 3) @ dH
    dV = dH @ np.swapaxes(P, 2, 3)
    dS = P * (dP - (P * dP).sum(axis=2, keepdims=True))
    if p.score_scale != 1.0:
        dS *= p.score_scale
    dK = Q @ np.swapaxes(dS, 2, 3)
    dQ = K @ dS
    return dout + _project_backward(X, dV, dK, dQ, p, grads)


def _project_backward(X, dV, dK, dQ, p: TransformerParams, grads: Gradients):
    B, h, m, n = dV.shape
    Xt = np.swapaxes(X, 1, 2)
    dX = np.zeros_like(X)
    for name, dP in (("W_V", dV), ("W_K", dK), ("W_Q", dQ)):
        flat = dP.reshape(B, h * m, n)
        grads[name] += (flat @ Xt).sum(axis=0).reshape(h, m, -1)
        dX += getattr(p, name).reshape(h * m, -1).T @ flat
    return dX


def _gather(A, idx):
    """``A`` is (B, h, m, s); ``idx`` is (B, s, k). Returns (B, h, m, s, k)."""
    B, h, m, s = A.shape
    k = idx.shape[2]
    flat = np.broadcast_to(idx.reshape(B, 1, 1, s * k), (B, h, m, s * k))
    return np.take_along_axis(A, flat, axis=3).reshape(B, h, m, s, k)


def _scatter(G, idx, s):
    """Adjoint of :func:`_gather`: sum (B, h, m, s, k) back into (B, h, m, s)."""
    B, h, m, _, k = G.shape
    rows = np.arange(B * h * m).reshape(B, h, m, 1, 1) * s
    lin = rows + idx.reshape(B, 1, 1, -1, k)
    out = np.bincount(lin.ravel(), weights=G.ravel(), minlength=B * h * m * s)
    return out.reshape(B, h, m, s)


def _sparse_mha_forward(X, idx, mask, p: TransformerParams):
    """Residual multi-head attention where query ``q`` of cloud ``b`` sees ``idx[b, q]``.

    ``mask`` (B, s, k) marks real entries; padded slots get zero weight.
    """
    V, K, Q = _project(p.W_V, X), _project(p.W_K, X), _project(p.W_Q, X)
    Vg, Kg = _gather(V, idx), _gather(K, idx)
    S = p.score_scale * np.einsum("bjmsk,bjms->bjsk", Kg, Q)
    if mask is not None:
        S = np.where(mask[:, None], S, -np.inf)
    S = S - S.max(axis=3, keepdims=True)
    P = np.exp(S)
    P /= P.sum(axis=3, keepdims=True)
    H = np.einsum("bjmsk,bjsk->bjms", Vg, P)
    B, h, m, s = H.shape
    heads = H.reshape(B, h * m, s)
    out = X + p.W_O @ heads
    return out, (X, idx, Q, Vg, Kg, P, heads)


def _sparse_mha_backward(dout, cache, p: TransformerParams, grads: Gradients):
    X, idx, Q, Vg, Kg, P, heads = cache
    B, h, m, s, k = Vg.shape
    grads["W_O"] += _outer_sum(dout, heads)
    dH = (p.W_O.T @ dout).reshape(B, h, m, s)
    dP = np.einsum("bjms,bjmsk->bjsk", dH, Vg)
    dVg = np.einsum("bjms,bjsk->bjmsk", dH, P)
    dS = P * (dP - (P * dP).sum(axis=3, keepdims=True)) * p.score_scale
    dKg = np.einsum("bjsk,bjms->bjmsk", dS, Q)
    dQ = np.einsum("bjsk,bjmsk->bjms", dS, Kg)
    dV, dK = _scatter(dVg, idx, s), _scatter(dKg, idx, s)
    return dout + _project_backward(X, dV, dK, dQ, p, grads)


def _pattern_arrays(pattern, B):
    """Padded ``(idx, mask)`` of shape (B, s, k) from an AttentionPattern."""
    s = pattern.n_tokens
    k = max(len(a) for a in pattern.sets)
    idx = np.zeros((s, k), dtype=int)
    mask = np.zeros((s, k), dtype=bool)
    for q, a in enumerate(pattern.sets):
        idx[q, :len(a)] = a
        idx[q, len(a):] = q
        mask[q, :len(a)] = True
    full = bool(mask.all())
    idx = np.broadcast_to(idx, (B, s, k))
    mask = None if full else np.broadcast_to(mask, (B, s, k))
    return idx, mask


def _cycle_arrays(plan: SubsetPlan, B):
    """Parallel-mode sampled attention equals attention over the induced cycle."""
    order = np.array(plan.order)
    succ = np.empty(plan.n, dtype=int)
    succ[order] = np.roll(order, -1)
    idx = np.column_stack([np.arange(plan.n), succ])
    return np.broadcast_to(idx, (B, plan.n, 2)), None


def _sampled_forward(X, plan: SubsetPlan, p: TransformerParams):
    """Sequential window-by-window composition, batched over clouds."""
    B = X.shape[0]
    idx, mask = _pattern_arrays(hamiltonian_pattern(plan.n_s), B)
    cur = X.copy()
    steps = []
    for i in range(plan.l):
        cols = np.array(window_columns(plan, i))
        # with one window the link duplicates column 0 and is not written back
        write = np.arange(plan.n_s) if plan.l > 1 else np.arange(plan.n_s - 1)
        out, cache = _sparse_mha_forward(cur[:, :, cols], idx, mask, p)
        cur[:, :, cols[write]] = out[:, :, write]
        steps.append((cols, write, cache))
    return cur, steps


def _sampled_backward(dA, steps, p: TransformerParams, grads: Gradients):
    dcur = dA.copy()
    for cols, write, cache in reversed(steps):
        dout = np.zeros((dcur.shape[0], dcur.shape[1], len(cols)))
        dout[:, :, write] = dcur[:, :, cols[write]]
        dcur[:, :, cols[write]] = 0.0
        dXw = _sparse_mha_backward(dout, cache, p, grads)
        for slot, c in enumerate(cols):
            dcur[:, :, c] += dXw[:, :, slot]
    return dcur


# --------------------------------------------------------------------------
# loss


@dataclass
class Batch:
    coords: np.ndarray    # (B, 3, n)
    features: np.ndarray  # (B, f, n)
    labels: np.ndarray    # (B,)

    @classmethod
    def from_clouds(cls, clouds: Sequence) -> "Batch":
        if not clouds:
            raise ValueError("empty batch")
        sizes = {c.n for c in clouds}
        if len(sizes) != 1:
            raise ValueError(f"clouds in a batch must share n, got sizes {sorted(sizes)}")
        feats = {c.feature_dim for c in clouds}
        if len(feats) != 1:
            raise ValueError("clouds in a batch must share the feature dimension")
        labels = np.array([-1 if c.label is None else c.label for c in clouds])
        return cls(np.stack([c.coords for c in clouds]), np.stack([c.features for c in clouds]),
                   labels)

    def take(self, idx) -> "Batch":
        return Batch(self.coords[:, :, idx], self.features[:, :, idx], self.labels)


@dataclass
class Cache:
    model: Model
    version: int
    kind: str
    batch: Batch
    attn: object
    A: np.ndarray
    Z: np.ndarray
    Y: np.ndarray
    argmax: np.ndarray
    pooled: np.ndarray
    probs: np.ndarray


def _attention_forward(X, batch: Batch, model: Model, config: TrainConfig, plan):
    p = model.block
    kind = config.kind
    if kind == "none":
        return X, None
    if kind == "dense":
        return _dense_mha_forward(X, p)
    B, _, n = X.shape
    if kind == "sparse-hamiltonian":
        idx, mask = _pattern_arrays(hamiltonian_pattern(n), B)
        return _sparse_mha_forward(X, idx, mask, p)
    if kind == "knn":
        k = min(config.k, n)
        idx = np.stack([np.array(knn_pattern(batch.coords[b], k).sets) for b in range(B)])
        return _sparse_mha_forward(X, idx, None, p)
    if kind == "sampled":
        if plan is None:
            raise ValueError("sampled kind needs a SubsetPlan")
        if config.mode == "parallel":
            idx, mask = _cycle_arrays(plan, B)
            out, cache = _sparse_mha_forward(X, idx, mask, p)
            return out, ("parallel", cache)
        out, steps = _sampled_forward(X, plan, p)
        return out, ("sequential", steps)
    raise ValueError(f"unknown attention kind {kind!r}")


def _attention_backward(dA, cache: Cache, grads: Gradients):
    p = cache.model.block
    kind = cache.kind
    if kind == "none":
        return dA
    if kind == "dense":
        return _dense_mha_backward(dA, cache.attn, p, grads)
    if kind == "sampled":
        how, inner = cache.attn
        if how == "sequential":
            return _sampled_backward(dA, inner, p, grads)
        return _sparse_mha_backward(dA, inner, p, grads)
    return _sparse_mha_backward(dA, cache.attn, p, grads)


def forward_loss(batch, model: Model, config: TrainConfig, plan: Optional[SubsetPlan] = None):
    """Mean cross-entropy over the batch; returns ``(loss, cache)``.

    ``batch`` is a :class:`Batch` or a list of PointSets. The sampled kind
    needs ``plan`` (one plan for the whole batch).
    """
    if not isinstance(batch, Batch):
        batch = Batch.from_clouds(batch)
    p, hp = model.block, model.head
    if batch.features.shape[1] != hp.W_in.shape[1]:
        raise ValueError(f"feature dim {batch.features.shape[1]} != W_in columns {hp.W_in.shape[1]}")
    if hp.W_in.shape[0] != p.d:
        raise ValueError("W_in rows must equal the model dimension d")
    X = hp.W_in @ batch.features + p.W_p @ batch.coords
    A, attn = _attention_forward(X, batch, model, config, plan)
    Z = p.W_1 @ A
    Y = A + p.W_2 @ np.maximum(Z, 0.0)
    argmax = Y.argmax(axis=2)  # lowest index on ties
    pooled = np.take_along_axis(Y, argmax[:, :, None], axis=2)[:, :, 0]
    logits = pooled @ hp.W_c.T + hp.b_c
    logits = logits - logits.max(axis=1, keepdims=True)
    probs = np.exp(logits)
    probs /= probs.sum(axis=1, keepdims=True)
    B = len(batch.labels)
    if np.any(batch.labels < 0) or np.any(batch.labels >= probs.shape[1]):
        raise ValueError("labels must lie in [0, n_classes)")
    loss = float(-np.mean(np.log(probs[np.arange(B), batch.labels])))
    cache = Cache(model, model.version, config.kind, batch, attn, A, Z, Y, argmax, pooled, probs)
    return loss, cache


def backward(cache: Cache) -> Gradients:
    """Analytic gradient of the loss in ``cache`` for every learnable array."""
    model = cache.model
    if model.version != cache.version:
        raise StaleCacheError("parameters changed since forward_loss; recompute the cache")
    p, hp = model.block, model.head
    grads = {k: np.zeros_like(v) for k, v in model.params().items()}
    batch = cache.batch
    B = len(batch.labels)
    dlogits = cache.probs.copy()
    dlogits[np.arange(B), batch.labels] -= 1.0
    dlogits /= B
    grads["W_c"] += dlogits.T @ cache.pooled
    grads["b_c"] += dlogits.sum(axis=0)
    dpooled = dlogits @ hp.W_c
    dY = np.zeros_like(cache.Y)
    np.put_along_axis(dY, cache.argmax[:, :, None], dpooled[:, :, None], axis=2)
    R = np.maximum(cache.Z, 0.0)
    grads["W_2"] += _outer_sum(dY, R)
    dZ = (p.W_2.T @ dY) * (cache.Z > 0)
    grads["W_1"] += _outer_sum(dZ, cache.A)
    dA = dY + p.W_1.T @ dZ
    dX = _attention_backward(dA, cache, grads)
    grads["W_in"] += _outer_sum(dX, batch.features)
    grads["W_p"] += _outer_sum(dX, batch.coords)
    return grads


def finite_diff_grad(loss_fn: Callable[[dict], float], params: dict, eps: float = 1e-4) -> Gradients:
    """Central differences ``(f(x + eps) - f(x - eps)) / (2 eps)`` for every scalar.

    ``loss_fn`` receives a dict of arrays shaped like ``params``; the input
    dict is never modified.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    work = {k: np.array(v, dtype=float, copy=True) for k, v in params.items()}
    out = {}
    for name, arr in work.items():
        g = np.zeros_like(arr)
        flat, gflat = arr.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = loss_fn(work)
            flat[i] = orig - eps
            down = loss_fn(work)
            flat[i] = orig
            gflat[i] = (up - down) / (2 * eps)
        out[name] = g
    return out


def gradient_relative_errors(analytic: Gradients, numeric: Gradients, floor: float = 1e-8) -> dict:
    """Worst entry of ``|g_a - g_fd| / (|g_fd| + floor)`` for each array."""
    out = {}
    for k, fd in numeric.items():
        err = np.abs(analytic[k] - fd) / (np.abs(fd) + floor)
        out[k] = float(err.max()) if err.size else 0.0
    return out


def model_loss_fn(model: Model, batch, config: TrainConfig, plan=None):
    """Loss as a function of a parameter dict, for :func:`finite_diff_grad`."""
    if not isinstance(batch, Batch):
        batch = Batch.from_clouds(batch)

    def fn(params):
        trial = model.copy()
        trial.set_params(params)
        return forward_loss(batch, trial, config, plan)[0]

    return fn


# --------------------------------------------------------------------------
# optimisation


class Adam:
    def __init__(self, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m: dict = {}
        self.v: dict = {}

    def step(self, model: Model, grads: Gradients) -> None:
        self.t += 1
        params = model.params()
        new = {}
        for k, g in grads.items():
            m = self.m.get(k, np.zeros_like(g))
            v = self.v.get(k, np.zeros_like(g))
            m = self.beta1 * m + (1 - self.beta1) * g
            v = self.beta2 * v + (1 - self.beta2) * g * g
            self.m[k], self.v[k] = m, v
            mhat = m / (1 - self.beta1 ** self.t)
            vhat = v / (1 - self.beta2 ** self.t)
            new[k] = params[k] - self.lr * mhat / (np.sqrt(vhat) + self.eps)
        model.set_params(new)


class SGD:
    def __init__(self, lr):
        self.lr = lr

    def step(self, model: Model, grads: Gradients) -> None:
        params = model.params()
        model.set_params({k: params[k] - self.lr * g for k, g in grads.items()})


def make_optimizer(config: TrainConfig):
    if config.optimizer == "adam":
        return Adam(config.lr, config.beta1, config.beta2, config.eps)
    return SGD(config.lr)


@dataclass
class TrainedModel:
    model: Model
    config: TrainConfig
    n_classes: int


def _prepare(batch: Batch, config: TrainConfig, rng):
    """Pad for the sampled kind when ``n_s - 1`` does not divide ``n``; draw its plan."""
    if config.kind != "sampled":
        return batch, None
    n = batch.coords.shape[2]
    if n % (config.n_s - 1):
        batch = batch.take(pad_indices(n, config.n_s, rng))
        n = batch.coords.shape[2]
    return batch, sample_subset_plan(n, config.n_s, rng)


def predict(trained: TrainedModel, clouds: Sequence, seed: int = 0, batch_size: int = 64) -> np.ndarray:
    """Class predictions; the sampled kind draws fresh plans from ``seed``."""
    rng = np.random.default_rng(seed)
    preds = []
    for start in range(0, len(clouds), batch_size):
        batch = Batch.from_clouds(clouds[start:start + batch_size])
        batch.labels = np.zeros_like(batch.labels)
        batch, plan = _prepare(batch, trained.config, rng)
        _, cache = forward_loss(batch, trained.model, trained.config, plan)
        preds.append(cache.probs.argmax(axis=1))
    return np.concatenate(preds)


def evaluate(trained: TrainedModel, clouds: Sequence, seed: int = 0, batch_size: int = 64):
    """Return ``(mean loss, accuracy)`` on ``clouds``."""
    rng = np.random.default_rng(seed)
    total, correct = 0.0, 0
    for start in range(0, len(clouds), batch_size):
        batch = Batch.from_clouds(clouds[start:start + batch_size])
        batch, plan = _prepare(batch, trained.config, rng)
        loss, cache = forward_loss(batch, trained.model, trained.config, plan)
        total += loss * len(batch.labels)
        correct += int((cache.probs.argmax(axis=1) == batch.labels).sum())
    return total / len(clouds), correct / len(clouds)


def train(train_set: Sequence, test_set: Sequence, config: TrainConfig):
    """Fit a classifier; returns ``(TrainedModel, history)``.

    ``history`` holds one dict per epoch and split with keys ``epoch``,
    ``split``, ``loss``, ``accuracy``. Runs are deterministic given
    ``config.seed``; the sampled kind draws a fresh plan per batch.
    """
    config.validate()
    if not train_set:
        raise ValueError("training set is empty")
    rng = np.random.default_rng(config.seed)
    n_classes = int(max(c.label for c in list(train_set) + list(test_set))) + 1
    model = Model.init(config, train_set[0].feature_dim, n_classes, rng)
    trained = TrainedModel(model, config, n_classes)
    opt = make_optimizer(config)
    history = []
    full = Batch.from_clouds(train_set)
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(train_set))
        total, correct = 0.0, 0
        for start in range(0, len(order), config.batch_size):
            sel = order[start:start + config.batch_size]
            batch = Batch(full.coords[sel], full.features[sel], full.labels[sel])
            batch, plan = _prepare(batch, config, rng)
            loss, cache = forward_loss(batch, model, config, plan)
            if not np.isfinite(loss):
                raise TrainingDivergedError(f"loss became {loss} at epoch {epoch}, "
                                            f"batch starting at {start}; try a smaller lr")
            grads = backward(cache)
            opt.step(model, grads)
            total += loss * len(sel)
            correct += int((cache.probs.argmax(axis=1) == batch.labels).sum())
        history.append({"epoch": epoch, "split": "train", "loss": total / len(order),
                        "accuracy": correct / len(order)})
        if test_set:
            test_loss, test_acc = evaluate(trained, test_set, seed=config.seed + epoch)
            history.append({"epoch": epoch, "split": "test", "loss": test_loss, "accuracy": test_acc})
        log.info("epoch %d: %s", epoch, history[-1])
    return trained, history


def write_history_csv(history: Sequence[dict], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=["epoch", "split", "loss", "accuracy"])
        writer.writeheader()
        for row in history:
            writer.writerow({k: row[k] for k in writer.fieldnames})
