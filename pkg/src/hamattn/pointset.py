"""Point sets, the synthetic shape dataset, and plain-text XYZ files.

Random numbers come from ``numpy.random.Generator`` backed by PCG64, seeded
with a single integer, so a dataset is reproducible from ``(spec, count)``.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

SHAPE_KINDS = ("sphere", "cube", "two_cluster")
FEATURE_KINDS = ("normals", "constant")


class PointSetError(ValueError):
    pass


class XYZParseError(PointSetError):
    def __init__(self, path, lineno: int, msg: str):
        self.path = str(path)
        self.lineno = lineno
        super().__init__(f"{path}: line {lineno}: {msg}")


@dataclass(frozen=True)
class PointSet:
    """A cloud of ``n`` points: ``coords`` is 3 x n, ``features`` is f x n (f may be 0)."""

    coords: np.ndarray
    features: np.ndarray
    label: Optional[int] = None

    def __post_init__(self):
        coords = np.array(self.coords, dtype=float)
        feats = np.array(self.features, dtype=float)
        if coords.ndim != 2 or coords.shape[0] != 3:
            raise PointSetError(f"coords must be 3 x n, got {coords.shape}")
        n = coords.shape[1]
        if feats.size == 0:
            feats = feats.reshape(0, n)
        if feats.ndim != 2 or feats.shape[1] != n:
            raise PointSetError(f"features must be f x {n}, got {feats.shape}")
        if n < 2:
            raise PointSetError("a point set needs at least 2 points")
        coords.setflags(write=False)
        feats.setflags(write=False)
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "features", feats)

    @property
    def n(self) -> int:
        return self.coords.shape[1]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[0]

    def permuted(self, perm: Sequence[int]) -> "PointSet":
        perm = np.asarray(perm)
        return PointSet(self.coords[:, perm], self.features[:, perm], self.label)

    def take(self, idx: Sequence[int]) -> "PointSet":
        idx = np.asarray(idx)
        return PointSet(self.coords[:, idx], self.features[:, idx], self.label)


@dataclass
class SyntheticSpec:
    class_shapes: Sequence[str] = SHAPE_KINDS
    points_per_cloud: int = 256
    noise_sigma: float = 0.02
    seed: int = 0
    features: str = "normals"

    def validate(self) -> None:
        if self.points_per_cloud < 2:
            raise PointSetError("points_per_cloud must be >= 2")
        if len(self.class_shapes) < 2:
            raise PointSetError("need at least 2 classes")
        if self.noise_sigma < 0:
            raise PointSetError("noise_sigma must be nonnegative")
        for kind in self.class_shapes:
            if kind not in SHAPE_KINDS:
                raise PointSetError(f"unknown shape kind {kind!r}; expected one of {SHAPE_KINDS}")
        if self.features not in FEATURE_KINDS:
            raise PointSetError(f"features must be one of {FEATURE_KINDS}, got {self.features!r}")


def _sphere(rng, n):
    v = rng.standard_normal((3, n))
    v /= np.linalg.norm(v, axis=0, keepdims=True)
    return v, v.copy()


def _cube(rng, n):
    # uniform on the surface of [-1, 1]^3: pick a face, then a point on it
    axis = rng.integers(0, 3, size=n)
    sign = rng.choice([-1.0, 1.0], size=n)
    pts = rng.uniform(-1.0, 1.0, size=(3, n))
    pts[axis, np.arange(n)] = sign
    normals = np.zeros((3, n))
    normals[axis, np.arange(n)] = sign
    return pts, normals


def _two_cluster(rng, n):
    centers = np.array([[-0.6, 0.0, 0.0], [0.6, 0.0, 0.0]]).T
    which = rng.integers(0, 2, size=n)
    pts = centers[:, which] + 0.25 * rng.standard_normal((3, n))
    direction = pts - centers[:, which]
    direction /= np.linalg.norm(direction, axis=0, keepdims=True)
    return pts, direction


_SAMPLERS = {"sphere": _sphere, "cube": _cube, "two_cluster": _two_cluster}


def generate_synthetic(spec: SyntheticSpec, count_per_class: int) -> list[PointSet]:
    """Sample ``count_per_class`` clouds for every class in ``spec.class_shapes``.

    Features are per-point unit normals (outward for sphere and cube, away from
    the owning center for the two clusters), or a single constant 1 per point
    when ``spec.features == "constant"``. Isotropic Gaussian noise of scale
    ``noise_sigma`` is added to coordinates only. Clouds are returned grouped
    by class, label = position in ``class_shapes``.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    out = []
    for label, kind in enumerate(spec.class_shapes):
        sampler = _SAMPLERS[kind]
        for _ in range(count_per_class):
            pts, feats = sampler(rng, spec.points_per_cloud)
            if spec.features == "constant":
                feats = np.ones((1, spec.points_per_cloud))
            if spec.noise_sigma > 0:
                pts = pts + spec.noise_sigma * rng.standard_normal(pts.shape)
            out.append(PointSet(pts, feats, label))
    return out


def split_dataset(clouds: Sequence[PointSet], test_fraction: float = 0.2, seed: int = 0):
    """Stratified train/test split; returns ``(train, test)`` lists."""
    rng = np.random.default_rng(seed)
    labels = sorted({c.label for c in clouds})
    train, test = [], []
    for lab in labels:
        members = [c for c in clouds if c.label == lab]
        order = rng.permutation(len(members))
        n_test = int(round(test_fraction * len(members)))
        test.extend(members[i] for i in order[:n_test])
        train.extend(members[i] for i in order[n_test:])
    return train, test


def write_xyz(ps: PointSet, path) -> None:
    """One point per line: ``x y z f1 ... fd`` with 17 significant digits."""
    rows = np.vstack([ps.coords, ps.features]).T
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(" ".join(f"{v:.17g}" for v in row))
            fh.write("\n")


def read_xyz(path, label: Optional[int] = None) -> PointSet:
    rows = []
    width = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) < 3:
                raise XYZParseError(path, lineno, f"expected at least 3 fields, got {len(parts)}")
            if width is None:
                width = len(parts)
            elif len(parts) != width:
                raise XYZParseError(path, lineno, f"expected {width} fields, got {len(parts)}")
            try:
                rows.append([float(p) for p in parts])
            except ValueError as exc:
                raise XYZParseError(path, lineno, str(exc)) from None
    if not rows:
        raise PointSetError(f"{path}: empty file")
    arr = np.array(rows).T
    return PointSet(arr[:3], arr[3:], label)


def write_manifest(path, entries: Sequence[tuple[str, int]]) -> None:
    """Dataset manifest: JSON ``{"version": 1, "items": [{"path": ..., "label": ...}]}``."""
    items = [{"path": str(p), "label": int(lab)} for p, lab in entries]
    Path(path).write_text(json.dumps({"version": 1, "items": items}, indent=2), encoding="utf-8")


def read_manifest(path) -> list[PointSet]:
    """Load every cloud listed in a manifest; relative paths resolve against the manifest."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    base = Path(path).parent
    clouds = []
    for i, item in enumerate(data.get("items", [])):
        if "path" not in item or "label" not in item:
            raise PointSetError(f"{path}: items[{i}] needs 'path' and 'label'")
        p = Path(item["path"])
        if not p.is_absolute():
            p = base / p
        clouds.append(read_xyz(p, label=int(item["label"])))
    return clouds


def save_dataset(clouds: Sequence[PointSet], directory) -> Path:
    """Write each cloud as ``cloud_XXXXX.xyz`` plus ``manifest.json``; returns the manifest path."""
    directory = Path(directory)
    os.makedirs(directory, exist_ok=True)
    entries = []
    for i, c in enumerate(clouds):
        name = f"cloud_{i:05d}.xyz"
        write_xyz(c, directory / name)
        entries.append((name, -1 if c.label is None else c.label))
    manifest = directory / "manifest.json"
    write_manifest(manifest, entries)
    return manifest
