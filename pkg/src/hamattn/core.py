"""Small dense-matrix helpers shared by the attention and verifier code.

Matrices are plain ``numpy.ndarray`` objects laid out ``(features, tokens)``:
every column is one token. Column-wise normalizations therefore reduce over
axis ``-2`` so that leading batch/head axes pass through untouched.

Exact arithmetic uses :class:`fractions.Fraction`. Verifier matrices are
numpy arrays with ``dtype=object`` holding Fractions, which keeps slicing and
``@`` available while never rounding.
"""
from __future__ import annotations

from fractions import Fraction

import numpy as np

ExactScalar = Fraction


def softmax_cols(M: np.ndarray) -> np.ndarray:
    """Column-wise softmax with per-column max subtraction."""
    M = np.asarray(M, dtype=float)
    shifted = M - M.max(axis=-2, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-2, keepdims=True)


def hardmax_cols(M: np.ndarray) -> np.ndarray:
    """One-hot column argmax; ties go to the lowest row index.

    Works for float arrays and for object arrays of Fractions.
    """
    M = np.asarray(M)
    if M.ndim != 2:
        raise ValueError(f"hardmax_cols expects a 2-D matrix, got shape {M.shape}")
    rows, cols = M.shape
    out = np.zeros((rows, cols), dtype=int)
    for k in range(cols):
        col = M[:, k]
        best = 0
        for i in range(1, rows):
            # strict comparison keeps the first maximum
            if col[i] > col[best]:
                best = i
        out[best, k] = 1
    return out


def relu(M: np.ndarray) -> np.ndarray:
    return np.maximum(M, 0.0)


def exact_matrix(values) -> np.ndarray:
    """Convert nested values (ints, strings, Fractions) to an object array of Fractions."""
    arr = np.asarray(values, dtype=object)
    flat = [Fraction(v) for v in arr.ravel()]
    out = np.empty(arr.shape, dtype=object)
    out.ravel()[:] = flat
    return out


def to_fraction(x) -> Fraction:
    """Parse ``"1/2"``, ints, or Fractions. Floats are rejected to avoid silent rounding."""
    if isinstance(x, float):
        raise TypeError("pass exact values (int, str or Fraction), not float")
    return Fraction(x)


def check_finite(M: np.ndarray, name: str = "matrix") -> None:
    if not np.all(np.isfinite(M)):
        raise FloatingPointError(f"{name} contains NaN or Inf")
