"""Numerically stable dense-math primitives shared by the whole package.

Matrices are plain float64 row-major 2-D numpy arrays. Every product and
reduction here goes through non-optimized ``einsum``, never BLAS, so the
accumulation order is fixed left-to-right and results reproduce
bit-identically across runs and thread counts. Weight-fusion endpoint
comparisons depend on that.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateEmbeddingError, UsageError

# Below this, a row is considered degenerate rather than normalizable.
ZERO_NORM_THRESHOLD = 1e-12


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite float64 2-D array or raise ``UsageError``."""
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim != 2:
        raise UsageError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise UsageError(f"{name} contains non-finite entries")
    return arr


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # einsum keeps the summation order fixed; BLAS kernels may reorder.
    return np.einsum("ij,jk->ik", a, b, optimize=False)


def logsumexp(v) -> float:
    """log(sum(exp(v))) via the max-shift trick; never overflows."""
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise UsageError("logsumexp expects a non-empty 1-D vector")
    if not np.all(np.isfinite(arr)):
        raise UsageError("logsumexp expects finite entries")
    m = float(arr.max())
    return m + float(np.log(np.einsum("i->", np.exp(arr - m))))


def softmax_rows(m) -> np.ndarray:
    """Row-wise softmax, shift-invariant and stable."""
    arr = as_matrix(m, "softmax input")
    shifted = arr - arr.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / np.einsum("ij->i", e)[:, None]


def log_softmax_rows(m) -> np.ndarray:
    """Row-wise log-softmax, computed without forming unstable ratios."""
    arr = as_matrix(m, "log-softmax input")
    shifted = arr - arr.max(axis=1, keepdims=True)
    lse = np.log(np.einsum("ij->i", np.exp(shifted)))
    return shifted - lse[:, None]


def row_norms(m: np.ndarray) -> np.ndarray:
    return np.sqrt(np.einsum("ij,ij->i", m, m))


def l2_normalize_rows(m) -> np.ndarray:
    """Scale each row to unit Euclidean norm.

    Raises ``DegenerateEmbeddingError`` if any row has norm below
    ``ZERO_NORM_THRESHOLD``; direction is otherwise preserved.
    """
    arr = as_matrix(m, "normalize input")
    norms = row_norms(arr)
    bad = np.flatnonzero(norms < ZERO_NORM_THRESHOLD)
    if bad.size:
        raise DegenerateEmbeddingError(
            f"row {int(bad[0])} has norm {norms[bad[0]]:.3e}, cannot normalize"
        )
    return arr / norms[:, None]


def similarity_matrix(a, b, sigma: float) -> np.ndarray:
    """Pairwise dot products between rows of ``a`` and ``b``, divided by ``sigma``."""
    am = as_matrix(a, "similarity lhs")
    bm = as_matrix(b, "similarity rhs")
    if am.shape[1] != bm.shape[1]:
        raise UsageError(
            f"similarity inputs disagree on feature dim: {am.shape[1]} vs {bm.shape[1]}"
        )
    if not np.isfinite(sigma) or sigma <= 0:
        raise UsageError(f"temperature must be a positive finite real, got {sigma}")
    return np.einsum("ik,jk->ij", am, bm) / sigma
