"""Symmetric positive (semi)definite matrices backed by a Cholesky factor.

The pivot test lives in :func:`batch_cholesky` so that the scalar
:class:`SpdMatrix` wrapper and the vectorised Monte Carlo paths agree on
which matrices count as singular.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DimensionError, SingularMatrixError

__all__ = ["SpdMatrix", "batch_cholesky", "PIVOT_RTOL", "SYMMETRY_TOL"]

PIVOT_RTOL = 1e-12
SYMMETRY_TOL = 1e-12


def batch_cholesky(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cholesky-factor a stack of symmetric matrices of shape ``(..., d, d)``.

    Returns ``(L, singular)``. A matrix is flagged singular when some pivot
    ``L_jj^2`` is not larger than ``PIVOT_RTOL`` times the largest pivot;
    entries of ``L`` for flagged matrices are meaningless.
    The loop runs over matrix entries and vectorises over the batch, which
    is the fast layout for the small ``d`` used here.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise DimensionError(f"expected (..., d, d) array, got shape {a.shape}")
    d = a.shape[-1]
    batch = a.shape[:-2]
    L = np.zeros_like(a)
    pivots = np.zeros(batch + (d,))
    for j in range(d):
        pivot = a[..., j, j] - np.sum(L[..., j, :j] ** 2, axis=-1)
        pivots[..., j] = pivot
        root = np.sqrt(np.where(pivot > 0.0, pivot, 1.0))
        L[..., j, j] = root
        for i in range(j + 1, d):
            s = a[..., i, j] - np.sum(L[..., i, :j] * L[..., j, :j], axis=-1)
            L[..., i, j] = s / root
    max_pivot = np.max(pivots, axis=-1)
    singular = ~np.all(pivots > PIVOT_RTOL * max_pivot[..., None], axis=-1) | ~(max_pivot > 0.0)
    return L, singular


class SpdMatrix:
    """Dense symmetric matrix with a cached Cholesky factor or a singular flag.

    Args:
        entries: square array-like; symmetry is checked to ``SYMMETRY_TOL``
            relative to the largest entry and then enforced by averaging.
    """

    __slots__ = ("_a", "_chol", "_singular")

    def __init__(self, entries):
        a = np.array(entries, dtype=float)
        if a.ndim == 0:
            a = a.reshape(1, 1)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionError(f"expected a square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("matrix entries must be finite")
        scale = max(1.0, float(np.max(np.abs(a))))
        if np.max(np.abs(a - a.T)) > SYMMETRY_TOL * scale:
            raise ValueError("matrix is not symmetric")
        a = 0.5 * (a + a.T)
        a.setflags(write=False)
        L, singular = batch_cholesky(a)
        self._a = a
        self._singular = bool(singular)
        self._chol = None if self._singular else L

    @classmethod
    def identity(cls, d: int) -> "SpdMatrix":
        return cls(np.eye(d))

    @property
    def matrix(self) -> np.ndarray:
        return self._a

    @property
    def dim(self) -> int:
        return self._a.shape[0]

    @property
    def singular(self) -> bool:
        return self._singular

    @property
    def cholesky(self) -> np.ndarray:
        if self._singular:
            raise SingularMatrixError("matrix is singular; no Cholesky factor")
        return self._chol

    def logdet(self) -> float:
        """log det, or ``-inf`` for a singular matrix."""
        if self._singular:
            return -math.inf
        return 2.0 * math.fsum(np.log(np.diag(self._chol)).tolist())

    def solve(self, b) -> np.ndarray:
        """Solve ``A x = b`` through the Cholesky factor."""
        L = self.cholesky
        y = np.linalg.solve(L, np.asarray(b, dtype=float))
        return np.linalg.solve(L.T, y)

    def inverse(self) -> np.ndarray:
        return self.solve(np.eye(self.dim))

    def sqrt(self) -> np.ndarray:
        """Symmetric square root via the eigendecomposition."""
        w, v = np.linalg.eigh(self._a)
        return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self._a, dtype=dtype)

    def __eq__(self, other):
        if not isinstance(other, SpdMatrix):
            return NotImplemented
        return np.array_equal(self._a, other._a)

    def __hash__(self):
        return hash(self._a.tobytes())

    def __repr__(self):
        flag = ", singular" if self._singular else ""
        return f"SpdMatrix({self._a.tolist()!r}{flag})"
