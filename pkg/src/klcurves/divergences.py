"""Exact KL divergences between fitted and true models.

Conventions:

* A singular covariance in the *first* slot of :func:`gaussian_kl` (the
  reverse orientation, KL(fitted || true)) gives ``+inf``: the log-det term
  ``-log det(cov_p)`` diverges.
* :func:`gaussian_kl` rejects a singular second argument.  The vectorised
  :func:`gaussian_kl_batch` used by the simulator instead maps a singular
  fitted covariance to ``+inf`` in either slot.
* ``0 log 0 = 0`` throughout (see :func:`xlogy`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError, SingularMatrixError
from .linalg import SpdMatrix, batch_cholesky

__all__ = [
    "GaussianParams",
    "GammaParams",
    "gaussian_kl",
    "gaussian_kl_batch",
    "gamma_kl",
    "xlogy",
]


def xlogy(x: float, y: float) -> float:
    """``x * log(y)`` with the convention ``0 * log(0) = 0``."""
    if x == 0.0:
        return 0.0
    return x * math.log(y)


@dataclass(frozen=True, eq=False)
class GaussianParams:
    mean: np.ndarray
    covariance: SpdMatrix

    def __post_init__(self):
        cov = self.covariance
        if not isinstance(cov, SpdMatrix):
            cov = SpdMatrix(cov)
        mean = np.array(self.mean, dtype=float).reshape(-1)
        if mean.shape != (cov.dim,):
            raise DimensionError(f"mean length {mean.size} does not match covariance {cov.dim}")
        mean.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @classmethod
    def centered(cls, cov) -> "GaussianParams":
        cov = cov if isinstance(cov, SpdMatrix) else SpdMatrix(cov)
        return cls(np.zeros(cov.dim), cov)

    @property
    def dim(self) -> int:
        return self.covariance.dim


@dataclass(frozen=True)
class GammaParams:
    alpha: float
    theta: float

    def __post_init__(self):
        for name in ("alpha", "theta"):
            v = float(getattr(self, name))
            if not math.isfinite(v) or v <= 0:
                raise DomainError(f"{name} must be finite and > 0, got {v!r}")
            object.__setattr__(self, name, v)


def gaussian_kl(p: GaussianParams, q: GaussianParams) -> float:
    """KL(N(p) || N(q)).

    ``0.5 * (tr(Sq^-1 Sp) + (mq-mp)' Sq^-1 (mq-mp) - d - log det(Sq^-1 Sp))``

    Raises:
        DimensionError: if the dimensions differ.
        SingularMatrixError: if ``q.covariance`` is singular.
    """
    if p.dim != q.dim:
        raise DimensionError(f"dimension mismatch: {p.dim} vs {q.dim}")
    if q.covariance.singular:
        raise SingularMatrixError("second argument of gaussian_kl must be positive definite")
    if p.covariance.singular:
        return math.inf
    d = p.dim
    Lq = q.covariance.cholesky
    # Lq^-1 Lp and Lq^-1 (mq - mp): the trace and quadratic terms are squared norms.
    a = np.linalg.solve(Lq, p.covariance.cholesky)
    b = np.linalg.solve(Lq, q.mean - p.mean)
    trace = float(np.sum(a * a))
    quad = float(b @ b)
    logdet_ratio = q.covariance.logdet() - p.covariance.logdet()
    value = 0.5 * (trace + quad - d + logdet_ratio)
    return max(value, 0.0)


def _batch_logdet_and_L(cov: np.ndarray):
    L, singular = batch_cholesky(cov)
    diag = np.diagonal(L, axis1=-2, axis2=-1)
    logdet = 2.0 * np.sum(np.log(diag), axis=-1)
    return L, logdet, singular


def gaussian_kl_batch(mean_p, cov_p, mean_q, cov_q) -> np.ndarray:
    """Vectorised KL(N(mean_p, cov_p) || N(mean_q, cov_q)) over a leading batch axis.

    Arguments broadcast against each other: means are ``(..., d)`` and
    covariances ``(..., d, d)``; either side may be a single model.  Any
    covariance flagged singular by :func:`batch_cholesky` yields ``+inf``.
    """
    cov_p = np.asarray(cov_p, dtype=float)
    cov_q = np.asarray(cov_q, dtype=float)
    mean_p = np.asarray(mean_p, dtype=float)
    mean_q = np.asarray(mean_q, dtype=float)
    d = cov_p.shape[-1]
    if cov_q.shape[-1] != d or mean_p.shape[-1] != d or mean_q.shape[-1] != d:
        raise DimensionError("dimension mismatch in gaussian_kl_batch")
    Lp, logdet_p, sing_p = _batch_logdet_and_L(cov_p)
    Lq, logdet_q, sing_q = _batch_logdet_and_L(cov_q)
    bad = np.broadcast_to(sing_p, np.broadcast_shapes(sing_p.shape, sing_q.shape)) | sing_q
    eye = np.eye(d)
    Lq_safe = np.where(sing_q[..., None, None], eye, Lq)
    Lp_safe = np.where(sing_p[..., None, None], eye, Lp)
    shape = np.broadcast_shapes(Lq_safe.shape, Lp_safe.shape)
    a = np.linalg.solve(np.broadcast_to(Lq_safe, shape), np.broadcast_to(Lp_safe, shape))
    diff = np.broadcast_to(mean_q - mean_p, shape[:-1])
    b = np.linalg.solve(np.broadcast_to(Lq_safe, shape), diff[..., None])[..., 0]
    trace = np.sum(a * a, axis=(-2, -1))
    quad = np.sum(b * b, axis=-1)
    with np.errstate(invalid="ignore"):
        value = 0.5 * (trace + quad - d + logdet_q - logdet_p)
    value = np.maximum(value, 0.0)
    return np.where(bad, np.inf, value)


def gamma_kl(alpha: float, theta_p: float, theta_q: float) -> float:
    """KL(Gamma(alpha, theta_p) || Gamma(alpha, theta_q)) = alpha (log(tq/tp) + tp/tq - 1).

    Raises:
        DomainError: on non-positive or non-finite arguments.
    """
    for name, v in (("alpha", alpha), ("theta_p", theta_p), ("theta_q", theta_q)):
        if not math.isfinite(v) or v <= 0:
            raise DomainError(f"{name} must be finite and > 0, got {v!r}")
    r = theta_p / theta_q
    # log(1/r) + r - 1 = (r - 1) - log1p(r - 1); keeps precision when r ~ 1
    return alpha * ((r - 1.0) - math.log1p(r - 1.0))
