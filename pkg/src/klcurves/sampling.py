"""Seeded random sampling and maximum likelihood estimates for the simulated models.

Randomness comes from :class:`RngStream`, a ``(seed, stream_id)`` pair that
maps to an independent Philox (counter-based) generator via
``numpy.random.SeedSequence(seed, spawn_key=(stream_id,))``.  Two streams
with the same pair always produce the same draws, whatever else has been
sampled in between.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .divergences import GaussianParams
from .errors import DomainError
from .linalg import SpdMatrix

__all__ = [
    "RngStream",
    "SampleBatch",
    "GaussianMle",
    "sample_gamma",
    "sample_chisquare",
    "sample_wishart_bartlett",
    "bartlett_factors",
    "sample_gaussian_batch",
    "gaussian_mles",
]

_U64 = 2**64


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            v = getattr(self, name)
            if int(v) != v or not 0 <= v < _U64:
                raise DomainError(f"{name} must be an integer in [0, 2^64), got {v!r}")
            object.__setattr__(self, name, int(v))

    def generator(self) -> np.random.Generator:
        """A fresh generator positioned at the start of this stream."""
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.Philox(ss))


def _pos(name, x) -> float:
    x = float(x)
    if not math.isfinite(x) or x <= 0:
        raise DomainError(f"{name} must be finite and > 0, got {x!r}")
    return x


def _count(count) -> int:
    if int(count) != count or count < 0:
        raise DomainError(f"count must be a non-negative integer, got {count!r}")
    return int(count)


def sample_gamma(alpha: float, theta: float, stream: RngStream, count: int) -> np.ndarray:
    """IID Gamma(alpha, theta) variates (shape/scale), deterministic per stream."""
    alpha, theta = _pos("alpha", alpha), _pos("theta", theta)
    return stream.generator().gamma(alpha, theta, size=_count(count))


def sample_chisquare(nu: float, stream: RngStream, count: int) -> np.ndarray:
    """Chi-square variates with ``nu`` degrees of freedom.

    Integer ``nu`` sums squares of standard normals; other ``nu`` go through
    Gamma(nu/2, 2).
    """
    nu = _pos("nu", nu)
    count = _count(count)
    if nu == int(nu):
        z = stream.generator().standard_normal((count, int(nu)))
        return np.sum(z * z, axis=1)
    return sample_gamma(nu / 2.0, 2.0, stream, count)


def bartlett_factors(d: int, n: int, gen: np.random.Generator, size: int) -> np.ndarray:
    """Lower-triangular Bartlett factors ``L`` with ``L L' ~ Wishart_d(n, I)``.

    Shape ``(size, d, d)``.  Diagonal entry ``j`` (1-based) is
    ``sqrt(chi2_{n-j+1})``; entries below the diagonal are standard normal.
    """
    if int(d) != d or d < 1:
        raise DomainError(f"d must be a positive integer, got {d!r}")
    if int(n) != n or n < d:
        raise DomainError(f"Bartlett sampling needs integer n >= d, got n={n!r}, d={d}")
    L = np.zeros((size, d, d))
    df = n - np.arange(d)
    L[:, np.arange(d), np.arange(d)] = np.sqrt(gen.chisquare(df, size=(size, d)))
    rows, cols = np.tril_indices(d, -1)
    L[:, rows, cols] = gen.standard_normal((size, rows.size))
    return L


def sample_wishart_bartlett(d: int, n: int, stream: RngStream) -> SpdMatrix:
    """One Wishart_d(n, I_d) matrix from the Bartlett construction.

    ``log det W`` is ``2 * sum(log(diag(L)))`` and can be read from the
    returned matrix's Cholesky factor, which equals ``L`` up to rounding.
    """
    L = bartlett_factors(d, n, stream.generator(), 1)[0]
    return SpdMatrix(L @ L.T)


@dataclass(frozen=True, eq=False)
class SampleBatch:
    """``n`` observations stored as an ``(n, d)`` array."""

    data: np.ndarray
    family: str = "gaussian"

    def __post_init__(self):
        data = np.array(self.data, dtype=float)
        if data.ndim == 1:
            data = data[:, None]
        if data.ndim != 2 or data.shape[0] < 1:
            raise DomainError("a batch needs at least one observation")
        if not np.all(np.isfinite(data)):
            raise DomainError("batch entries must be finite")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]


def sample_gaussian_batch(params: GaussianParams, n: int, stream: RngStream) -> SampleBatch:
    """``n`` IID draws from N(mean, cov), coloured through the Cholesky factor."""
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n!r}")
    L = params.covariance.cholesky
    z = stream.generator().standard_normal((int(n), params.dim))
    return SampleBatch(params.mean + z @ L.T)


@dataclass(frozen=True, eq=False)
class GaussianMle:
    cov_hat: SpdMatrix
    mean_hat: Optional[np.ndarray] = None

    @property
    def singular(self) -> bool:
        return self.cov_hat.singular


def gaussian_mles(batch: SampleBatch, mode: str = "known_mean") -> GaussianMle:
    """MLE of the covariance (and mean in ``"full"`` mode) from a sample batch.

    ``known_mean``: ``(1/n) sum x x'``.  ``full``: sample mean and
    ``(1/n) sum (x - xbar)(x - xbar)'``.  Rank deficiency shows up as the
    singular flag on ``cov_hat``; it is not an error.
    """
    x = batch.data
    if mode == "known_mean":
        return GaussianMle(SpdMatrix(x.T @ x / batch.n))
    if mode == "full":
        mean = x.mean(axis=0)
        c = x - mean
        return GaussianMle(SpdMatrix(c.T @ c / batch.n), mean)
    raise ValueError(f"mode must be 'known_mean' or 'full', got {mode!r}")
