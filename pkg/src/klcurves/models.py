"""Model specifications: an estimation problem together with its true parameters."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import DimensionError, DomainError
from .linalg import SpdMatrix

__all__ = [
    "Direction",
    "GaussianKnownMean",
    "GaussianFull",
    "GammaScale",
    "Bernoulli",
    "Binomial",
    "Poisson",
    "ModelSpec",
    "family_name",
    "describe",
]


class Direction(str, enum.Enum):
    """Orientation of the KL divergence between true and fitted model.

    ``FORWARD`` is KL(true || fitted), ``REVERSE`` is KL(fitted || true).
    """

    FORWARD = "forward"
    REVERSE = "reverse"


def _as_cov(d: int, cov) -> SpdMatrix:
    if cov is None:
        return SpdMatrix.identity(d)
    m = cov if isinstance(cov, SpdMatrix) else SpdMatrix(cov)
    if m.dim != d:
        raise DimensionError(f"covariance is {m.dim}x{m.dim}, expected {d}x{d}")
    if m.singular:
        raise DomainError("true covariance must be strictly positive definite")
    return m


def _check_dim(d) -> int:
    if int(d) != d or d < 1:
        raise DomainError(f"dimension must be a positive integer, got {d!r}")
    return int(d)


def _check_pos(name: str, x) -> float:
    x = float(x)
    if not math.isfinite(x) or x <= 0:
        raise DomainError(f"{name} must be finite and > 0, got {x!r}")
    return x


@dataclass(frozen=True, eq=False)
class GaussianKnownMean:
    """X ~ N(0, cov) in R^d; only the covariance is estimated."""

    d: int
    cov: SpdMatrix = None

    def __post_init__(self):
        object.__setattr__(self, "d", _check_dim(self.d))
        object.__setattr__(self, "cov", _as_cov(self.d, self.cov))


@dataclass(frozen=True, eq=False)
class GaussianFull:
    """X ~ N(mean, cov) in R^d with both parameters estimated."""

    d: int
    mean: np.ndarray = None
    cov: SpdMatrix = None

    def __post_init__(self):
        d = _check_dim(self.d)
        object.__setattr__(self, "d", d)
        mean = np.zeros(d) if self.mean is None else np.array(self.mean, dtype=float).reshape(-1)
        if mean.shape != (d,):
            raise DimensionError(f"mean has length {mean.size}, expected {d}")
        if not np.all(np.isfinite(mean)):
            raise DomainError("mean must be finite")
        mean.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", _as_cov(d, self.cov))


@dataclass(frozen=True)
class GammaScale:
    """X ~ Gamma(alpha, theta) with known shape ``alpha`` and unknown scale."""

    alpha: float
    theta: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "alpha", _check_pos("alpha", self.alpha))
        object.__setattr__(self, "theta", _check_pos("theta", self.theta))


@dataclass(frozen=True)
class Bernoulli:
    p: float

    def __post_init__(self):
        if not 0.0 < float(self.p) < 1.0:
            raise DomainError(f"p must lie in (0, 1), got {self.p!r}")
        object.__setattr__(self, "p", float(self.p))


@dataclass(frozen=True)
class Binomial:
    """Binomial(m, p) with known number of trials ``m``."""

    m: int
    p: float

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise DomainError(f"m must be a positive integer, got {self.m!r}")
        if not 0.0 < float(self.p) < 1.0:
            raise DomainError(f"p must lie in (0, 1), got {self.p!r}")
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "p", float(self.p))


@dataclass(frozen=True)
class Poisson:
    lam: float = field(default=1.0)

    def __post_init__(self):
        object.__setattr__(self, "lam", _check_pos("lam", self.lam))


ModelSpec = Union[GaussianKnownMean, GaussianFull, GammaScale, Bernoulli, Binomial, Poisson]

_NAMES = {
    GaussianKnownMean: "gaussian-known-mean",
    GaussianFull: "gaussian-full",
    GammaScale: "gamma",
    Bernoulli: "bernoulli",
    Binomial: "binomial",
    Poisson: "poisson",
}


def family_name(model: ModelSpec) -> str:
    return _NAMES[type(model)]


def describe(model: ModelSpec) -> str:
    """Short deterministic text description used in reports."""
    if isinstance(model, GaussianKnownMean):
        return f"gaussian-known-mean(d={model.d}, cov={model.cov.matrix.tolist()})"
    if isinstance(model, GaussianFull):
        return (
            f"gaussian-full(d={model.d}, mean={model.mean.tolist()}, "
            f"cov={model.cov.matrix.tolist()})"
        )
    if isinstance(model, GammaScale):
        return f"gamma(alpha={model.alpha!r}, theta={model.theta!r})"
    if isinstance(model, Bernoulli):
        return f"bernoulli(p={model.p!r})"
    if isinstance(model, Binomial):
        return f"binomial(m={model.m}, p={model.p!r})"
    if isinstance(model, Poisson):
        return f"poisson(lam={model.lam!r})"
    raise TypeError(f"not a model spec: {model!r}")
