"""Closed-form learning curves for the maximum likelihood estimators.

Raw curve functions (all defined for real ``x`` above a pole or log
singularity):

* ``f_d(x) = sum_j psi((x-j+1)/2) - d log(x/2) + x d / (x-d-1)``, forward KL,
  Gaussian with known mean; risk ``(f_d(n) - d) / 2``.
* ``g_d(x) = sum_j psi((x-j)/2) - d log(x/2) + (x+1) d / (x-d-2)``, forward
  KL, Gaussian with unknown mean; risk ``(g_d(n) - d) / 2``.
* ``h(t) = psi(t) - log t + 1/(t-1)``, forward KL for Gamma scale with
  ``t = n alpha``; risk ``alpha h(n alpha)``.
* ``r_d(x) = d log(x/2) - sum_j psi((x-j+1)/2)``, reverse KL, known mean;
  risk ``r_d(n) / 2``.
* ``q_d(x) = d log(x/2) - sum_j psi((x-j)/2)``, reverse KL, unknown mean;
  risk ``q_d(n) / 2``.

Every curve is evaluated through ``psi(a) - log(a)`` differences plus
``log1p`` corrections so that large-``n`` risks keep full relative accuracy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

from .errors import DomainError, UnsupportedError
from .models import (
    Bernoulli,
    Binomial,
    Direction,
    GammaScale,
    GaussianFull,
    GaussianKnownMean,
    ModelSpec,
    Poisson,
)
from .specfun import digamma_minus_log, trigamma

__all__ = [
    "ForwardCentered",
    "ForwardFull",
    "ForwardGamma",
    "ReverseCentered",
    "ReverseFull",
    "CurveKind",
    "CurvePoint",
    "curve_value",
    "curve_derivative",
    "curve_kind",
    "risk",
    "risk_threshold",
    "infinite_reason",
    "curve_table",
    "step_decreases",
    "BOUNDARY_ATOM",
    "BELOW_THRESHOLD",
]

BOUNDARY_ATOM = "boundary-atom"
BELOW_THRESHOLD = "divergent-expectation"


def _dim(d) -> int:
    if int(d) != d or d < 1:
        raise DomainError(f"dimension must be a positive integer, got {d!r}")
    return int(d)


@dataclass(frozen=True)
class ForwardCentered:
    d: int

    def __post_init__(self):
        object.__setattr__(self, "d", _dim(self.d))

    @property
    def threshold(self) -> float:
        return self.d + 1


@dataclass(frozen=True)
class ForwardFull:
    d: int

    def __post_init__(self):
        object.__setattr__(self, "d", _dim(self.d))

    @property
    def threshold(self) -> float:
        return self.d + 2


@dataclass(frozen=True)
class ForwardGamma:
    """Gamma-scale curve ``h``, parametrised by ``t = n alpha`` (pole at ``t = 1``)."""

    alpha: float

    def __post_init__(self):
        a = float(self.alpha)
        if not math.isfinite(a) or a <= 0:
            raise DomainError(f"alpha must be finite and > 0, got {self.alpha!r}")
        object.__setattr__(self, "alpha", a)

    @property
    def threshold(self) -> float:
        return 1.0


@dataclass(frozen=True)
class ReverseCentered:
    d: int

    def __post_init__(self):
        object.__setattr__(self, "d", _dim(self.d))

    @property
    def threshold(self) -> float:
        return self.d - 1


@dataclass(frozen=True)
class ReverseFull:
    d: int

    def __post_init__(self):
        object.__setattr__(self, "d", _dim(self.d))

    @property
    def threshold(self) -> float:
        return self.d


CurveKind = Union[ForwardCentered, ForwardFull, ForwardGamma, ReverseCentered, ReverseFull]


@dataclass(frozen=True)
class CurvePoint:
    n: int
    value: float
    finite: bool


def _psi_log_sum(x: float, d: int, offset: int) -> float:
    """sum_{j=1}^d psi((x-j+1-offset)/2) - d log(x/2), cancellation-free."""
    parts = []
    for j in range(1, d + 1):
        shift = j - 1 + offset
        parts.append(digamma_minus_log((x - shift) / 2.0))
        if shift:
            parts.append(math.log1p(-shift / x))
    return math.fsum(parts)


def _f_minus_d(x: float, d: int) -> float:
    return _psi_log_sum(x, d, 0) + d * (d + 1) / (x - d - 1)


def _g_minus_d(x: float, d: int) -> float:
    return _psi_log_sum(x, d, 1) + d * (d + 3) / (x - d - 2)


def _h(t: float) -> float:
    return digamma_minus_log(t) + 1.0 / (t - 1.0)


def _check_x(x) -> float:
    x = float(x)
    if not math.isfinite(x):
        raise DomainError(f"curve argument must be finite, got {x!r}")
    return x


def curve_value(kind: CurveKind, x: float) -> float:
    """Raw curve function ``f_d``, ``g_d``, ``h``, ``r_d`` or ``q_d`` at real ``x``.

    Returns ``math.inf`` at or below the kind's threshold.  For
    :class:`ForwardGamma` the argument is ``t = n * alpha``.
    """
    x = _check_x(x)
    if x <= kind.threshold:
        return math.inf
    if isinstance(kind, ForwardCentered):
        return _f_minus_d(x, kind.d) + kind.d
    if isinstance(kind, ForwardFull):
        return _g_minus_d(x, kind.d) + kind.d
    if isinstance(kind, ForwardGamma):
        return _h(x)
    if isinstance(kind, ReverseCentered):
        return -_psi_log_sum(x, kind.d, 0)
    if isinstance(kind, ReverseFull):
        return -_psi_log_sum(x, kind.d, 1)
    raise TypeError(f"unknown curve kind {kind!r}")


def curve_derivative(kind: CurveKind, x: float) -> float:
    """Analytic first derivative of :func:`curve_value` (assembled from trigamma)."""
    x = _check_x(x)
    if x <= kind.threshold:
        raise DomainError(f"x={x} is not above the threshold {kind.threshold}")
    if isinstance(kind, ForwardGamma):
        return trigamma(x) - 1.0 / x - 1.0 / (x - 1.0) ** 2
    d = kind.d
    offset = 1 if isinstance(kind, (ForwardFull, ReverseFull)) else 0
    half_tri = 0.5 * math.fsum(trigamma((x - j + 1 - offset) / 2.0) for j in range(1, d + 1))
    if isinstance(kind, ForwardCentered):
        return half_tri - d / x - d * (d + 1) / (x - d - 1) ** 2
    if isinstance(kind, ForwardFull):
        return half_tri - d / x - d * (d + 3) / (x - d - 2) ** 2
    return d / x - half_tri


def curve_kind(model: ModelSpec, direction: Direction) -> Optional[CurveKind]:
    """The raw curve behind ``risk(model, direction, .)``, if there is one."""
    direction = Direction(direction)
    if isinstance(model, GaussianKnownMean):
        cls = ForwardCentered if direction is Direction.FORWARD else ReverseCentered
        return cls(model.d)
    if isinstance(model, GaussianFull):
        cls = ForwardFull if direction is Direction.FORWARD else ReverseFull
        return cls(model.d)
    if isinstance(model, GammaScale) and direction is Direction.FORWARD:
        return ForwardGamma(model.alpha)
    return None


def risk_threshold(model: ModelSpec, direction: Direction) -> float:
    """Risk is finite exactly for sample sizes ``n`` strictly above this value."""
    direction = Direction(direction)
    if isinstance(model, GammaScale):
        return 1.0 / model.alpha if direction is Direction.FORWARD else 0.0
    kind = curve_kind(model, direction)
    if kind is not None:
        return kind.threshold
    if direction is Direction.FORWARD:
        return math.inf
    return 0.0


def infinite_reason(model: ModelSpec, direction: Direction, n: int) -> Optional[str]:
    """Why ``risk(model, direction, n)`` is infinite, or ``None`` if it is finite.

    ``"boundary-atom"``: discrete families put positive mass on MLEs at the
    boundary of the mean domain, where the forward divergence is infinite.
    ``"divergent-expectation"``: the sample size is at or below the
    finiteness threshold of the closed form.
    """
    direction = Direction(direction)
    if direction is Direction.FORWARD and isinstance(model, (Bernoulli, Binomial, Poisson)):
        return BOUNDARY_ATOM
    if isinstance(model, GammaScale) and direction is Direction.FORWARD:
        return None if n * model.alpha > 1.0 else BELOW_THRESHOLD
    return None if n > risk_threshold(model, direction) else BELOW_THRESHOLD


def _check_n(n) -> int:
    if int(n) != n or n < 1:
        raise DomainError(f"sample size must be a positive integer, got {n!r}")
    return int(n)


def risk(model: ModelSpec, direction: Direction, n: int) -> float:
    """Expected KL risk of the ``n``-sample MLE; ``math.inf`` where it diverges.

    The value never depends on the model's true parameters (means,
    covariances, scales): the formulas do not read them.
    Reverse risks for Bernoulli/Binomial/Poisson come from exact enumeration
    (see :func:`klcurves.expfam.exact_reverse_risk`).
    """
    direction = Direction(direction)
    n = _check_n(n)
    if infinite_reason(model, direction, n) is not None:
        return math.inf
    if isinstance(model, GaussianKnownMean):
        if direction is Direction.FORWARD:
            return 0.5 * _f_minus_d(n, model.d)
        return -0.5 * _psi_log_sum(n, model.d, 0)
    if isinstance(model, GaussianFull):
        if direction is Direction.FORWARD:
            return 0.5 * _g_minus_d(n, model.d)
        return -0.5 * _psi_log_sum(n, model.d, 1)
    if isinstance(model, GammaScale):
        t = n * model.alpha
        if direction is Direction.FORWARD:
            return model.alpha * _h(t)
        return -model.alpha * digamma_minus_log(t)
    if isinstance(model, (Bernoulli, Binomial, Poisson)):
        from .expfam import exact_reverse_risk

        return exact_reverse_risk(model, n)
    raise UnsupportedError(f"no closed-form risk for {model!r}")


def curve_table(model: ModelSpec, direction: Direction, n_min: int, n_max: int) -> list[CurvePoint]:
    """One :class:`CurvePoint` per ``n`` in ``n_min..n_max`` (inclusive), sorted by ``n``."""
    n_min, n_max = _check_n(n_min), _check_n(n_max)
    if n_min > n_max:
        raise DomainError(f"empty range {n_min}..{n_max}")
    points = []
    for n in range(n_min, n_max + 1):
        v = risk(model, direction, n)
        points.append(CurvePoint(n=n, value=v, finite=math.isfinite(v)))
    return points


def step_decreases(current: float, following: float) -> Optional[bool]:
    """Whether ``following < current``; ``None`` when either side is infinite.

    Monotonicity is only asserted where the later risk is finite, so steps
    out of the infinite region are reported as not comparable.
    """
    if not (math.isfinite(current) and math.isfinite(following)):
        return None
    return following < current
