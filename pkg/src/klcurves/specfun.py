"""Digamma and trigamma on the positive half-line.

Both functions shift the argument upward with the standard recurrences until
it exceeds ``_SHIFT`` and then apply the asymptotic (Stirling-type) expansion,
whose Bernoulli-number coefficients are tabulated below.  At ``z >= 8`` the
first omitted term is below 2e-15, so the result is accurate to a few ulps.
"""

from __future__ import annotations

import math

from .errors import DomainError

__all__ = ["digamma", "trigamma", "digamma_minus_log"]

_SHIFT = 8.0

# B_{2k} / (2k) for k = 1..7, multiplying z^{-2k} in psi(z) - log z + 1/(2z).
_PSI_COEFFS = (
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
)

# B_{2k} for k = 1..7, multiplying z^{-(2k+1)} in psi_1(z) - 1/z - 1/(2z^2).
_PSI1_COEFFS = (
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
)


def _check(z: float) -> float:
    z = float(z)
    if not math.isfinite(z) or z <= 0.0:
        raise DomainError(f"argument must be finite and > 0, got {z!r}")
    return z


def _psi_tail(z: float) -> float:
    """Asymptotic part of psi(z) - log(z) for large z (excludes the log)."""
    w = 1.0 / (z * z)
    acc = 0.0
    for c in reversed(_PSI_COEFFS):
        acc = acc * w + c
    return -0.5 / z - acc * w


def _shift_terms(z: float) -> tuple[float, float]:
    """Return (z + m, sum_{k<m} 1/(z+k)) with z + m >= _SHIFT."""
    parts = []
    while z < _SHIFT:
        parts.append(1.0 / z)
        z += 1.0
    return z, math.fsum(parts)


def digamma(z: float) -> float:
    """Digamma function psi(z) = d/dz log Gamma(z) for real z > 0.

    Raises:
        DomainError: if ``z`` is not a finite positive number.
    """
    z = _check(z)
    zs, recip = _shift_terms(z)
    return (math.log(zs) + _psi_tail(zs)) - recip


def digamma_minus_log(z: float) -> float:
    """Evaluate psi(z) - log(z) without the cancellation of the naive difference.

    For large ``z`` both terms are about ``log z`` while their difference is
    about ``-1/(2z)``; the learning curves are sums of such differences.
    """
    z = _check(z)
    zs, recip = _shift_terms(z)
    if zs == z:
        return _psi_tail(z)
    return _psi_tail(zs) + math.log(zs / z) - recip


def trigamma(z: float) -> float:
    """Trigamma function psi_1(z) = sum_{k>=0} 1/(z+k)^2 for real z > 0.

    Raises:
        DomainError: if ``z`` is not a finite positive number.
    """
    z = _check(z)
    parts = []
    while z < _SHIFT:
        parts.append(1.0 / (z * z))
        z += 1.0
    w = 1.0 / (z * z)
    acc = 0.0
    for c in reversed(_PSI1_COEFFS):
        acc = acc * w + c
    parts.append(1.0 / z + 0.5 * w + acc * w / z)
    return math.fsum(parts)
