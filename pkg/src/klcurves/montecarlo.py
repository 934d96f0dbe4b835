"""Seeded Monte Carlo estimates of the expected risks and Wishart moments.

Replicates are grouped into fixed blocks of ``BLOCK_SIZE``.  Block ``b``
draws from ``RngStream(seed, b)`` and always generates a full block, so
replicate ``i`` depends only on ``(seed, i)``: the result is the same for
any number of workers and any execution order.  Per-replicate values are
concatenated in replicate order before reduction with ``math.fsum``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import xlogy

from .curves import BELOW_THRESHOLD, BOUNDARY_ATOM, infinite_reason
from .divergences import gaussian_kl_batch
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
from .sampling import RngStream, bartlett_factors
from .specfun import digamma

__all__ = [
    "McEstimate",
    "WishartMoment",
    "WishartReport",
    "estimate_risk",
    "paired_difference",
    "wishart_moment_report",
    "BLOCK_SIZE",
    "CI_MULTIPLIER",
    "DEFAULT_REPLICATES",
]

BLOCK_SIZE = 4096
CI_MULTIPLIER = 3.0
DEFAULT_REPLICATES = 100_000
MIN_REPLICATES = 100


@dataclass(frozen=True)
class McEstimate:
    """Monte Carlo mean with its standard error.

    ``mean`` and ``stderr`` are computed over finite replicates only.
    ``divergent`` is set when the exact expectation is known to be infinite,
    in which case ``mean`` must not be read as the risk; ``reason`` says why
    (``"divergent-expectation"`` or ``"boundary-atom"``).  A boundary-atom
    estimate is not simulated at all: ``replicates == 0``.
    """

    mean: float
    stderr: float
    replicates: int
    seed: int
    infinite_fraction: float = 0.0
    divergent: bool = False
    reason: Optional[str] = None

    @property
    def reliable(self) -> bool:
        return not self.divergent and self.infinite_fraction == 0.0

    def agrees_with(self, target: float, k: float = CI_MULTIPLIER) -> bool:
        """``|mean - target| <= k * stderr``, or both sides flagged infinite."""
        if math.isinf(target):
            return self.divergent
        if not self.reliable:
            return False
        return abs(self.mean - target) <= k * self.stderr


def _summarise(values: np.ndarray, seed: int, divergent: bool = False, reason=None) -> McEstimate:
    total = values.size
    finite = values[np.isfinite(values)]
    k = finite.size
    inf_frac = (total - k) / total if total else 0.0
    if k == 0:
        return McEstimate(math.inf, math.inf, total, seed, inf_frac, divergent, reason)
    mean = math.fsum(finite.tolist()) / k
    if k > 1:
        dev = finite - mean
        var = math.fsum((dev * dev).tolist()) / (k - 1)
        stderr = math.sqrt(var / k)
    else:
        stderr = math.inf
    return McEstimate(mean, stderr, total, seed, inf_frac, divergent, reason)


def _run_blocks(block_fn: Callable[[np.random.Generator], np.ndarray], replicates: int, seed: int, workers: int):
    """Evaluate ``block_fn`` on every block stream and join the outputs in order."""
    nblocks = -(-replicates // BLOCK_SIZE)

    def one(b):
        return block_fn(RngStream(seed, b).generator())

    if workers <= 1 or nblocks == 1:
        parts = [one(b) for b in range(nblocks)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(one, range(nblocks)))
    return np.concatenate(parts, axis=0)[:replicates]


# --- per-family sampling and scoring ----------------------------------------


def _draw(model: ModelSpec, n: int, gen: np.random.Generator, size: int) -> np.ndarray:
    if isinstance(model, (GaussianKnownMean, GaussianFull)):
        z = gen.standard_normal((size, n, model.d))
        x = z @ model.cov.cholesky.T
        if isinstance(model, GaussianFull):
            x += model.mean
        return x
    if isinstance(model, GammaScale):
        return gen.gamma(model.alpha, model.theta, size=(size, n))
    if isinstance(model, Bernoulli):
        return gen.binomial(1, model.p, size=(size, n)).astype(float)
    if isinstance(model, Binomial):
        return gen.binomial(model.m, model.p, size=(size, n)).astype(float)
    if isinstance(model, Poisson):
        return gen.poisson(model.lam, size=(size, n)).astype(float)
    raise UnsupportedError(f"cannot sample {model!r}")


def _bernoulli_kl(p_hat, p):
    return xlogy(p_hat, p_hat / p) + xlogy(1.0 - p_hat, (1.0 - p_hat) / (1.0 - p))


def _score(model: ModelSpec, direction: Direction, x: np.ndarray) -> np.ndarray:
    """Exact KL between true and fitted model for each replicate's sample ``x``."""
    n = x.shape[1]
    forward = direction is Direction.FORWARD
    if isinstance(model, (GaussianKnownMean, GaussianFull)):
        # fewer than d (known mean) or d+1 (full) points: the fitted covariance
        # is singular by construction; do not leave that to pivot rounding noise
        rank_max = n if isinstance(model, GaussianKnownMean) else n - 1
        if rank_max < model.d:
            return np.full(x.shape[0], np.inf)
    if isinstance(model, GaussianKnownMean):
        cov_hat = np.einsum("bni,bnj->bij", x, x) / n
        zero = np.zeros(model.d)
        if forward:
            return gaussian_kl_batch(zero, model.cov.matrix, zero, cov_hat)
        return gaussian_kl_batch(zero, cov_hat, zero, model.cov.matrix)
    if isinstance(model, GaussianFull):
        mean_hat = x.mean(axis=1)
        c = x - mean_hat[:, None, :]
        cov_hat = np.einsum("bni,bnj->bij", c, c) / n
        if forward:
            return gaussian_kl_batch(model.mean, model.cov.matrix, mean_hat, cov_hat)
        return gaussian_kl_batch(mean_hat, cov_hat, model.mean, model.cov.matrix)
    if isinstance(model, GammaScale):
        theta_hat = x.mean(axis=1) / model.alpha
        # KL(Gamma(a, tp) || Gamma(a, tq)) = a ((r - 1) - log r), r = tp / tq
        r = model.theta / theta_hat if forward else theta_hat / model.theta
        return model.alpha * ((r - 1.0) - np.log(r))
    if forward:
        raise UnsupportedError("forward risk of a discrete family is infinite (boundary atom)")
    if isinstance(model, Bernoulli):
        return _bernoulli_kl(x.mean(axis=1), model.p)
    if isinstance(model, Binomial):
        return model.m * _bernoulli_kl(x.mean(axis=1) / model.m, model.p)
    if isinstance(model, Poisson):
        lam_hat = x.mean(axis=1)
        return xlogy(lam_hat, lam_hat / model.lam) - lam_hat + model.lam
    raise UnsupportedError(f"cannot score {model!r}")


def _check_args(n, replicates):
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n!r}")
    if int(replicates) != replicates or replicates < MIN_REPLICATES:
        raise DomainError(f"replicates must be an integer >= {MIN_REPLICATES}, got {replicates!r}")
    return int(n), int(replicates)


def estimate_risk(
    model: ModelSpec,
    direction: Direction,
    n: int,
    replicates: int = DEFAULT_REPLICATES,
    seed: int = 42,
    workers: int = 1,
) -> McEstimate:
    """Monte Carlo estimate of the expected KL risk of the ``n``-sample MLE.

    Each replicate draws ``n`` fresh observations, fits the MLE and
    evaluates the exact divergence.  Where the closed form is infinite the
    result carries ``divergent=True``; forward risks of discrete families
    are not simulated.
    """
    direction = Direction(direction)
    n, replicates = _check_args(n, replicates)
    reason = infinite_reason(model, direction, n)
    if reason == BOUNDARY_ATOM:
        return McEstimate(math.inf, math.inf, 0, seed, 0.0, True, BOUNDARY_ATOM)

    def block(gen):
        return _score(model, direction, _draw(model, n, gen, BLOCK_SIZE))

    values = _run_blocks(block, replicates, seed, workers)
    return _summarise(values, seed, divergent=reason is not None, reason=reason)


def paired_difference(
    model: ModelSpec,
    direction: Direction,
    n: int,
    replicates: int = DEFAULT_REPLICATES,
    seed: int = 42,
    workers: int = 1,
) -> McEstimate:
    """Estimate ``E_n - E_{n+1}`` with nested samples.

    Each replicate draws ``n + 1`` observations once and scores the MLE fitted
    on the first ``n`` against the MLE fitted on all ``n + 1``.  The two terms
    are positively correlated, so the difference has far lower variance than
    two independent estimates.
    """
    direction = Direction(direction)
    n, replicates = _check_args(n, replicates)
    reason = infinite_reason(model, direction, n)
    if reason is not None:
        raise DomainError(f"risk at n={n} is infinite ({reason}); paired difference undefined")

    def block(gen):
        x = _draw(model, n + 1, gen, BLOCK_SIZE)
        return _score(model, direction, x[:, :n]) - _score(model, direction, x)

    values = _run_blocks(block, replicates, seed, workers)
    return _summarise(values, seed)


@dataclass(frozen=True)
class WishartMoment:
    name: str
    estimate: McEstimate
    target: float

    @property
    def passed(self) -> bool:
        return self.estimate.agrees_with(self.target)


@dataclass(frozen=True)
class WishartReport:
    d: int
    n: int
    moments: tuple

    @property
    def passed(self) -> bool:
        return all(m.passed for m in self.moments)

    def __getitem__(self, name: str) -> WishartMoment:
        for m in self.moments:
            if m.name == name:
                return m
        raise KeyError(name)


def wishart_moment_report(
    d: int, n: int, replicates: int = DEFAULT_REPLICATES, seed: int = 42, workers: int = 1
) -> WishartReport:
    """Estimate ``E[log det W]``, ``E[tr W^-1]`` and ``E[(W^-1)_11]`` for ``W ~ Wishart_d(n, I)``.

    Targets: ``d log 2 + sum_j psi((n-j+1)/2)``, ``d/(n-d-1)`` and
    ``1/(n-d-1)``; the two inverse moments are ``+inf`` when ``n <= d+1`` and
    their estimates are then flagged divergent.
    """
    if int(d) != d or d < 1:
        raise DomainError(f"d must be a positive integer, got {d!r}")
    if int(n) != n or n < d:
        raise DomainError(f"need integer n >= d, got n={n!r}, d={d}")
    d, n = int(d), int(n)
    _, replicates = _check_args(n, replicates)

    def block(gen):
        L = bartlett_factors(d, n, gen, BLOCK_SIZE)
        logdet = 2.0 * np.sum(np.log(np.diagonal(L, axis1=1, axis2=2)), axis=1)
        Linv = np.linalg.inv(L)
        trinv = np.sum(Linv * Linv, axis=(1, 2))
        inv11 = np.sum(Linv[:, :, 0] ** 2, axis=1)
        return np.stack([logdet, trinv, inv11], axis=1)

    values = _run_blocks(block, replicates, seed, workers)
    logdet_target = d * math.log(2.0) + math.fsum(digamma((n - j + 1) / 2.0) for j in range(1, d + 1))
    finite_inv = n > d + 1
    trinv_target = d / (n - d - 1) if finite_inv else math.inf
    inv11_target = 1.0 / (n - d - 1) if finite_inv else math.inf
    flag = None if finite_inv else BELOW_THRESHOLD
    moments = (
        WishartMoment("E[log det W]", _summarise(values[:, 0], seed), logdet_target),
        WishartMoment("E[tr W^-1]", _summarise(values[:, 1], seed, not finite_inv, flag), trinv_target),
        WishartMoment("E[(W^-1)_11]", _summarise(values[:, 2], seed, not finite_inv, flag), inv11_target),
    )
    return WishartReport(d, n, moments)

