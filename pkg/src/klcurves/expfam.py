"""Regular exponential families in mean coordinates.

Every parameter (natural or mean) is a flat float vector of length
``family.dim``; matrix-valued parameters of the Gaussian families are stored
row-major (the full Gaussian stacks the mean vector in front of the second
moment ``E[x x']``).  The base measure never enters: it cancels in every
divergence computed here.

The reverse divergence KL(p_theta || p_theta*) is evaluated as the Bregman
divergence of the convex dual ``A*`` between ``mu = grad A(theta)`` and
``mu* = grad A(theta*)``.  At boundary means of the discrete families (an
MLE of 0 or 1 for a Bernoulli, say) ``A*`` is extended continuously with
``0 log 0 = 0``, so the divergence is finite there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from .errors import DomainError, UnsupportedError
from .linalg import batch_cholesky
from .models import Bernoulli, Binomial, GammaScale, GaussianFull, GaussianKnownMean, ModelSpec, Poisson

__all__ = [
    "ExpFamilyDescriptor",
    "MeanParam",
    "LeaveOneOut",
    "bernoulli_family",
    "binomial_family",
    "poisson_family",
    "gaussian_centered_family",
    "gaussian_full_family",
    "gamma_scale_family",
    "family_for",
    "natural_parameter",
    "sufficient_statistics",
    "mle_mean",
    "bregman_reverse_kl",
    "exact_reverse_risk",
    "leave_one_out_check",
]

Vector = np.ndarray


@dataclass(frozen=True)
class ExpFamilyDescriptor:
    """Callable bundle describing a regular exponential family.

    ``dual`` returns ``+inf`` on the boundary of the mean domain where the
    conjugate is infinite (singular covariances) and raises
    :class:`DomainError` outside the closure.
    """

    name: str
    dim: int
    sufficient_statistic: Callable[[object], Vector]
    log_partition: Callable[[Vector], float]
    mean_map: Callable[[Vector], Vector]
    dual: Callable[[Vector], float]
    dual_grad: Callable[[Vector], Vector]
    mean_domain: Callable[[Vector], bool]
    mean_closure: Callable[[Vector], bool]


@dataclass(frozen=True, eq=False)
class MeanParam:
    value: Vector
    boundary: bool = False


@dataclass(frozen=True)
class LeaveOneOut:
    lhs: float
    rhs: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs + 1e-12


def _vec(x) -> Vector:
    return np.atleast_1d(np.asarray(x, dtype=float)).reshape(-1)


def _xlogx(x: float) -> float:
    return 0.0 if x == 0.0 else x * math.log(x)


# --- one-parameter families -------------------------------------------------


def _scalar_family(name, stat, A, dA, Astar, dAstar, interior, closure) -> ExpFamilyDescriptor:
    return ExpFamilyDescriptor(
        name=name,
        dim=1,
        sufficient_statistic=lambda x: _vec(stat(float(np.asarray(x).reshape(-1)[0]))),
        log_partition=lambda th: float(A(float(_vec(th)[0]))),
        mean_map=lambda th: _vec(dA(float(_vec(th)[0]))),
        dual=lambda mu: float(Astar(_closure_check(name, closure, float(_vec(mu)[0])))),
        dual_grad=lambda mu: _vec(dAstar(float(_vec(mu)[0]))),
        mean_domain=lambda mu: bool(interior(float(_vec(mu)[0]))),
        mean_closure=lambda mu: bool(closure(float(_vec(mu)[0]))),
    )


def _closure_check(name, closure, mu: float) -> float:
    if not closure(mu):
        raise DomainError(f"mean parameter {mu!r} lies outside the closure of the {name} mean domain")
    return mu


def _sigmoid(eta: float) -> float:
    if eta >= 0:
        return 1.0 / (1.0 + math.exp(-eta))
    e = math.exp(eta)
    return e / (1.0 + e)


def bernoulli_family() -> ExpFamilyDescriptor:
    return _scalar_family(
        "bernoulli",
        stat=lambda x: x,
        A=lambda eta: float(np.logaddexp(0.0, eta)),
        dA=_sigmoid,
        Astar=lambda mu: _xlogx(mu) + _xlogx(1.0 - mu),
        dAstar=lambda mu: math.log(mu) - math.log1p(-mu),
        interior=lambda mu: 0.0 < mu < 1.0,
        closure=lambda mu: 0.0 <= mu <= 1.0,
    )


def binomial_family(m: int) -> ExpFamilyDescriptor:
    """Binomial with ``m`` known trials (the binomial coefficient lives in the base measure)."""
    if int(m) != m or m < 1:
        raise DomainError(f"m must be a positive integer, got {m!r}")
    m = int(m)
    return _scalar_family(
        f"binomial(m={m})",
        stat=lambda x: x,
        A=lambda eta: m * float(np.logaddexp(0.0, eta)),
        dA=lambda eta: m * _sigmoid(eta),
        Astar=lambda mu: m * (_xlogx(mu / m) + _xlogx(1.0 - mu / m)),
        dAstar=lambda mu: math.log(mu) - math.log(m - mu),
        interior=lambda mu: 0.0 < mu < m,
        closure=lambda mu: 0.0 <= mu <= m,
    )


def poisson_family() -> ExpFamilyDescriptor:
    return _scalar_family(
        "poisson",
        stat=lambda x: x,
        A=math.exp,
        dA=math.exp,
        Astar=lambda mu: _xlogx(mu) - mu,
        dAstar=math.log,
        interior=lambda mu: 0.0 < mu < math.inf,
        closure=lambda mu: 0.0 <= mu < math.inf,
    )


def gamma_scale_family(alpha: float) -> ExpFamilyDescriptor:
    """Gamma with known shape; ``T(x) = x``, natural parameter ``-1/theta``."""
    alpha = float(alpha)
    if not math.isfinite(alpha) or alpha <= 0:
        raise DomainError(f"alpha must be finite and > 0, got {alpha!r}")
    return _scalar_family(
        f"gamma(alpha={alpha!r})",
        stat=lambda x: x,
        A=lambda eta: -alpha * math.log(-eta),
        dA=lambda eta: -alpha / eta,
        Astar=lambda mu: math.inf if mu == 0.0 else alpha * (math.log(alpha / mu) - 1.0),
        dAstar=lambda mu: -alpha / mu,
        interior=lambda mu: 0.0 < mu < math.inf,
        closure=lambda mu: 0.0 <= mu < math.inf,
    )


# --- Gaussian families ------------------------------------------------------


def _psd_logdet(S: np.ndarray) -> float:
    """log det of a symmetric PSD matrix, ``-inf`` when singular."""
    L, singular = batch_cholesky(S)
    if singular:
        return -math.inf
    return 2.0 * float(np.sum(np.log(np.diag(L))))


def _check_psd(S: np.ndarray, what: str) -> None:
    scale = max(1.0, float(np.max(np.abs(S))))
    if np.max(np.abs(S - S.T)) > 1e-10 * scale:
        raise DomainError(f"{what} is not symmetric")
    if np.min(np.linalg.eigvalsh(S)) < -1e-10 * scale:
        raise DomainError(f"{what} is not positive semidefinite")


def gaussian_centered_family(d: int) -> ExpFamilyDescriptor:
    """N(0, Sigma) with ``T(x) = x x'``; mean parameter ``Sigma``, natural ``-Sigma^-1 / 2``."""
    d = int(d)

    def mat(v):
        return _vec(v).reshape(d, d)

    def stat(x):
        x = _vec(x)
        return np.outer(x, x).reshape(-1)

    def A(th):
        P = -2.0 * mat(th)
        return -0.5 * float(np.linalg.slogdet(P)[1])

    def dA(th):
        return np.linalg.inv(-2.0 * mat(th)).reshape(-1)

    def Astar(mu):
        S = mat(mu)
        _check_psd(S, "second-moment matrix")
        return -0.5 * d - 0.5 * _psd_logdet(S)

    def dAstar(mu):
        return (-0.5 * np.linalg.inv(mat(mu))).reshape(-1)

    def closure(mu):
        try:
            _check_psd(mat(mu), "matrix")
        except DomainError:
            return False
        return True

    def interior(mu):
        return closure(mu) and not bool(batch_cholesky(mat(mu))[1])

    return ExpFamilyDescriptor(f"gaussian-centered(d={d})", d * d, stat, A, dA, Astar, dAstar, interior, closure)


def gaussian_full_family(d: int) -> ExpFamilyDescriptor:
    """N(m, Sigma) with ``T(x) = (x, x x')``; mean parameter ``(m, Sigma + m m')``.

    The conjugate is evaluated from the covariance ``M2 - m m'`` only, so no
    natural-parameter matrices are inverted on the mean side.
    """
    d = int(d)

    def split(v):
        v = _vec(v)
        return v[:d], v[d:].reshape(d, d)

    def stat(x):
        x = _vec(x)
        return np.concatenate([x, np.outer(x, x).reshape(-1)])

    def A(th):
        eta, Lam = split(th)
        return -0.25 * float(eta @ np.linalg.solve(Lam, eta)) - 0.5 * float(np.linalg.slogdet(-2.0 * Lam)[1])

    def dA(th):
        eta, Lam = split(th)
        S = np.linalg.inv(-2.0 * Lam)
        m = S @ eta
        return np.concatenate([m, (S + np.outer(m, m)).reshape(-1)])

    def cov_of(mu):
        m, M2 = split(mu)
        return M2 - np.outer(m, m), m

    def Astar(mu):
        S, _ = cov_of(mu)
        _check_psd(S, "covariance")
        return -0.5 * d - 0.5 * _psd_logdet(S)

    def dAstar(mu):
        S, m = cov_of(mu)
        P = np.linalg.inv(S)
        return np.concatenate([P @ m, (-0.5 * P).reshape(-1)])

    def closure(mu):
        try:
            _check_psd(cov_of(mu)[0], "covariance")
        except DomainError:
            return False
        return True

    def interior(mu):
        return closure(mu) and not bool(batch_cholesky(cov_of(mu)[0])[1])

    return ExpFamilyDescriptor(f"gaussian-full(d={d})", d + d * d, stat, A, dA, Astar, dAstar, interior, closure)


# --- model glue -------------------------------------------------------------


def family_for(model: ModelSpec) -> ExpFamilyDescriptor:
    if isinstance(model, Bernoulli):
        return bernoulli_family()
    if isinstance(model, Binomial):
        return binomial_family(model.m)
    if isinstance(model, Poisson):
        return poisson_family()
    if isinstance(model, GammaScale):
        return gamma_scale_family(model.alpha)
    if isinstance(model, GaussianKnownMean):
        return gaussian_centered_family(model.d)
    if isinstance(model, GaussianFull):
        return gaussian_full_family(model.d)
    raise UnsupportedError(f"no exponential family for {model!r}")


def natural_parameter(model: ModelSpec) -> Vector:
    """Natural parameter theta* of the model's true distribution."""
    if isinstance(model, Bernoulli):
        return _vec(math.log(model.p) - math.log1p(-model.p))
    if isinstance(model, Binomial):
        return _vec(math.log(model.p) - math.log1p(-model.p))
    if isinstance(model, Poisson):
        return _vec(math.log(model.lam))
    if isinstance(model, GammaScale):
        return _vec(-1.0 / model.theta)
    if isinstance(model, GaussianKnownMean):
        return (-0.5 * model.cov.inverse()).reshape(-1)
    if isinstance(model, GaussianFull):
        P = model.cov.inverse()
        return np.concatenate([P @ model.mean, (-0.5 * P).reshape(-1)])
    raise UnsupportedError(f"no natural parameter for {model!r}")


def sufficient_statistics(family: ExpFamilyDescriptor, samples: Sequence) -> np.ndarray:
    """Stack ``T(x_i)`` into an ``(n, dim)`` array."""
    return np.array([family.sufficient_statistic(x) for x in samples], dtype=float).reshape(-1, family.dim)


def _mean_param(family: ExpFamilyDescriptor, value: Vector) -> MeanParam:
    value = _vec(value)
    value.setflags(write=False)
    return MeanParam(value, boundary=not family.mean_domain(value))


def mle_mean(family: ExpFamilyDescriptor, samples: Sequence) -> MeanParam:
    """Mean-parameter MLE ``T_bar = (1/n) sum T(x_i)``.

    The boundary flag is set when ``T_bar`` falls outside the open mean
    domain (e.g. an all-zero Bernoulli sample, or a rank-deficient scatter).
    """
    if len(samples) == 0:
        raise DomainError("mle_mean needs at least one sample")
    stats = sufficient_statistics(family, samples)
    return _mean_param(family, stats.mean(axis=0))


def bregman_reverse_kl(
    family: ExpFamilyDescriptor, mu: Union[MeanParam, Vector], theta_star: Vector
) -> float:
    """KL(p_{theta(mu)} || p_{theta*}) as the Bregman divergence of ``A*``.

    ``A*(mu) - A*(mu*) - <grad A*(mu*), mu - mu*>`` with ``mu* = grad A(theta*)``
    and ``grad A*(mu*) = theta*``.  Infinite when ``A*(mu)`` is (singular
    Gaussian covariance); finite at discrete boundary means.

    Raises:
        DomainError: if ``mu`` lies outside the closure of the mean domain.
    """
    value = mu.value if isinstance(mu, MeanParam) else _vec(mu)
    theta_star = _vec(theta_star)
    if not family.mean_closure(value):
        raise DomainError(f"mean parameter outside the closure of the {family.name} mean domain")
    mu_star = family.mean_map(theta_star)
    a = family.dual(value)
    if a == math.inf:
        return math.inf
    b = family.dual(mu_star)
    out = a - b - float(np.dot(theta_star, value - mu_star))
    return max(out, 0.0)


# --- exact enumeration ------------------------------------------------------

_POISSON_TAIL_TOL = 1e-12


def _binomial_log_pmf(k: int, N: int, p: float) -> float:
    return (
        math.lgamma(N + 1) - math.lgamma(k + 1) - math.lgamma(N - k + 1)
        + k * math.log(p) + (N - k) * math.log1p(-p)
    )


def _poisson_log_pmf(k: int, rate: float) -> float:
    return -rate + k * math.log(rate) - math.lgamma(k + 1)


def exact_reverse_risk(model: Union[Bernoulli, Binomial, Poisson], n: int) -> float:
    """E[KL(p_hat_n || p*)] by enumerating the law of the sufficient statistic.

    Bernoulli/Binomial: ``S = sum X_i`` is binomial, the sum is finite.
    Poisson: ``S ~ Poisson(n lam)`` is summed until a certified geometric
    bound on the remaining tail drops below 1e-12 (the integrand is at most
    ``(k/n - lam)^2 / lam``, and past ``2 n lam`` consecutive tail terms
    shrink by a fixed ratio below one).
    """
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n!r}")
    n = int(n)
    family = family_for(model)
    theta = natural_parameter(model)
    terms = []
    if isinstance(model, (Bernoulli, Binomial)):
        m = 1 if isinstance(model, Bernoulli) else model.m
        N = n * m
        for k in range(N + 1):
            w = math.exp(_binomial_log_pmf(k, N, model.p))
            terms.append(w * bregman_reverse_kl(family, k / n, theta))
        return math.fsum(terms)
    if isinstance(model, Poisson):
        lam = model.lam
        rate = n * lam
        k = 0
        while True:
            w = math.exp(_poisson_log_pmf(k, rate))
            terms.append(w * bregman_reverse_kl(family, k / n, theta))
            k += 1
            if k > 2.0 * rate + 1.0:
                # tail bound for sum_{j>=k} P(j) (j/n - lam)^2 / lam
                g = (k / n - lam) ** 2 / lam
                first = math.exp(_poisson_log_pmf(k, rate)) * g
                growth = (1.0 + 1.0 / (k - rate)) ** 2
                ratio = rate / (k + 1) * growth
                if ratio < 1.0 and first / (1.0 - ratio) < _POISSON_TAIL_TOL:
                    break
        return math.fsum(terms)
    raise UnsupportedError(f"exact enumeration is implemented for Bernoulli/Binomial/Poisson, not {model!r}")


def leave_one_out_check(family: ExpFamilyDescriptor, samples: Sequence, theta_star: Vector) -> LeaveOneOut:
    """Compare the divergence at the full mean with the average over leave-one-out means.

    With ``n + 1`` samples, ``lhs = phi(T_bar_{n+1})`` and
    ``rhs = mean_i phi(T_bar_n^{(-i)})`` where ``phi`` is the Bregman reverse
    KL to ``theta_star``.  Convexity of ``phi`` forces ``lhs <= rhs``.
    """
    stats = sufficient_statistics(family, samples)
    if stats.shape[0] < 2:
        raise DomainError("leave-one-out needs at least two samples")
    total = stats.sum(axis=0)
    n = stats.shape[0] - 1
    lhs = bregman_reverse_kl(family, total / (n + 1), theta_star)
    parts = [bregman_reverse_kl(family, (total - s) / n, theta_star) for s in stats]
    rhs = math.inf if any(math.isinf(p) for p in parts) else math.fsum(parts) / (n + 1)
    return LeaveOneOut(lhs=lhs, rhs=rhs)
