"""Closed-form KL learning curves of maximum likelihood estimators, with numerical checks."""

from .curves import curve_derivative, curve_table, curve_value, risk, risk_threshold
from .divergences import GammaParams, GaussianParams, gamma_kl, gaussian_kl
from .errors import DimensionError, DomainError, SingularMatrixError, UnsupportedError
from .expfam import bregman_reverse_kl, exact_reverse_risk, family_for, leave_one_out_check
from .kernels import alternating_differences, kernel_value, laplace_reconstruct, trigamma_laplace
from .linalg import SpdMatrix
from .models import (
    Bernoulli,
    Binomial,
    Direction,
    GammaScale,
    GaussianFull,
    GaussianKnownMean,
    Poisson,
)
from .montecarlo import McEstimate, estimate_risk, paired_difference, wishart_moment_report
from .report import ReportRow, RunReport, emit
from .sampling import RngStream
from .specfun import digamma, digamma_minus_log, trigamma

__version__ = "0.1.0"
