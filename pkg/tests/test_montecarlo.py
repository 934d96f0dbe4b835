import math

import numpy as np
import pytest

from klcurves.curves import BELOW_THRESHOLD, BOUNDARY_ATOM, risk
from klcurves.errors import DomainError
from klcurves.linalg import SpdMatrix
from klcurves.models import Bernoulli, Binomial, Direction, GammaScale, GaussianFull, GaussianKnownMean, Poisson
from klcurves.montecarlo import (
    BLOCK_SIZE,
    McEstimate,
    estimate_risk,
    paired_difference,
    wishart_moment_report,
)

FWD, REV = Direction.FORWARD, Direction.REVERSE
REPS = 20000


class TestEstimateRisk:
    @pytest.mark.parametrize(
        "model,direction,n",
        [
            (GaussianKnownMean(2), FWD, 6),
            (GaussianFull(1), FWD, 6),
            (GaussianKnownMean(1), REV, 2),
            (GaussianFull(2), REV, 4),
            (GammaScale(2.0, 3.0), FWD, 3),
            (GammaScale(0.5), REV, 2),
            (Bernoulli(0.3), REV, 5),
            (Binomial(4, 0.6), REV, 3),
            (Poisson(1.5), REV, 4),
        ],
    )
    def test_agrees_with_closed_form(self, model, direction, n):
        est = estimate_risk(model, direction, n, REPS, seed=2024)
        target = risk(model, direction, n)
        assert est.reliable
        assert abs(est.mean - target) <= 4 * est.stderr

    def test_random_true_covariance(self):
        rng = np.random.default_rng(8)
        a = rng.standard_normal((3, 3))
        model = GaussianKnownMean(3, SpdMatrix(a @ a.T + 0.05 * np.eye(3)))
        est = estimate_risk(model, FWD, 8, REPS, seed=5)
        assert abs(est.mean - risk(GaussianKnownMean(3), FWD, 8)) <= 4 * est.stderr

    def test_divergent_region_is_flagged(self):
        est = estimate_risk(GaussianKnownMean(2), FWD, 3, 1000, seed=1)
        assert est.divergent and est.reason == BELOW_THRESHOLD
        assert not est.agrees_with(1.0)
        assert est.agrees_with(math.inf)

    def test_gamma_boundary_cell_is_flagged(self):
        est = estimate_risk(GammaScale(0.5), FWD, 2, 1000, seed=1)
        assert est.divergent and not est.reliable

    def test_discrete_forward_not_simulated(self):
        est = estimate_risk(Poisson(2.0), FWD, 10, 1000)
        assert est.divergent and est.reason == BOUNDARY_ATOM
        assert est.replicates == 0 and est.mean == math.inf

    def test_rank_deficient_replicates_give_infinite_fraction(self):
        # n = d - 1 < d: every fitted covariance is singular
        est = estimate_risk(GaussianKnownMean(3), REV, 2, 500, seed=0)
        assert est.infinite_fraction == 1.0
        assert est.divergent

    def test_seed_determinism_and_sensitivity(self):
        a = estimate_risk(GammaScale(1.0), FWD, 5, 5000, seed=9)
        b = estimate_risk(GammaScale(1.0), FWD, 5, 5000, seed=9)
        c = estimate_risk(GammaScale(1.0), FWD, 5, 5000, seed=10)
        assert a == b
        assert a.mean != c.mean

    @pytest.mark.parametrize("workers", [2, 3, 8])
    def test_worker_count_does_not_matter(self, workers):
        reps = 3 * BLOCK_SIZE + 17
        one = estimate_risk(GaussianFull(2), FWD, 7, reps, seed=4, workers=1)
        many = estimate_risk(GaussianFull(2), FWD, 7, reps, seed=4, workers=workers)
        assert one == many

    def test_replicate_count_reported(self):
        est = estimate_risk(Bernoulli(0.5), REV, 3, 1234, seed=0)
        assert est.replicates == 1234 and est.seed == 0

    @pytest.mark.parametrize("reps", [0, 99, 10.5])
    def test_minimum_replicates(self, reps):
        with pytest.raises(DomainError):
            estimate_risk(GammaScale(1.0), FWD, 5, reps)

    def test_bad_n(self):
        with pytest.raises(DomainError):
            estimate_risk(GammaScale(1.0), FWD, 0, 1000)


class TestPairedDifference:
    @pytest.mark.parametrize(
        "model,direction,n",
        [(GaussianKnownMean(1), FWD, 4), (GaussianFull(2), FWD, 6), (GaussianFull(1), REV, 3), (Poisson(1.0), REV, 2)],
    )
    def test_agrees_with_closed_form_difference(self, model, direction, n):
        est = paired_difference(model, direction, n, REPS, seed=77)
        target = risk(model, direction, n) - risk(model, direction, n + 1)
        assert target > 0
        assert abs(est.mean - target) <= 4 * est.stderr

    def test_lower_variance_than_independent(self):
        model = GammaScale(1.0)
        paired = paired_difference(model, FWD, 6, REPS, seed=3)
        a = estimate_risk(model, FWD, 6, REPS, seed=3)
        b = estimate_risk(model, FWD, 7, REPS, seed=4)
        assert paired.stderr < math.hypot(a.stderr, b.stderr)

    def test_requires_finite_risk(self):
        with pytest.raises(DomainError):
            paired_difference(GaussianKnownMean(2), FWD, 3, 1000)


class TestWishart:
    @pytest.mark.parametrize("d,n", [(1, 4), (2, 5), (3, 7)])
    def test_moments(self, d, n):
        rep = wishart_moment_report(d, n, REPS, seed=1)
        for m in rep.moments:
            assert math.isfinite(m.target)
            assert abs(m.estimate.mean - m.target) <= 4 * m.estimate.stderr

    def test_divergent_inverse_moments(self):
        rep = wishart_moment_report(2, 3, 1000, seed=1)
        assert rep["E[tr W^-1]"].target == math.inf
        assert rep["E[tr W^-1]"].estimate.divergent
        assert rep["E[(W^-1)_11]"].estimate.divergent
        assert not rep["E[log det W]"].estimate.divergent
        assert rep.passed

    def test_domain(self):
        with pytest.raises(DomainError):
            wishart_moment_report(3, 2, 1000)


class TestAgreement:
    def test_agrees_with(self):
        e = McEstimate(mean=1.0, stderr=0.1, replicates=100, seed=0)
        assert e.agrees_with(1.29)
        assert not e.agrees_with(1.31)
        assert not e.agrees_with(math.inf)
