"""Exactness and determinism of the process sampler."""

import numpy as np
import pytest

from oucv import (
    CovarianceParams,
    InvalidParameterError,
    LinearDependenceError,
    TrendSpec,
    covariance_matrix,
    polynomial_basis,
    precision_matrix,
    regular_design,
    sample_path,
    sample_with_trend,
)


class TestCovarianceParams:
    def test_rejects_nonpositive(self):
        with pytest.raises(InvalidParameterError):
            CovarianceParams(theta=0.0, sigma2=1.0)
        with pytest.raises(InvalidParameterError):
            CovarianceParams(theta=1.0, sigma2=-1.0)


class TestSamplePath:
    def test_deterministic_per_seed(self):
        d = regular_design(50)
        p = CovarianceParams(theta=3.0, sigma2=1.0)
        a = sample_path(d, p, 1234)
        b = sample_path(d, p, 1234)
        assert np.array_equal(a, b)
        c = sample_path(d, p, 1235)
        assert not np.array_equal(a, c)

    def test_degenerate_variance_limit(self):
        d = regular_design(20)
        y = sample_path(d, CovarianceParams(theta=3.0, sigma2=1e-300), 99)
        assert np.max(np.abs(y)) < 1e-140

    def test_marginal_moments_and_endpoint_correlation(self):
        # closed-form covariance sigma^2 e^{-theta |t1 - t2|}
        d = regular_design(200)
        p = CovarianceParams(theta=3.0, sigma2=1.0)
        reps = 10**4
        first = np.empty(reps)
        last = np.empty(reps)
        for r in range(reps):
            y = sample_path(d, p, (555, r))
            first[r] = y[0]
            last[r] = y[-1]
        assert 0.97 <= first.var(ddof=1) <= 1.03
        corr = np.corrcoef(first, last)[0, 1]
        assert abs(corr - np.exp(-3.0)) <= 0.03

    def test_pairwise_covariances_within_four_se(self):
        d = regular_design(30)
        p = CovarianceParams(theta=2.0, sigma2=1.5)
        reps = 10**4
        pairs = [(0, 29), (0, 15), (15, 16)]
        idx = sorted({i for pair in pairs for i in pair})
        col = {i: k for k, i in enumerate(idx)}
        ys = np.empty((reps, len(idx)))
        for r in range(reps):
            y = sample_path(d, p, (777, r))
            ys[r] = y[idx]
        for i, j in pairs:
            expected = p.sigma2 * np.exp(-p.theta * abs(d.points[i] - d.points[j]))
            sample_cov = np.cov(ys[:, col[i]], ys[:, col[j]])[0, 1]
            rho = expected / p.sigma2
            se = p.sigma2 * np.sqrt((1.0 + rho**2) / reps)
            assert abs(sample_cov - expected) <= 4.0 * se

    def test_conditional_variance_telescopes(self):
        # one-step variances compose exactly into the two-step variance
        e1, e2 = np.exp(-3.0 * 0.2), np.exp(-3.0 * 0.35)
        lhs = 1.0 - (e1 * e2) ** 2
        rhs = e2**2 * (1.0 - e1**2) + (1.0 - e2**2)
        assert lhs == pytest.approx(rhs, rel=4e-16)


class TestSampleWithTrend:
    def test_zero_trend_matches_centered_path(self):
        d = regular_design(40)
        p = CovarianceParams(theta=3.0, sigma2=1.0)
        trend = TrendSpec(beta=[0.0, 0.0], basis=polynomial_basis(1))
        assert np.array_equal(sample_with_trend(d, p, trend, 7), sample_path(d, p, 7))

    def test_constant_basis_shifts(self):
        d = regular_design(40)
        p = CovarianceParams(theta=3.0, sigma2=1.0)
        trend = TrendSpec(beta=[5.0], basis=polynomial_basis(0))
        z = sample_with_trend(d, p, trend, 11)
        y = sample_path(d, p, 11)
        assert np.allclose(z - y, 5.0, atol=1e-12)

    def test_rank_deficient_basis_rejected(self):
        d = regular_design(10)
        p = CovarianceParams(theta=3.0, sigma2=1.0)
        dependent = TrendSpec(
            beta=[1.0, 1.0],
            basis=(lambda t: np.ones_like(np.asarray(t)), lambda t: 2.0 * np.ones_like(np.asarray(t))),
        )
        with pytest.raises(LinearDependenceError):
            sample_with_trend(d, p, dependent, 3)


class TestCovarianceMatrix:
    def test_hand_values(self):
        d = regular_design(3)
        R = covariance_matrix(d, np.log(4.0))
        assert R[0, 1] == pytest.approx(0.5)
        assert R[1, 2] == pytest.approx(0.5)
        assert R[0, 2] == pytest.approx(0.25)
        assert np.all(np.diag(R) == 1.0)

    def test_symmetric_positive_definite(self, rng):
        from conftest import random_design

        for _ in range(5):
            d = random_design(rng, int(rng.integers(5, 60)))
            R = covariance_matrix(d, float(rng.uniform(0.1, 10)))
            assert np.array_equal(R, R.T)
            np.linalg.cholesky(R)  # raises if not SPD

    def test_precision_product_is_identity(self, rng):
        from conftest import random_design

        for _ in range(5):
            n = int(rng.integers(5, 200))
            d = random_design(rng, n)
            if d.gaps.min() < 1e-6:
                continue
            theta = float(rng.uniform(0.1, 10))
            R = covariance_matrix(d, theta)
            P = precision_matrix(d, theta).to_dense()
            assert np.max(np.abs(P @ R - np.eye(n))) <= 1e-8
