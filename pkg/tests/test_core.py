"""Core types and portfolio arithmetic."""

import numpy as np
import pytest

from qdfolio import AssetUniverse, Estimates, Portfolio, RiskReturnPoint, risk_return, sharpe
from tests.conftest import TOY_CORR, TOY_MEANS_PCT, TOY_STDS_PCT, TOY_W0


def oracle_mu(w, means_pct):
    """Independent expected-return oracle: explicit scalar accumulation."""
    total = 0.0
    for wi, mi in zip(w, means_pct):
        total += wi * (mi / 100.0)
    return total


def oracle_sigma(w, stds_pct, corr):
    """Independent volatility oracle: fully expanded quadratic form."""
    n = len(w)
    var = 0.0
    for i in range(n):
        for j in range(n):
            var += w[i] * w[j] * corr[i][j] * (stds_pct[i] / 100.0) * (stds_pct[j] / 100.0)
    return var**0.5


class TestPortfolio:
    def test_valid(self):
        p = Portfolio(weights=np.array([0.5, 0.3, 0.2]))
        assert np.allclose(p.weights.sum(), 1.0)
        assert len(p) == 3

    def test_renormalizes_small_drift(self):
        p = Portfolio(weights=np.array([0.5, 0.5 + 5e-7]))
        assert p.weights.sum() == pytest.approx(1.0, abs=1e-15)

    def test_rejects_large_drift(self):
        with pytest.raises(ValueError):
            Portfolio(weights=np.array([0.5, 0.6]))

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            Portfolio(weights=np.array([1.1, -0.1]))

    def test_clips_float_noise(self):
        p = Portfolio(weights=np.array([1.0 + 1e-10, -1e-10]))
        assert p.weights[1] == 0.0

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            Portfolio(weights=np.array([np.nan, 1.0]))

    def test_equality_and_hash(self):
        a = Portfolio(weights=np.array([0.5, 0.5]))
        b = Portfolio(weights=np.array([0.5, 0.5]))
        assert a == b and hash(a) == hash(b)

    def test_immutable(self):
        p = Portfolio(weights=np.array([0.5, 0.5]))
        with pytest.raises(ValueError):
            p.weights[0] = 0.9


class TestAssetUniverse:
    def test_valid(self):
        u = AssetUniverse(names=["A", "B"], sector_of=[0, 1], market_cap=[1.0, 2.0], n_sectors=2)
        assert u.n_assets == 2

    def test_rejects_bad_sector(self):
        with pytest.raises(ValueError):
            AssetUniverse(names=["A", "B"], sector_of=[0, 2], market_cap=[1.0, 2.0], n_sectors=2)

    def test_rejects_nonpositive_cap(self):
        with pytest.raises(ValueError):
            AssetUniverse(names=["A", "B"], sector_of=[0, 1], market_cap=[1.0, 0.0], n_sectors=2)

    def test_rejects_length_mismatch(self):
        with pytest.raises(ValueError):
            AssetUniverse(names=["A", "B"], sector_of=[0], market_cap=[1.0, 2.0], n_sectors=1)


class TestEstimates:
    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError):
            Estimates(mu=np.zeros(2), sigma=np.array([[1.0, 0.5], [0.2, 1.0]]))

    def test_rejects_non_psd(self):
        with pytest.raises(ValueError):
            Estimates(mu=np.zeros(2), sigma=np.array([[1.0, 2.0], [2.0, 1.0]]))

    def test_rejects_shape_mismatch(self):
        with pytest.raises(ValueError):
            Estimates(mu=np.zeros(3), sigma=np.eye(2))


class TestRiskReturn:
    def test_reference_weights_match_oracle(self, toy_est, toy_w0):
        rr = risk_return(toy_w0, toy_est)
        assert rr.mu == pytest.approx(oracle_mu(TOY_W0, TOY_MEANS_PCT), abs=1e-12)
        assert rr.sigma == pytest.approx(oracle_sigma(TOY_W0, TOY_STDS_PCT, TOY_CORR), abs=1e-12)
        # Rounded display values of the example: mu 0.137, sigma 0.1111.
        assert rr.mu == pytest.approx(0.137048, abs=2e-6)
        assert rr.sigma == pytest.approx(0.1111, abs=2e-4)

    def test_all_stocks_vertex(self, toy_est):
        rr = risk_return(Portfolio(weights=np.array([1.0, 0.0, 0.0])), toy_est)
        assert rr.mu == pytest.approx(0.15876, abs=1e-12)
        assert rr.sigma == pytest.approx(0.16603, abs=1e-12)

    def test_dimension_mismatch(self, toy_est):
        with pytest.raises(ValueError):
            risk_return(Portfolio(weights=np.array([0.5, 0.5])), toy_est)

    def test_permutation_invariance(self, toy_est):
        rng = np.random.default_rng(7)
        for _ in range(20):
            perm = rng.permutation(3)
            w = rng.dirichlet(np.ones(3))
            est_p = Estimates(mu=toy_est.mu[perm], sigma=toy_est.sigma[np.ix_(perm, perm)])
            a = risk_return(Portfolio(weights=w), toy_est)
            b = risk_return(Portfolio(weights=w[perm]), est_p)
            assert a.mu == pytest.approx(b.mu, abs=1e-14)
            assert a.sigma == pytest.approx(b.sigma, abs=1e-14)

    def test_sigma_within_simplex_range(self, toy_est):
        # Brute-force grid at step 0.05 brackets the reachable volatility range.
        step = 0.05
        grid = []
        k = round(1 / step)
        for i in range(k + 1):
            for j in range(k + 1 - i):
                w = np.array([i, j, k - i - j]) * step
                grid.append(risk_return(Portfolio(weights=w), toy_est).sigma)
        lo, hi = min(grid), max(grid)
        rng = np.random.default_rng(11)
        for _ in range(50):
            s = risk_return(Portfolio(weights=rng.dirichlet(np.ones(3))), toy_est).sigma
            assert lo - 0.01 <= s <= hi + 0.01

    def test_mu_linear_in_convex_combination(self, toy_est):
        rng = np.random.default_rng(3)
        a = rng.dirichlet(np.ones(3))
        b = rng.dirichlet(np.ones(3))
        for lam in (0.0, 0.25, 0.7, 1.0):
            w = lam * a + (1 - lam) * b
            mu_w = risk_return(Portfolio(weights=w), toy_est).mu
            mu_a = risk_return(Portfolio(weights=a), toy_est).mu
            mu_b = risk_return(Portfolio(weights=b), toy_est).mu
            assert mu_w == pytest.approx(lam * mu_a + (1 - lam) * mu_b, abs=1e-14)

    def test_riskreturnpoint_rejects_negative_sigma(self):
        with pytest.raises(ValueError):
            RiskReturnPoint(mu=0.1, sigma=-0.01)


class TestSharpe:
    def test_reference_value(self, toy_est, toy_w0):
        expected = oracle_mu(TOY_W0, TOY_MEANS_PCT) / oracle_sigma(TOY_W0, TOY_STDS_PCT, TOY_CORR)
        assert sharpe(toy_w0, toy_est) == pytest.approx(expected, abs=1e-12)
        assert sharpe(toy_w0, toy_est) == pytest.approx(1.233, abs=1e-3)

    def test_zero_excess_return(self, toy_est, toy_w0):
        rr = risk_return(toy_w0, toy_est)
        assert sharpe(toy_w0, toy_est, rf=rr.mu) == pytest.approx(0.0, abs=1e-12)

    def test_monotone_in_rf(self, toy_est, toy_w0):
        assert sharpe(toy_w0, toy_est, rf=0.01) < sharpe(toy_w0, toy_est, rf=0.0)

    def test_zero_volatility_error(self):
        est = Estimates(mu=np.array([0.1, 0.2]), sigma=np.zeros((2, 2)))
        with pytest.raises(ValueError):
            sharpe(Portfolio(weights=np.array([0.5, 0.5])), est)
