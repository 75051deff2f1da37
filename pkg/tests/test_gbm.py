"""Correlated GBM simulation, estimation, and goodness of fit."""
import numpy as np
import pytest

import gridhedge as gh
from gridhedge.errors import (
    DegenerateVolatility,
    DegenerateVolatilityWarning,
    EmptySample,
    InvalidHorizon,
    NonPositiveSample,
    NotPositiveDefinite,
    SeriesTooShort,
    TooFewBins,
)


class TestCholesky:
    def test_identity(self):
        corr = gh.CorrelationMatrix.identity(2)
        assert np.allclose(gh.cholesky_factor(corr), np.eye(2))

    def test_hand_factor(self):
        # 0.8 = sqrt(1 - 0.36)
        corr = gh.CorrelationMatrix.pairwise(0.6)
        want = np.array([[1.0, 0.0], [0.6, 0.8]])
        assert np.allclose(gh.cholesky_factor(corr), want, atol=1e-15)

    def test_invalid_correlation_rejected(self):
        corr = gh.CorrelationMatrix(np.array([[1.0, 1.0001], [1.0001, 1.0]]))
        with pytest.raises(NotPositiveDefinite):
            gh.cholesky_factor(corr)

    def test_reconstruction(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            # factor construction guarantees positive definiteness
            loadings = rng.normal(size=(4, 6))
            cov = loadings @ loadings.T + np.diag(rng.uniform(0.1, 1.0, 4))
            scale = np.sqrt(np.diag(cov))
            rho = cov / np.outer(scale, scale)
            rho = (rho + rho.T) / 2
            np.fill_diagonal(rho, 1.0)
            corr = gh.CorrelationMatrix(rho)
            lower = gh.cholesky_factor(corr)
            assert np.max(np.abs(lower @ lower.T - rho)) < 1e-12

    def test_shape_validation(self):
        with pytest.raises(ValueError):
            gh.CorrelationMatrix(np.array([[1.0, 0.2], [0.3, 1.0]]))
        with pytest.raises(ValueError):
            gh.CorrelationMatrix(np.array([[0.9, 0.2], [0.2, 1.0]]))


class TestSimulatePaths:
    def setup_method(self):
        self.params = [gh.GbmParams(0.006, 0.03), gh.GbmParams(0.005, 0.04)]
        self.corr = gh.CorrelationMatrix.pairwise(0.6)
        self.initial = np.array([20.0, 25.0])

    def test_zero_volatility_rejected(self):
        with pytest.raises(DegenerateVolatility):
            gh.simulate_paths(
                [gh.GbmParams(0.006, 0.0)],
                gh.CorrelationMatrix.identity(1),
                np.array([20.0]),
                horizon=5.0,
                n_steps=5,
                n_paths=10,
                seed=1,
            )

    def test_bad_horizon(self):
        with pytest.raises(InvalidHorizon):
            gh.simulate_paths(
                self.params, self.corr, self.initial, horizon=0.0,
                n_steps=5, n_paths=10, seed=1,
            )

    def test_physical_mean_matches_analytic(self):
        # E[P_t] = P_0 exp(mu t)
        ens = gh.simulate_paths(
            [gh.GbmParams(0.006, 0.03)],
            gh.CorrelationMatrix.identity(1),
            np.array([20.0]),
            horizon=5.0,
            n_steps=5,
            n_paths=10_000,
            seed=11,
        )
        terminal = ens.values[:, -1, 0]
        want = 20.0 * np.exp(0.006 * 5.0)
        se = terminal.std(ddof=1) / np.sqrt(terminal.size)
        assert abs(terminal.mean() - want) < 3 * se

    def test_transformed_is_driftless(self):
        ens = gh.simulate_paths(
            [gh.GbmParams(0.006, 0.03)],
            gh.CorrelationMatrix.identity(1),
            np.array([20.0]),
            horizon=5.0,
            n_steps=5,
            n_paths=10_000,
            seed=12,
            measure="transformed",
        )
        terminal = ens.values[:, -1, 0]
        se = terminal.std(ddof=1) / np.sqrt(terminal.size)
        assert abs(terminal.mean() - 20.0) < 3 * se

    def test_per_step_martingale_under_transformed(self):
        # E[P_{n+1} | P_n] = P_n: regressing increments on the prior state
        # must give zero intercept and slope within 3 sigma
        ens = gh.simulate_paths(
            self.params, self.corr, self.initial,
            horizon=5.0, n_steps=5, n_paths=10_000, seed=13, measure="transformed",
        )
        increments = np.diff(ens.values, axis=1)
        for asset in range(2):
            y = increments[:, :, asset].ravel()
            x = ens.values[:, :-1, asset].ravel()
            design = np.column_stack([np.ones_like(x), x])
            beta, *_ = np.linalg.lstsq(design, y, rcond=None)
            resid = y - design @ beta
            cov = np.linalg.inv(design.T @ design) * (resid @ resid) / (y.size - 2)
            z = beta / np.sqrt(np.diag(cov))
            assert np.all(np.abs(z) < 3.0)

    def test_positivity_and_initial_condition(self):
        ens = gh.simulate_paths(
            self.params, self.corr, self.initial,
            horizon=5.0, n_steps=7, n_paths=500, seed=3,
        )
        assert np.all(ens.values > 0)
        assert np.allclose(ens.values[:, 0, :], self.initial)

    def test_seed_determinism(self):
        kwargs = dict(horizon=5.0, n_steps=5, n_paths=64, seed=42)
        a = gh.simulate_paths(self.params, self.corr, self.initial, **kwargs)
        b = gh.simulate_paths(self.params, self.corr, self.initial, **kwargs)
        assert np.array_equal(a.values, b.values)
        c = gh.simulate_paths(self.params, self.corr, self.initial,
                              horizon=5.0, n_steps=5, n_paths=64, seed=43)
        assert not np.array_equal(a.values, c.values)

    def test_log_increment_covariance(self):
        # empirical covariance vs sigma_i sigma_j rho_ij dt at 1e5 paths
        ens = gh.simulate_paths(
            self.params, self.corr, self.initial,
            horizon=1.0, n_steps=1, n_paths=100_000, seed=21,
        )
        x = ens.log_increments()[:, 0, :]
        got = np.cov(x.T, ddof=0)
        sig = np.array([0.03, 0.04])
        want = np.outer(sig, sig) * self.corr.rho
        assert np.max(np.abs(got - want) / want) < 0.05


class TestMle:
    def test_round_trip_within_2pct(self):
        params = gh.GbmParams(0.007, 0.027)
        ens = gh.simulate_paths(
            [params], gh.CorrelationMatrix.identity(1), np.array([20.0]),
            horizon=100_000 / 12, n_steps=100_000, n_paths=1, seed=5,
        )
        fitted, returns = gh.estimate_gbm_mle(ens.values[0, :, 0], dt=1 / 12)
        assert returns.size == 100_000
        assert abs(fitted.sigma - 0.027) / 0.027 < 0.02

    def test_formula_against_hand_computation(self):
        series = np.array([10.0, 11.0, 10.5, 12.0, 11.8])
        dt = 0.5
        fitted, returns = gh.estimate_gbm_mle(series, dt)
        x = np.diff(np.log(series))
        sigma_sq = x.var(ddof=0) / dt  # MLE divisor n
        assert np.allclose(returns, x)
        assert fitted.sigma == pytest.approx(np.sqrt(sigma_sq), rel=1e-12)
        assert fitted.mu == pytest.approx(x.mean() / dt + sigma_sq / 2, rel=1e-12)

    def test_constant_series_warns_degenerate(self):
        with pytest.warns(DegenerateVolatilityWarning):
            fitted, _ = gh.estimate_gbm_mle(np.full(10, 7.0), dt=1.0)
        assert fitted.sigma == 0.0

    def test_error_cases(self):
        with pytest.raises(SeriesTooShort):
            gh.estimate_gbm_mle([1.0, 2.0], dt=1.0)
        with pytest.raises(NonPositiveSample):
            gh.estimate_gbm_mle([1.0, -2.0, 3.0], dt=1.0)

    def test_consistency_error_shrinks_like_sqrt_n(self):
        params = gh.GbmParams(0.007, 0.027)
        ens = gh.simulate_paths(
            [params], gh.CorrelationMatrix.identity(1), np.array([20.0]),
            horizon=100_000 / 12, n_steps=100_000, n_paths=1, seed=17,
        )
        series = ens.values[0, :, 0]
        errors = []
        for n in (1_000, 10_000, 100_000):
            fitted, _ = gh.estimate_gbm_mle(series[: n + 1], dt=1 / 12)
            errors.append(abs(fitted.sigma - 0.027))
        assert errors[2] < 0.5 * errors[0]


class TestChiSquareGof:
    def test_too_few_bins(self):
        with pytest.raises(TooFewBins):
            gh.chi_square_gof(np.zeros(10), gh.GbmParams(0.0, 0.1), 1.0, n_bins=3)

    def test_empty_sample(self):
        with pytest.raises(EmptySample):
            gh.chi_square_gof(np.array([]), gh.GbmParams(0.0, 0.1), 1.0, n_bins=8)

    def test_statistic_against_manual_binning(self):
        rng = np.random.default_rng(8)
        params = gh.GbmParams(0.01, 0.05)
        dt = 0.25
        x = rng.normal((params.mu - params.sigma**2 / 2) * dt,
                       params.sigma * np.sqrt(dt), size=2_000)
        result = gh.chi_square_gof(x, params, dt, n_bins=10)
        from scipy.stats import norm

        edges = norm.ppf(np.arange(1, 10) / 10,
                         loc=(params.mu - params.sigma**2 / 2) * dt,
                         scale=params.sigma * np.sqrt(dt))
        counts, _ = np.histogram(x, bins=np.concatenate([[-np.inf], edges, [np.inf]]))
        want = np.sum((counts - 200.0) ** 2 / 200.0)
        assert result.statistic == pytest.approx(want, rel=1e-12)
        assert result.dof == 7

    def test_known_parameters_calibration(self):
        # with the true parameters the statistic is chi2(n_bins - 1) exactly;
        # p-values should look uniform across independent samples
        params = gh.GbmParams(0.006, 0.03)
        dt = 1.0
        rng = np.random.default_rng(123)
        pvals = []
        for _ in range(300):
            x = rng.normal((params.mu - params.sigma**2 / 2) * dt,
                           params.sigma * np.sqrt(dt), size=4_000)
            res = gh.chi_square_gof(x, params, dt, n_bins=16, n_estimated=0)
            pvals.append(res.p_value)
        pvals = np.array(pvals)
        grid = np.linspace(0, 1, 101)
        ecdf = np.searchsorted(np.sort(pvals), grid, side="right") / pvals.size
        assert np.max(np.abs(ecdf - grid)) < 1.63 / np.sqrt(pvals.size)  # KS 1%

    def test_estimated_parameters_calibration_loose(self):
        # dof correction for the two fitted parameters keeps p roughly uniform
        rng = np.random.default_rng(321)
        pvals = []
        for _ in range(200):
            series = 20.0 * np.exp(np.cumsum(
                rng.normal(-0.00045, 0.03, size=3_000)))
            fitted, returns = gh.estimate_gbm_mle(series, dt=1.0)
            pvals.append(gh.chi_square_gof(returns, fitted, 1.0, n_bins=16).p_value)
        pvals = np.array(pvals)
        assert 0.40 < pvals.mean() < 0.60
        assert pvals.min() < 0.2 and pvals.max() > 0.8
