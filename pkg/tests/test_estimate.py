import dataclasses

import numpy as np
import pytest

from martkit import (
    AlsOptions,
    CoefSet,
    DgpSpec,
    EstimationError,
    GridSpec,
    MatrixSeries,
    NoiseSpec,
    ThetaParams,
    Thresholds,
    als_fit,
    gradient_residuals,
    grid_search_fit,
    kron_coefficient,
    loss,
    mar_init,
    refine_search,
    simulate_path,
    standard_design,
)
from martkit.core import RegimeLabel
from martkit.studies import kron_product_error


def brute_force_loss(series, theta):
    """Independent oracle: the vectorized Kronecker form of the objective."""
    total = 0.0
    for t in range(1, series.T):
        z, w = series.z[t - 1], series.w[t - 1]
        i = 1 if z <= theta.tau.r else 2
        j = 1 if w <= theta.tau.s else 2
        K = np.kron(theta.coefs.b(j), theta.coefs.a(i))
        x_prev = series.X[t - 1].flatten(order="F")
        x = series.X[t].flatten(order="F")
        diff = x - K @ x_prev
        total += float(diff @ diff)
    return total / series.T


def random_orthogonal(rng, d):
    Q, R = np.linalg.qr(rng.standard_normal((d, d)))
    return Q * np.sign(np.diag(R))


def orthogonal_theta(rng, m=3, n=2, tau=(0.3, -0.2)):
    """Norm-preserving coefficients: noise-free paths neither decay nor blow up."""
    return ThetaParams(
        coefs=CoefSet(
            A1=random_orthogonal(rng, m),
            A2=random_orthogonal(rng, m),
            B1=random_orthogonal(rng, n),
            B2=random_orthogonal(rng, n),
        ),
        tau=Thresholds(*tau),
    )


def noise_free_series(rng, theta, T, m=3, n=2):
    """Brute-force path generation with exogenous threshold variables."""
    z = rng.standard_normal(T)
    w = rng.standard_normal(T)
    X = np.empty((T, m, n))
    X[0] = rng.standard_normal((m, n))
    for t in range(1, T):
        i = 1 if z[t - 1] <= theta.tau.r else 2
        j = 1 if w[t - 1] <= theta.tau.s else 2
        X[t] = theta.coefs.a(i) @ X[t - 1] @ theta.coefs.b(j).T
    return MatrixSeries(X=X, z=z, w=w)


def noisy_series(seed, T=400, m=3, n=2):
    theta = standard_design(m, n)
    return theta, simulate_path(DgpSpec(theta=theta, noise=NoiseSpec(seed=seed), T=T))


class TestLoss:
    def test_matches_vectorized_oracle(self):
        rng = np.random.default_rng(0)
        theta, series = noisy_series(5, T=60)
        for _ in range(5):
            probe = ThetaParams(
                coefs=CoefSet(
                    A1=rng.standard_normal((3, 3)),
                    A2=rng.standard_normal((3, 3)),
                    B1=rng.standard_normal((2, 2)),
                    B2=rng.standard_normal((2, 2)),
                ),
                tau=Thresholds(rng.standard_normal(), rng.standard_normal()),
            )
            expected = brute_force_loss(series, probe)
            assert abs(loss(series, probe) - expected) <= 1e-12 * (1 + expected)

    def test_zero_on_noise_free_truth(self):
        rng = np.random.default_rng(1)
        theta = orthogonal_theta(rng)
        series = noise_free_series(rng, theta, 200)
        assert loss(series, theta) < 1e-20

    def test_zero_coefficients_give_mean_square(self):
        theta, series = noisy_series(6, T=80)
        zero = ThetaParams(
            coefs=CoefSet(
                A1=np.zeros((3, 3)),
                A2=np.zeros((3, 3)),
                B1=np.zeros((2, 2)),
                B2=np.zeros((2, 2)),
            ),
            tau=theta.tau,
        )
        expected = float(np.sum(series.X[1:] ** 2)) / series.T
        assert abs(loss(series, zero) - expected) < 1e-12 * (1 + expected)


class TestMarInit:
    def test_noise_free_recovery(self):
        rng = np.random.default_rng(2)
        m, n = 3, 2
        A = random_orthogonal(rng, m)
        B = random_orthogonal(rng, n)
        T = 300
        X = np.empty((T, m, n))
        X[0] = rng.standard_normal((m, n))
        for t in range(1, T):
            X[t] = A @ X[t - 1] @ B.T
        series = MatrixSeries(X=X, z=np.zeros(T), w=np.zeros(T))
        fitted = mar_init(series)
        true_k = np.kron(B, A)
        fit_k = kron_coefficient(fitted, RegimeLabel(1, 1))
        assert np.linalg.norm(fit_k - true_k) < 1e-8

    def test_white_noise_shrinks_to_zero(self):
        rng = np.random.default_rng(3)
        T = 10_000
        X = rng.standard_normal((T, 2, 2))
        series = MatrixSeries(X=X, z=np.zeros(T), w=np.zeros(T))
        fitted = mar_init(series)
        assert np.linalg.norm(kron_coefficient(fitted, RegimeLabel(1, 1))) < 0.1

    def test_scalar_ar1_matches_ols(self):
        rng = np.random.default_rng(4)
        T = 2000
        x = np.empty(T)
        x[0] = 0.0
        e = rng.standard_normal(T)
        for t in range(1, T):
            x[t] = 0.5 * x[t - 1] + e[t]
        series = MatrixSeries(X=x.reshape(T, 1, 1), z=np.zeros(T), w=np.zeros(T))
        fitted = mar_init(series)
        ab = float(fitted.A1[0, 0] * fitted.B1[0, 0])
        rho = float(x[1:] @ x[:-1] / (x[:-1] @ x[:-1]))  # OLS oracle
        assert abs(ab - rho) < 1e-10
        se = np.sqrt((1 - rho**2) / T)
        assert abs(rho - 0.5) < 3 * se


class TestAlsFit:
    def test_noise_free_recovery_at_true_tau(self):
        rng = np.random.default_rng(5)
        theta = orthogonal_theta(rng)
        series = noise_free_series(rng, theta, 500)
        fit = als_fit(series, theta.tau)
        assert kron_product_error(fit.theta_hat.coefs, theta.coefs) < 1e-10
        assert fit.loss < 1e-15

    def test_single_regime_data_matches_mar(self):
        theta0 = standard_design(3, 2)
        coefs = CoefSet(
            A1=theta0.coefs.A1,
            A2=theta0.coefs.A1,
            B1=theta0.coefs.B1,
            B2=theta0.coefs.B1,
        )
        theta = ThetaParams(coefs=coefs, tau=theta0.tau)
        series = simulate_path(DgpSpec(theta=theta, noise=NoiseSpec(seed=21), T=4000))
        fit = als_fit(series, theta.tau)
        mar = mar_init(series)
        for i in (1, 2):
            for j in (1, 2):
                d = kron_coefficient(fit.theta_hat.coefs, RegimeLabel(i, j)) - (
                    kron_coefficient(mar, RegimeLabel(i, j))
                )
                assert np.linalg.norm(d) < 0.25

    def test_monotone_descent(self):
        _, series = noisy_series(7, T=300)
        fit = als_fit(series, Thresholds(r=0.0, s=0.0))
        diffs = np.diff(fit.loss_trace)
        assert np.all(diffs <= 1e-10)

    def test_gradient_stationarity(self):
        _, series = noisy_series(8, T=300)
        fit = als_fit(series, Thresholds(r=0.02, s=-0.02))
        grads = gradient_residuals(series, fit.theta_hat)
        bound = 1e-6 * (1 + fit.loss)
        for name, G in grads.items():
            assert np.linalg.norm(G) < bound, name

    def test_result_contracts(self):
        _, series = noisy_series(9, T=200)
        fit = als_fit(series, Thresholds(r=0.0, s=0.0))
        assert fit.residuals.shape == (199, 3, 2)
        assert fit.regime_counts.sum() == 199
        assert fit.theta_hat.coefs.normalized
        # refitting from the returned estimate barely moves the loss
        refit = als_fit(
            series,
            fit.theta_hat.tau,
            AlsOptions(init=fit.theta_hat.coefs),
        )
        assert abs(refit.loss - fit.loss) < 1e-8 * (1 + fit.loss)

    def test_empty_marginal_regime_held(self):
        _, series = noisy_series(10, T=150)
        # threshold far below every sample value: row regime 1 never occurs
        fit = als_fit(series, Thresholds(r=series.z.min() - 10.0, s=0.0))
        assert "A1" in fit.held_updates
        assert fit.regime_counts[0].sum() == 0


class TestGridSearch:
    def test_noise_free_exact_recovery_with_true_tau_on_grid(self):
        rng = np.random.default_rng(11)
        theta = orthogonal_theta(rng, tau=(0.25, -0.35))
        series = noise_free_series(rng, theta, 400)
        grid = GridSpec(
            r_candidates=np.array([-0.5, 0.0, 0.25, 0.6]),
            s_candidates=np.array([-0.35, -0.1, 0.3]),
        )
        fit = grid_search_fit(series, grid)
        assert fit.theta_hat.tau == Thresholds(r=0.25, s=-0.35)
        assert abs(fit.loss) < 1e-12
        assert kron_product_error(fit.theta_hat.coefs, theta.coefs) < 1e-10

    def test_profile_argmin_contract(self):
        _, series = noisy_series(12, T=250)
        fit = grid_search_fit(series, GridSpec(max_candidates_per_axis=12))
        best = fit.profile_loss.min()
        idx = np.unravel_index(np.argmin(fit.profile_loss), fit.profile_loss.shape)
        assert fit.theta_hat.tau.r == fit.r_candidates[idx[0]]
        assert fit.theta_hat.tau.s == fit.s_candidates[idx[1]]
        assert np.all(fit.profile_loss >= best)

    def test_equivariance_under_scaling(self):
        rng = np.random.default_rng(13)
        theta0, base = noisy_series(13, T=300)
        # exogenous threshold paths: scaling X must not move the argmin
        series = MatrixSeries(
            X=base.X, z=rng.standard_normal(base.T), w=rng.standard_normal(base.T)
        )
        grid = GridSpec(max_candidates_per_axis=10)
        fit1 = grid_search_fit(series, grid)
        c = 3.7
        scaled = MatrixSeries(X=c * base.X, z=series.z, w=series.w)
        fit2 = grid_search_fit(scaled, grid)
        assert fit1.theta_hat.tau == fit2.theta_hat.tau
        np.testing.assert_allclose(fit2.residuals, c * fit1.residuals, atol=1e-8)
        assert abs(fit2.loss - c * c * fit1.loss) < 1e-8 * (1 + fit2.loss)

    def test_degenerate_single_candidate_collapses_to_mar(self):
        _, series = noisy_series(14, T=200)
        grid = GridSpec(
            r_candidates=np.array([series.z.min() - 1.0]),
            s_candidates=np.array([series.w.min() - 1.0]),
        )
        fit = grid_search_fit(series, grid)
        assert fit.regime_counts[1, 1] == series.T - 1
        mar = mar_init(series)
        d = kron_coefficient(fit.theta_hat.coefs, RegimeLabel(2, 2)) - kron_coefficient(
            mar, RegimeLabel(2, 2)
        )
        # both solvers stop inside the 1e-6 stationarity ball of the same
        # optimum, so their products agree to that order
        assert np.linalg.norm(d) < 1e-5

    def test_deterministic_tie_break(self):
        _, series = noisy_series(15, T=150)
        lo = series.z.min() - 1.0
        # two candidates both below every sample point produce identical
        # regime splits, hence identical losses; the smaller r must win
        grid = GridSpec(
            r_candidates=np.array([lo, lo - 5.0]),
            s_candidates=np.array([0.0]),
        )
        fit = grid_search_fit(series, grid)
        assert fit.theta_hat.tau.r == lo - 5.0

    def test_parallel_bit_identical(self):
        _, series = noisy_series(16, T=300)
        grid = GridSpec(max_candidates_per_axis=8)
        serial = grid_search_fit(series, grid, workers=1)
        parallel = grid_search_fit(series, grid, workers=2)
        assert serial.theta_hat.tau == parallel.theta_hat.tau
        np.testing.assert_array_equal(serial.profile_loss, parallel.profile_loss)
        for name in ("A1", "A2", "B1", "B2"):
            np.testing.assert_array_equal(
                getattr(serial.theta_hat.coefs, name),
                getattr(parallel.theta_hat.coefs, name),
            )

    def test_neighbor_warm_start_mode(self):
        _, series = noisy_series(17, T=200)
        grid = GridSpec(max_candidates_per_axis=6, warm_start="neighbor")
        fit = grid_search_fit(series, grid)
        assert fit.profile_loss.shape == (6, 6)

    def test_no_candidates_raises(self):
        # with T-1 = 11 lagged points, no candidate can leave >= 10 points
        # on both sides of a marginal regime
        _, series = noisy_series(18, T=12)
        with pytest.raises(EstimationError):
            grid_search_fit(series, GridSpec())

    def test_refine_search_reaches_sample_resolution(self):
        theta, series = noisy_series(19, T=300)
        fit = refine_search(series, GridSpec(max_candidates_per_axis=25))
        # the returned threshold is an actual sample value of the lagged series
        assert fit.theta_hat.tau.r in series.z[:-1]
        assert fit.theta_hat.tau.s in series.w[:-1]


class TestOptionsValidation:
    def test_bad_trim(self):
        with pytest.raises(Exception):
            GridSpec(trim_fraction=0.7)

    def test_bad_max_iters(self):
        with pytest.raises(Exception):
            AlsOptions(max_iters=0)

    def test_bad_warm_start(self):
        with pytest.raises(Exception):
            GridSpec(warm_start="antigravity")
