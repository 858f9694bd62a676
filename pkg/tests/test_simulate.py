import numpy as np
import pytest

from martkit import (
    CoefSet,
    DgpSpec,
    InvalidArgumentError,
    NoiseSpec,
    StationarityError,
    ThetaParams,
    Thresholds,
    check_stationarity,
    col_spread,
    make_kronecker_sigma,
    mar_init,
    replicate_seed,
    row_spread,
    simulate_path,
    standard_design,
)
from martkit.core import kron_coefficient, RegimeLabel


class TestCheckStationarity:
    def test_diagonal_contraction(self):
        coefs = CoefSet(
            A1=0.5 * np.eye(3), A2=0.5 * np.eye(3), B1=0.5 * np.eye(2), B2=0.5 * np.eye(2)
        )
        report = check_stationarity(coefs)
        assert report.stationary
        assert abs(report.margin - 0.75) < 1e-12

    def test_identity_boundary(self):
        coefs = CoefSet(A1=np.eye(2), A2=np.eye(2), B1=np.eye(2), B2=np.eye(2))
        report = check_stationarity(coefs)
        assert not report.stationary
        assert abs(report.margin) < 1e-12

    def test_reference_design_is_stationary(self):
        # spectral norms computed directly as the oracle
        theta = standard_design(3, 2)
        c = theta.coefs
        mu = max(
            np.linalg.norm(A, 2) * np.linalg.norm(B, 2)
            for A in (c.A1, c.A2)
            for B in (c.B1, c.B2)
        )
        report = check_stationarity(c)
        assert report.stationary
        assert mu < 1
        assert abs(report.margin - (1 - mu)) < 1e-12


class TestStandardDesign:
    def test_all_norms(self):
        for m, n in [(3, 2), (5, 3), (4, 4)]:
            theta = standard_design(m, n)
            assert abs(np.linalg.norm(theta.coefs.A1) - 1.0) < 1e-12
            assert abs(np.linalg.norm(theta.coefs.A2) - 1.0) < 1e-12
            assert abs(np.linalg.norm(theta.coefs.B1) - 0.8) < 1e-12
            assert abs(np.linalg.norm(theta.coefs.B2) - 0.8) < 1e-12

    def test_scaling_constants(self):
        theta = standard_design(3, 2)
        # ||ones(3)||_F = 3 so the A1 entries are 1/3
        np.testing.assert_allclose(theta.coefs.A1, np.full((3, 3), 1.0 / 3.0))
        # ||ones(2)||_F = 2 so the B1 entries are 0.8/2 = 0.4
        np.testing.assert_allclose(theta.coefs.B1, np.full((2, 2), 0.4))
        # A2 pattern: diag 1, off-diag -0.5 -> norm sqrt(3 + 6*0.25) = sqrt(4.5)
        c2 = 1.0 / np.sqrt(4.5)
        np.testing.assert_allclose(np.diag(theta.coefs.A2), np.full(3, c2))
        assert abs(theta.coefs.A2[0, 1] + 0.5 * c2) < 1e-12

    def test_thresholds(self):
        theta = standard_design(3, 2)
        assert theta.tau == Thresholds(r=0.02, s=-0.02)

    def test_requires_m_n_at_least_two(self):
        with pytest.raises(InvalidArgumentError):
            standard_design(1, 3)


class TestKroneckerSigma:
    def test_symmetric_positive_definite(self):
        spec = make_kronecker_sigma(4, 3, seed=11)
        for S in (spec.sigma_r, spec.sigma_c):
            assert np.max(np.abs(S - S.T)) < 1e-12
            assert np.min(np.linalg.eigvalsh(S)) > 0

    def test_eigenvalues_match_drawn_multiset(self):
        # reproduce the construction to recover the diagonal draws
        seed = 23
        rng = np.random.default_rng(seed)
        M = rng.standard_normal((4, 4))
        Q, R = np.linalg.qr(M)
        lam_r = np.abs(rng.standard_normal(4))
        spec = make_kronecker_sigma(4, 3, seed=seed)
        np.testing.assert_allclose(
            np.sort(np.linalg.eigvalsh(spec.sigma_r)), np.sort(lam_r), atol=1e-10
        )

    def test_deterministic(self):
        a = make_kronecker_sigma(3, 2, seed=5)
        b = make_kronecker_sigma(3, 2, seed=5)
        np.testing.assert_array_equal(a.sigma_r, b.sigma_r)
        np.testing.assert_array_equal(a.sigma_c, b.sigma_c)

    def test_implied_sigma(self):
        spec = make_kronecker_sigma(3, 2, seed=5)
        np.testing.assert_allclose(
            spec.implied_sigma(3, 2), np.kron(spec.sigma_c, spec.sigma_r), atol=1e-14
        )


class TestSimulatePath:
    def test_zero_noise_zero_fixed_point(self):
        theta = standard_design(3, 2)
        spec = DgpSpec(theta=theta, noise=NoiseSpec(seed=0, scale=0.0), T=10, burn_in=5)
        series = simulate_path(spec)
        np.testing.assert_array_equal(series.X, np.zeros((10, 3, 2)))

    def test_reproducible(self):
        theta = standard_design(3, 2)
        spec = DgpSpec(theta=theta, noise=NoiseSpec(seed=9), T=50)
        a = simulate_path(spec)
        b = simulate_path(spec)
        np.testing.assert_array_equal(a.X, b.X)
        np.testing.assert_array_equal(a.z, b.z)

    def test_endogenous_thresholds_recomputable(self):
        theta = standard_design(3, 2)
        series = simulate_path(DgpSpec(theta=theta, noise=NoiseSpec(seed=3), T=64))
        zc = np.array([row_spread(Xt) for Xt in series.X])
        wc = np.array([col_spread(Xt) for Xt in series.X])
        np.testing.assert_array_equal(series.z, zc)
        np.testing.assert_array_equal(series.w, wc)

    def test_nonstationary_refused_and_overridable(self):
        coefs = CoefSet(
            A1=1.2 * np.eye(2), A2=np.eye(2), B1=np.eye(2), B2=np.eye(2)
        )
        theta = ThetaParams(coefs=coefs, tau=Thresholds(r=0.0, s=0.0))
        spec = DgpSpec(theta=theta, noise=NoiseSpec(seed=0), T=5, burn_in=0)
        with pytest.raises(StationarityError):
            simulate_path(spec)
        series = simulate_path(spec, override_stationarity=True)
        assert series.T == 5

    def test_exogenous_thresholds_stored(self):
        theta = standard_design(2, 2)
        steps = 20 + 8 + 1
        rng = np.random.default_rng(4)
        z = rng.standard_normal(steps)
        w = rng.standard_normal(steps)
        spec = DgpSpec(
            theta=theta,
            noise=NoiseSpec(seed=1),
            T=8,
            burn_in=20,
            threshold_def="exogenous",
            z_path=z,
            w_path=w,
        )
        series = simulate_path(spec)
        np.testing.assert_array_equal(series.z, z[21:29])
        assert series.threshold_mode == "exogenous"

    def test_noise_only_covariance(self):
        # with zero coefficients the path is pure noise; its sample covariance
        # must approach the implied error covariance
        m, n = 2, 2
        coefs = CoefSet(
            A1=np.zeros((m, m)), A2=np.zeros((m, m)), B1=np.zeros((n, n)), B2=np.zeros((n, n))
        )
        theta = ThetaParams(coefs=coefs, tau=Thresholds(r=0.0, s=0.0))
        noise = make_kronecker_sigma(m, n, seed=31)
        T = 100_000
        series = simulate_path(DgpSpec(theta=theta, noise=noise, T=T, burn_in=10))
        V = series.X.transpose(0, 2, 1).reshape(T, m * n)
        sample = np.cov(V, rowvar=False)
        target = noise.implied_sigma(m, n)
        # the (i,j) sample-covariance entry has sd of order
        # sqrt(sigma_ii sigma_jj / T); 5 of those is the tolerance
        sd = np.sqrt(np.outer(np.diag(target), np.diag(target)))
        assert np.max(np.abs(sample - target) / sd) < 5.0 / np.sqrt(T) * np.sqrt(2)

    def test_single_regime_reduces_to_one_map(self):
        # with A2=A1, B2=B1 the threshold has no effect: the fitted pooled
        # bilinear map must recover the common Kronecker product
        rng = np.random.default_rng(12)
        theta0 = standard_design(3, 2)
        coefs = CoefSet(
            A1=theta0.coefs.A1, A2=theta0.coefs.A1, B1=theta0.coefs.B1, B2=theta0.coefs.B1
        )
        theta = ThetaParams(coefs=coefs, tau=Thresholds(r=0.02, s=-0.02))
        series = simulate_path(DgpSpec(theta=theta, noise=NoiseSpec(seed=13), T=20_000))
        fitted = mar_init(series)
        true_k = kron_coefficient(coefs, RegimeLabel(1, 1))
        fit_k = kron_coefficient(fitted, RegimeLabel(1, 1))
        assert np.linalg.norm(fit_k - true_k) < 0.05

    def test_setting_one_stationary_mean_is_stable(self):
        # The endogenous regime indicator is selected on functions of the
        # lagged state, so the stationary mean is NOT zero; what stationarity
        # and ergodicity give is a law-of-large-numbers limit.  Two
        # independent long paths must agree on the mean within Monte Carlo
        # error (batch means absorb the serial dependence), and the mean is
        # bounded.
        theta = standard_design(3, 2)
        T = 4000

        def mean_and_se(seed):
            series = simulate_path(DgpSpec(theta=theta, noise=NoiseSpec(seed=seed), T=T))
            V = series.X.transpose(0, 2, 1).reshape(T, 6)
            batches = V[: 40 * (T // 40)].reshape(40, T // 40, 6).mean(axis=1)
            return V.mean(axis=0), batches.std(axis=0, ddof=1) / np.sqrt(40)

        m1, se1 = mean_and_se(17)
        m2, se2 = mean_and_se(1017)
        combined = np.sqrt(se1**2 + se2**2)
        assert np.all(np.abs(m1 - m2) < 5 * combined)
        assert np.all(np.abs(m1) < 1.0)

    def test_student_t_errors(self):
        theta = standard_design(2, 2)
        spec = DgpSpec(
            theta=theta, noise=NoiseSpec(seed=2, dist="student_t", df=5), T=50
        )
        series = simulate_path(spec)
        assert np.all(np.isfinite(series.X))

    def test_replicate_seed_rule(self):
        assert replicate_seed(100, 7) == 107


class TestNoiseSpecValidation:
    def test_kronecker_requires_factors(self):
        with pytest.raises(InvalidArgumentError):
            NoiseSpec(kind="kronecker")

    def test_spd_enforced(self):
        bad = np.array([[1.0, 2.0], [2.0, 1.0]])  # eigenvalues 3, -1
        with pytest.raises(InvalidArgumentError):
            NoiseSpec(kind="kronecker", sigma_r=bad, sigma_c=np.eye(2))

    def test_student_t_needs_df(self):
        with pytest.raises(InvalidArgumentError):
            NoiseSpec(dist="student_t")
