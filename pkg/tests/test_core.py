import numpy as np
import pytest

from martkit import (
    CoefSet,
    InsufficientDataError,
    InvalidArgumentError,
    MatrixSeries,
    RegimeLabel,
    ThetaParams,
    Thresholds,
    classify_regime,
    kron_coefficient,
    normalize,
    predict_one,
    regime_counts,
    unvec,
    vec,
)
from martkit.exceptions import DegenerateCoefficientError


def random_coefs(rng, m, n):
    return CoefSet(
        A1=rng.standard_normal((m, m)),
        A2=rng.standard_normal((m, m)),
        B1=rng.standard_normal((n, n)),
        B2=rng.standard_normal((n, n)),
    )


def constant_series(T, m=2, n=2, z=0.0, w=0.0):
    X = np.ones((T, m, n))
    return MatrixSeries(X=X, z=np.full(T, z), w=np.full(T, w))


class TestClassifyRegime:
    def test_reference_point(self):
        # z at or below r picks the row regime 1; w above s picks column regime 2
        assert classify_regime(0.0, 0.0, Thresholds(r=0.02, s=-0.02)) == RegimeLabel(1, 2)

    def test_boundary_equality_is_regime_one(self):
        tau = Thresholds(r=0.5, s=-1.5)
        assert classify_regime(0.5, -1.5, tau) == RegimeLabel(1, 1)

    def test_strictly_above_is_regime_two(self):
        eps = 1e-9
        tau = Thresholds(r=0.5, s=-1.5)
        assert classify_regime(0.5 + eps, -1.5 + eps, tau) == RegimeLabel(2, 2)

    def test_non_finite_rejected(self):
        tau = Thresholds(r=0.0, s=0.0)
        with pytest.raises(InvalidArgumentError):
            classify_regime(np.nan, 0.0, tau)
        with pytest.raises(InvalidArgumentError):
            classify_regime(0.0, np.inf, tau)

    def test_partition_of_the_plane(self):
        rng = np.random.default_rng(0)
        tau = Thresholds(r=0.3, s=-0.7)
        for z, w in rng.standard_normal((200, 2)):
            label = classify_regime(z, w, tau)
            assert label.i in (1, 2) and label.j in (1, 2)
            # exactly one indicator is active by construction of the label
            indicators = [
                (z <= tau.r) and (w <= tau.s),
                (z > tau.r) and (w <= tau.s),
                (z <= tau.r) and (w > tau.s),
                (z > tau.r) and (w > tau.s),
            ]
            assert sum(indicators) == 1
            assert indicators[(label.j - 1) * 2 + (label.i - 1)]


class TestRegimeCounts:
    def test_all_low(self):
        counts = regime_counts(constant_series(5), Thresholds(r=1.0, s=1.0))
        assert counts.tolist() == [[4, 0], [0, 0]]

    def test_all_high(self):
        counts = regime_counts(constant_series(5), Thresholds(r=-1.0, s=-1.0))
        assert counts.tolist() == [[0, 0], [0, 4]]

    def test_counts_partition_sample(self):
        rng = np.random.default_rng(1)
        T = 137
        X = rng.standard_normal((T, 2, 2))
        series = MatrixSeries(X=X, z=rng.standard_normal(T), w=rng.standard_normal(T))
        counts = regime_counts(series, Thresholds(r=0.1, s=-0.2))
        assert counts.sum() == T - 1

    def test_too_short(self):
        with pytest.raises(InsufficientDataError):
            regime_counts(constant_series(1), Thresholds(r=0.0, s=0.0))


class TestKronCoefficient:
    def test_scalar_case(self):
        coefs = CoefSet(A1=[[2.0]], A2=[[3.0]], B1=[[5.0]], B2=[[7.0]])
        assert kron_coefficient(coefs, RegimeLabel(1, 1))[0, 0] == 10.0
        assert kron_coefficient(coefs, RegimeLabel(2, 2))[0, 0] == 21.0

    def test_identity_case(self):
        m, n = 3, 2
        coefs = CoefSet(A1=np.eye(m), A2=np.eye(m), B1=np.eye(n), B2=np.eye(n))
        for i in (1, 2):
            for j in (1, 2):
                np.testing.assert_array_equal(
                    kron_coefficient(coefs, RegimeLabel(i, j)), np.eye(m * n)
                )

    def test_vectorization_identity(self):
        # vec(A X B') must equal (B kron A) vec(X) entrywise
        rng = np.random.default_rng(42)
        for m, n in [(2, 3), (3, 3), (4, 2)]:
            coefs = random_coefs(rng, m, n)
            for _ in range(20):
                X = rng.standard_normal((m, n))
                for i in (1, 2):
                    for j in (1, 2):
                        direct = coefs.a(i) @ X @ coefs.b(j).T
                        via_kron = unvec(
                            kron_coefficient(coefs, RegimeLabel(i, j)) @ vec(X), m, n
                        )
                        np.testing.assert_allclose(direct, via_kron, atol=1e-12)


class TestNormalize:
    def test_scale_forced(self):
        A1 = np.diag([2.0, 0.0])  # Frobenius norm exactly 2
        coefs = CoefSet(A1=A1, A2=np.eye(2), B1=np.eye(3), B2=np.eye(3))
        out = normalize(coefs)
        assert abs(np.linalg.norm(out.A1) - 1.0) < 1e-12
        np.testing.assert_allclose(out.B1, 2.0 * np.eye(3))

    def test_idempotent(self):
        rng = np.random.default_rng(3)
        out = normalize(random_coefs(rng, 3, 2))
        again = normalize(out)
        for name in ("A1", "A2", "B1", "B2"):
            np.testing.assert_allclose(getattr(out, name), getattr(again, name), atol=1e-15)

    def test_sign_flip_preserves_products(self):
        rng = np.random.default_rng(4)
        coefs = random_coefs(rng, 3, 2)
        if coefs.B1[0, 0] >= 0:  # force a negative leading entry
            coefs = CoefSet(A1=coefs.A1, A2=coefs.A2, B1=-coefs.B1, B2=coefs.B2)
        out = normalize(coefs)
        assert out.B1[0, 0] >= 0
        assert out.normalized
        for i in (1, 2):
            for j in (1, 2):
                np.testing.assert_allclose(
                    kron_coefficient(out, RegimeLabel(i, j)),
                    kron_coefficient(coefs, RegimeLabel(i, j)),
                    atol=1e-12,
                )

    def test_zero_leading_entry_keeps_plus_sign(self):
        coefs = CoefSet(
            A1=np.eye(2) * 2.0,
            A2=np.eye(2),
            B1=np.array([[0.0, 1.0], [-1.0, 0.0]]),
            B2=np.eye(2),
        )
        out = normalize(coefs)
        assert out.B1[0, 1] > 0  # no sign flip applied

    def test_degenerate(self):
        coefs = CoefSet(A1=np.zeros((2, 2)), A2=np.eye(2), B1=np.eye(2), B2=np.eye(2))
        with pytest.raises(DegenerateCoefficientError):
            normalize(coefs)


class TestPredictOne:
    def test_identity_returns_input(self):
        m, n = 3, 2
        coefs = CoefSet(A1=np.eye(m), A2=np.eye(m), B1=np.eye(n), B2=np.eye(n))
        theta = ThetaParams(coefs=coefs, tau=Thresholds(r=0.0, s=0.0))
        X = np.arange(6.0).reshape(m, n)
        np.testing.assert_array_equal(predict_one(X, theta, -1.0, 2.0), X)

    def test_zero_input(self):
        rng = np.random.default_rng(5)
        theta = ThetaParams(coefs=random_coefs(rng, 2, 2), tau=Thresholds(r=0.0, s=0.0))
        np.testing.assert_array_equal(
            predict_one(np.zeros((2, 2)), theta, 1.0, -1.0), np.zeros((2, 2))
        )

    def test_matches_kron_route(self):
        rng = np.random.default_rng(6)
        for _ in range(50):
            m, n = rng.integers(1, 5), rng.integers(1, 5)
            coefs = random_coefs(rng, m, n)
            theta = ThetaParams(coefs=coefs, tau=Thresholds(r=0.1, s=-0.1))
            X = rng.standard_normal((m, n))
            z, w = rng.standard_normal(2)
            label = classify_regime(z, w, theta.tau)
            expected = unvec(kron_coefficient(coefs, label) @ vec(X), m, n)
            np.testing.assert_allclose(predict_one(X, theta, z, w), expected, atol=1e-12)


class TestTypes:
    def test_beta_length(self):
        rng = np.random.default_rng(7)
        for m, n in [(1, 1), (2, 3), (5, 4)]:
            theta = ThetaParams(
                coefs=random_coefs(rng, m, n), tau=Thresholds(r=0.0, s=0.0)
            )
            assert theta.n_coef_params == 2 * (m * m + n * n)

    def test_series_validates_lengths(self):
        with pytest.raises(InvalidArgumentError):
            MatrixSeries(X=np.zeros((3, 2, 2)), z=np.zeros(2), w=np.zeros(3))

    def test_series_rejects_non_finite(self):
        X = np.zeros((3, 2, 2))
        X[1, 0, 0] = np.nan
        with pytest.raises(InvalidArgumentError):
            MatrixSeries(X=X, z=np.zeros(3), w=np.zeros(3))

    def test_endogenous_mode_recomputable(self):
        rng = np.random.default_rng(8)
        X = rng.standard_normal((4, 3, 2))
        series = MatrixSeries.from_path(X)
        assert series.threshold_mode == "endogenous_spread"
        with pytest.raises(InvalidArgumentError):
            MatrixSeries(
                X=X, z=series.z + 1.0, w=series.w, threshold_mode="endogenous_spread"
            )

    def test_coefset_shape_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            CoefSet(A1=np.eye(2), A2=np.eye(3), B1=np.eye(2), B2=np.eye(2))

    def test_arrays_frozen(self):
        coefs = CoefSet(A1=np.eye(2), A2=np.eye(2), B1=np.eye(2), B2=np.eye(2))
        with pytest.raises(ValueError):
            coefs.A1[0, 0] = 5.0
