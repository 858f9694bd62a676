"""Path simulation for the four-regime threshold matrix autoregression.

Covers the two error-covariance designs used throughout the package's
Monte Carlo studies (identity, and a Kronecker product of random SPD row
and column factors), the endogenous spread definition of the threshold
variables, and a reference coefficient design with known thresholds
tau = (0.02, -0.02).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import (
    THRESHOLD_ENDOGENOUS,
    THRESHOLD_EXOGENOUS,
    CoefSet,
    MatrixSeries,
    ThetaParams,
    Thresholds,
    classify_regime,
    col_spread,
    row_spread,
)
from .exceptions import InvalidArgumentError, StationarityError

NOISE_IDENTITY = "identity"
NOISE_KRONECKER = "kronecker"

DIST_GAUSSIAN = "gaussian"
DIST_STUDENT_T = "student_t"


@dataclass(frozen=True)
class StationarityReport:
    stationary: bool
    margin: float


def check_stationarity(coefs: CoefSet) -> StationarityReport:
    """Sufficient stationarity bound for endogenous threshold variables.

    Computes mu = max over regimes of ||A_i||_2 * ||B_j||_2 (spectral norms).
    The process is stationary and ergodic when mu < 1; margin = 1 - mu.
    """
    a_norms = [np.linalg.norm(coefs.A1, 2), np.linalg.norm(coefs.A2, 2)]
    b_norms = [np.linalg.norm(coefs.B1, 2), np.linalg.norm(coefs.B2, 2)]
    mu = max(a * b for a in a_norms for b in b_norms)
    return StationarityReport(stationary=bool(mu < 1.0), margin=float(1.0 - mu))


def standard_design(m: int, n: int) -> ThetaParams:
    """The reference simulation design at dimension (m, n).

    A1 is a scaled all-ones matrix, A2 has unit diagonal and -0.5
    off-diagonal, B1 is all-ones, B2 has unit diagonal and -0.3
    off-diagonal; scales are chosen so ||A1||_F = ||A2||_F = 1 and
    ||B1||_F = ||B2||_F = 0.8.  Thresholds are (0.02, -0.02).
    """
    if m < 2 or n < 2:
        raise InvalidArgumentError("standard design requires m, n >= 2")
    A1 = np.ones((m, m))
    A1 /= np.linalg.norm(A1)
    A2 = np.full((m, m), -0.5)
    np.fill_diagonal(A2, 1.0)
    A2 /= np.linalg.norm(A2)
    B1 = np.ones((n, n))
    B1 *= 0.8 / np.linalg.norm(B1)
    B2 = np.full((n, n), -0.3)
    np.fill_diagonal(B2, 1.0)
    B2 *= 0.8 / np.linalg.norm(B2)
    coefs = CoefSet(A1=A1, A2=A2, B1=B1, B2=B2, normalized=True)
    return ThetaParams(coefs=coefs, tau=Thresholds(r=0.02, s=-0.02))


def _check_spd(S: np.ndarray, name: str) -> np.ndarray:
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise InvalidArgumentError(f"{name} must be square")
    if np.max(np.abs(S - S.T)) > 1e-10:
        raise InvalidArgumentError(f"{name} must be symmetric")
    if np.min(np.linalg.eigvalsh(S)) <= 1e-10 * max(1.0, np.max(np.abs(S))):
        raise InvalidArgumentError(f"{name} must be positive definite")
    return S


@dataclass(frozen=True)
class NoiseSpec:
    """Error distribution description.

    ``kind`` selects Cov(vec(E_t)): the identity, or sigma_c kron sigma_r
    built from SPD row/column factors.  ``scale`` multiplies the draws
    (scale = 0 gives a noise-free path, useful in tests).  The error family
    is Gaussian by default; ``student_t`` uses variance-standardized draws
    with ``df`` degrees of freedom (df > 2).
    """

    kind: str = NOISE_IDENTITY
    sigma_r: Optional[np.ndarray] = None
    sigma_c: Optional[np.ndarray] = None
    seed: int = 0
    scale: float = 1.0
    dist: str = DIST_GAUSSIAN
    df: Optional[float] = None

    def __post_init__(self):
        if self.kind not in (NOISE_IDENTITY, NOISE_KRONECKER):
            raise InvalidArgumentError(f"unknown noise kind {self.kind!r}")
        if self.kind == NOISE_KRONECKER:
            if self.sigma_r is None or self.sigma_c is None:
                raise InvalidArgumentError("kronecker noise requires sigma_r and sigma_c")
            object.__setattr__(self, "sigma_r", _check_spd(self.sigma_r, "sigma_r"))
            object.__setattr__(self, "sigma_c", _check_spd(self.sigma_c, "sigma_c"))
        if self.dist not in (DIST_GAUSSIAN, DIST_STUDENT_T):
            raise InvalidArgumentError(f"unknown error distribution {self.dist!r}")
        if self.dist == DIST_STUDENT_T and (self.df is None or self.df <= 2):
            raise InvalidArgumentError("student_t errors require df > 2")
        if self.scale < 0:
            raise InvalidArgumentError("scale must be non-negative")

    def implied_sigma(self, m: int, n: int) -> np.ndarray:
        """Cov(vec(E_t)) implied by the spec at dimension (m, n)."""
        if self.kind == NOISE_IDENTITY:
            base = np.eye(m * n)
        else:
            base = np.kron(self.sigma_c, self.sigma_r)
        return self.scale**2 * base


def make_kronecker_sigma(m: int, n: int, seed: int = 0, scale: float = 1.0) -> NoiseSpec:
    """Random Kronecker-factor noise: sigma = Q Lambda Q' per factor.

    Q is Haar-distributed orthonormal (QR of a Gaussian matrix with the R
    diagonal sign fixed) and Lambda has |N(0,1)| diagonal entries.
    Deterministic under a fixed seed.
    """
    rng = np.random.default_rng(seed)

    def factor(dim):
        M = rng.standard_normal((dim, dim))
        Q, R = np.linalg.qr(M)
        Q = Q * np.sign(np.diag(R))
        lam = np.abs(rng.standard_normal(dim))
        return (Q * lam) @ Q.T

    sigma_r = factor(m)
    sigma_c = factor(n)
    return NoiseSpec(
        kind=NOISE_KRONECKER, sigma_r=sigma_r, sigma_c=sigma_c, seed=seed, scale=scale
    )


@dataclass(frozen=True)
class DgpSpec:
    """Everything needed to generate one path.

    ``threshold_def`` selects how z_t and w_t evolve: ``"endogenous"``
    recomputes them from X_t with the row/column spread formulas after each
    step; ``"exogenous"`` uses the provided paths, indexed by time with a
    presample value at index 0 (length >= burn_in + T + 1).
    """

    theta: ThetaParams
    noise: NoiseSpec
    T: int
    burn_in: int = 200
    threshold_def: str = "endogenous"
    z_path: Optional[np.ndarray] = None
    w_path: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.T < 2:
            raise InvalidArgumentError("T must be at least 2")
        if self.burn_in < 0:
            raise InvalidArgumentError("burn_in must be non-negative")
        if self.threshold_def not in ("endogenous", "exogenous"):
            raise InvalidArgumentError(f"unknown threshold_def {self.threshold_def!r}")
        if self.threshold_def == "exogenous":
            need = self.burn_in + self.T + 1
            for name, p in (("z_path", self.z_path), ("w_path", self.w_path)):
                if p is None:
                    raise InvalidArgumentError(f"exogenous thresholds require {name}")
                arr = np.asarray(p, dtype=float)
                if arr.ndim != 1 or arr.shape[0] < need:
                    raise InvalidArgumentError(
                        f"{name} must have length >= burn_in + T + 1 = {need}"
                    )
                if not np.all(np.isfinite(arr)):
                    raise InvalidArgumentError(f"{name} contains non-finite entries")
                object.__setattr__(self, name, arr)


def _draw_errors(noise: NoiseSpec, m: int, n: int, steps: int, rng) -> np.ndarray:
    if noise.dist == DIST_GAUSSIAN:
        Z = rng.standard_normal((steps, m, n))
    else:
        Z = rng.standard_t(noise.df, size=(steps, m, n))
        Z /= np.sqrt(noise.df / (noise.df - 2.0))
    if noise.kind == NOISE_KRONECKER:
        Lr = np.linalg.cholesky(noise.sigma_r)
        Lc = np.linalg.cholesky(noise.sigma_c)
        # E = Lr Z Lc' gives Cov(vec(E)) = sigma_c kron sigma_r
        Z = np.einsum("ab,tbc,dc->tad", Lr, Z, Lc)
    return noise.scale * Z


def simulate_path(spec: DgpSpec, override_stationarity: bool = False) -> MatrixSeries:
    """Iterate the model from X_0 = 0, discarding the burn-in prefix.

    Under endogenous thresholds the coefficient set must satisfy the
    sufficient stationarity bound (override with ``override_stationarity``
    for experimentation, since the bound is only sufficient).
    """
    theta = spec.theta
    m, n = theta.coefs.m, theta.coefs.n
    if spec.threshold_def == "endogenous" and not override_stationarity:
        report = check_stationarity(theta.coefs)
        if not report.stationary:
            raise StationarityError(
                f"coefficient set fails the stationarity bound (margin {report.margin:.3g}); "
                "pass override_stationarity=True to simulate anyway"
            )
    steps = spec.burn_in + spec.T
    rng = np.random.default_rng(spec.noise.seed)
    E = _draw_errors(spec.noise, m, n, steps, rng)

    X = np.zeros((m, n))
    if spec.threshold_def == "endogenous":
        z_prev, w_prev = row_spread(X), col_spread(X)
    else:
        z_prev, w_prev = float(spec.z_path[0]), float(spec.w_path[0])

    out_X = np.empty((spec.T, m, n))
    out_z = np.empty(spec.T)
    out_w = np.empty(spec.T)
    kept = 0
    for t in range(steps):
        label = classify_regime(z_prev, w_prev, theta.tau)
        A = theta.coefs.a(label.i)
        B = theta.coefs.b(label.j)
        X = A @ X @ B.T + E[t]
        if spec.threshold_def == "endogenous":
            z_prev, w_prev = row_spread(X), col_spread(X)
        else:
            z_prev, w_prev = float(spec.z_path[t + 1]), float(spec.w_path[t + 1])
        if t >= spec.burn_in:
            out_X[kept] = X
            out_z[kept] = z_prev
            out_w[kept] = w_prev
            kept += 1
    mode = THRESHOLD_ENDOGENOUS if spec.threshold_def == "endogenous" else THRESHOLD_EXOGENOUS
    return MatrixSeries(X=out_X, z=out_z, w=out_w, threshold_mode=mode)


def replicate_seed(root_seed: int, index: int) -> int:
    """Seed-splitting rule for independent replicates: root seed + index."""
    return int(root_seed) + int(index)
