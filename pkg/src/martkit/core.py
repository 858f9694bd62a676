"""Core data model for two-way threshold matrix autoregressions.

A path of m-by-n observations X_t switches among four regimes according to
two scalar threshold variables: z_t drives the row coefficient (A1 vs A2)
and w_t the column coefficient (B1 vs B2).  One step of the model is

    X_t = A_i X_{t-1} B_j' + E_t,   i = 1 if z_{t-1} <= r else 2,
                                    j = 1 if w_{t-1} <= s else 2.

All types here are immutable value objects and all operations are pure
functions; they are safe to share across worker processes or threads.

Vectorization is column-major throughout, so vec(A X B') = (B kron A) vec(X)
holds without transposition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .exceptions import (
    DegenerateCoefficientError,
    InsufficientDataError,
    InvalidArgumentError,
)

THRESHOLD_ENDOGENOUS = "endogenous_spread"
THRESHOLD_EXOGENOUS = "exogenous"


def vec(mat: np.ndarray) -> np.ndarray:
    """Column-major (column-stacking) vectorization."""
    return np.asarray(mat).flatten(order="F")


def unvec(v: np.ndarray, m: int, n: int) -> np.ndarray:
    """Inverse of :func:`vec` for an m-by-n matrix."""
    return np.asarray(v).reshape((m, n), order="F")


def row_spread(X: np.ndarray) -> float:
    """Mean over columns of (last row minus first row) of a single matrix.

    This is the endogenous row threshold variable z_t.
    """
    X = np.asarray(X)
    return float(np.mean(X[-1, :] - X[0, :]))


def col_spread(X: np.ndarray) -> float:
    """Mean over rows of (last column minus first column): endogenous w_t."""
    X = np.asarray(X)
    return float(np.mean(X[:, -1] - X[:, 0]))


def _frozen_array(a, dtype=float, ndim=None, name="array") -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    if ndim is not None and arr.ndim != ndim:
        raise InvalidArgumentError(f"{name} must have {ndim} dimensions, got {arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{name} contains non-finite entries")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class MatrixSeries:
    """An observed matrix path with aligned threshold-variable paths.

    Parameters
    ----------
    X : ndarray, shape (T, m, n)
        The matrix observations.
    z, w : ndarray, shape (T,)
        Row and column threshold variables aligned with X.
    threshold_mode : str
        ``"endogenous_spread"`` if z and w are the row/column spread
        functions of X (recomputable from X), else ``"exogenous"``.
    """

    X: np.ndarray
    z: np.ndarray
    w: np.ndarray
    threshold_mode: str = THRESHOLD_EXOGENOUS

    def __post_init__(self):
        X = _frozen_array(self.X, ndim=3, name="X")
        z = _frozen_array(self.z, ndim=1, name="z")
        w = _frozen_array(self.w, ndim=1, name="w")
        if X.shape[0] != z.shape[0] or X.shape[0] != w.shape[0]:
            raise InvalidArgumentError("X, z and w must share the same length")
        if self.threshold_mode not in (THRESHOLD_ENDOGENOUS, THRESHOLD_EXOGENOUS):
            raise InvalidArgumentError(f"unknown threshold_mode {self.threshold_mode!r}")
        if self.threshold_mode == THRESHOLD_ENDOGENOUS:
            zc = np.array([row_spread(Xt) for Xt in X])
            wc = np.array([col_spread(Xt) for Xt in X])
            if not (np.array_equal(zc, z) and np.array_equal(wc, w)):
                raise InvalidArgumentError(
                    "endogenous threshold variables are not recomputable from X"
                )
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "w", w)

    @property
    def T(self) -> int:
        return self.X.shape[0]

    @property
    def m(self) -> int:
        return self.X.shape[1]

    @property
    def n(self) -> int:
        return self.X.shape[2]

    @classmethod
    def from_path(cls, X) -> "MatrixSeries":
        """Build a series with endogenous spread thresholds computed from X."""
        X = np.asarray(X, dtype=float)
        z = np.array([row_spread(Xt) for Xt in X])
        w = np.array([col_spread(Xt) for Xt in X])
        return cls(X=X, z=z, w=w, threshold_mode=THRESHOLD_ENDOGENOUS)


@dataclass(frozen=True)
class CoefSet:
    """The four autoregressive matrices (A1, A2 row-wise; B1, B2 column-wise).

    ``normalized`` flags that the identification rule holds: the Frobenius
    norm of A1 equals 1 and (B1)[0, 0] >= 0.  Intermediate iterates in the
    alternating solver are unnormalized, hence a flag rather than an
    invariant enforced at construction.
    """

    A1: np.ndarray
    A2: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        A1 = _frozen_array(self.A1, ndim=2, name="A1")
        A2 = _frozen_array(self.A2, ndim=2, name="A2")
        B1 = _frozen_array(self.B1, ndim=2, name="B1")
        B2 = _frozen_array(self.B2, ndim=2, name="B2")
        m, n = A1.shape[0], B1.shape[0]
        for name, M, d in (("A1", A1, m), ("A2", A2, m), ("B1", B1, n), ("B2", B2, n)):
            if M.shape != (d, d):
                raise InvalidArgumentError(f"{name} must be square of size {d}, got {M.shape}")
        if self.normalized:
            if abs(np.linalg.norm(A1) - 1.0) > 1e-12:
                raise InvalidArgumentError("normalized CoefSet requires ||A1||_F == 1")
            if B1[0, 0] < 0:
                raise InvalidArgumentError("normalized CoefSet requires (B1)[0,0] >= 0")
        for nm, M in (("A1", A1), ("A2", A2), ("B1", B1), ("B2", B2)):
            object.__setattr__(self, nm, M)

    @property
    def m(self) -> int:
        return self.A1.shape[0]

    @property
    def n(self) -> int:
        return self.B1.shape[0]

    def a(self, i: int) -> np.ndarray:
        """Row coefficient for regime i in {1, 2}."""
        return self.A1 if i == 1 else self.A2

    def b(self, j: int) -> np.ndarray:
        """Column coefficient for regime j in {1, 2}."""
        return self.B1 if j == 1 else self.B2


@dataclass(frozen=True)
class Thresholds:
    """The threshold pair: r for the row variable z, s for the column variable w."""

    r: float
    s: float

    def __post_init__(self):
        if not (math.isfinite(self.r) and math.isfinite(self.s)):
            raise InvalidArgumentError("thresholds must be finite")


@dataclass(frozen=True)
class ThetaParams:
    """Full parameter: coefficient set plus threshold pair."""

    coefs: CoefSet
    tau: Thresholds

    @property
    def n_coef_params(self) -> int:
        """Length of the flattened coefficient vector: 2(m^2 + n^2)."""
        m, n = self.coefs.m, self.coefs.n
        return 2 * (m * m + n * n)


class RegimeLabel(NamedTuple):
    """Regime indices: i selects the row coefficient, j the column one."""

    i: int
    j: int


def classify_regime(z_prev: float, w_prev: float, tau: Thresholds) -> RegimeLabel:
    """Map lagged threshold variables to the active regime.

    Boundary convention: equality belongs to regime 1 on each axis
    (z_prev <= r gives i = 1, strictly above gives i = 2; same for w and s).

    Raises
    ------
    InvalidArgumentError
        If z_prev or w_prev is not finite.
    """
    if not (math.isfinite(z_prev) and math.isfinite(w_prev)):
        raise InvalidArgumentError("threshold variables must be finite")
    i = 1 if z_prev <= tau.r else 2
    j = 1 if w_prev <= tau.s else 2
    return RegimeLabel(i, j)


def regime_counts(series: MatrixSeries, tau: Thresholds) -> np.ndarray:
    """2x2 table counting transitions t = 2..T by regime of (z_{t-1}, w_{t-1}).

    Entry [i-1, j-1] counts the steps governed by (A_i, B_j); the entries
    sum to T - 1.
    """
    if series.T < 2:
        raise InsufficientDataError("need at least 2 observations to count regimes")
    zp = series.z[:-1]
    wp = series.w[:-1]
    hi_z = zp > tau.r
    hi_w = wp > tau.s
    counts = np.empty((2, 2), dtype=int)
    for i in (0, 1):
        for j in (0, 1):
            counts[i, j] = int(np.sum((hi_z == bool(i)) & (hi_w == bool(j))))
    return counts


def kron_coefficient(coefs: CoefSet, label: RegimeLabel) -> np.ndarray:
    """The mn-by-mn vectorized-form coefficient B_j kron A_i for one regime.

    With column-major vec, vec(A_i X B_j') = (B_j kron A_i) vec(X).
    """
    return np.kron(coefs.b(label.j), coefs.a(label.i))


def normalize(coefs: CoefSet) -> CoefSet:
    """Rescale to the identification rule, preserving all Kronecker products.

    Divides both A's by c = ||A1||_F, multiplies both B's by c, then flips
    the sign of all four matrices if needed so that (B1)[0, 0] >= 0.  A zero
    (B1)[0, 0] is treated as already satisfying the sign rule.  Idempotent.

    Raises
    ------
    DegenerateCoefficientError
        If ||A1||_F == 0.
    """
    c = float(np.linalg.norm(coefs.A1))
    if c == 0.0:
        raise DegenerateCoefficientError("cannot normalize: ||A1||_F is zero")
    b11 = coefs.B1[0, 0] * c
    sigma = -1.0 if b11 < 0 else 1.0
    return CoefSet(
        A1=coefs.A1 * (sigma / c),
        A2=coefs.A2 * (sigma / c),
        B1=coefs.B1 * (sigma * c),
        B2=coefs.B2 * (sigma * c),
        normalized=True,
    )


def predict_one(
    X_prev: np.ndarray, theta: ThetaParams, z_prev: float, w_prev: float
) -> np.ndarray:
    """One-step conditional mean A_i X_prev B_j' at the regime of (z_prev, w_prev)."""
    label = classify_regime(z_prev, w_prev, theta.tau)
    A = theta.coefs.a(label.i)
    B = theta.coefs.b(label.j)
    return A @ np.asarray(X_prev) @ B.T
