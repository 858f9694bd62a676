"""Comparison model zoo sharing the core data model.

Every model exposes the same surface: a fit that reports its in-sample loss
(same 1/T normalization as the threshold model) and parameter count, and a
one-step conditional-mean predictor.  Threshold baselines with a single
threshold variable can be driven by either z or w (``threshold_axis``), or
by whichever fits better in sample (``"auto"``).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Optional, Tuple

import numpy as np

from .core import (
    CoefSet,
    MatrixSeries,
    ThetaParams,
    Thresholds,
    classify_regime,
    predict_one,
    unvec,
    vec,
)
from .estimate import (
    AlsOptions,
    GridSpec,
    _admissible_values,
    _als_single,
    _CellStats,
    _resolve_init,
    _split,
    _subsample,
    grid_search_fit,
)
from .exceptions import EstimationError, InvalidArgumentError


class ModelTag(str, Enum):
    TWO_MART = "2mart"
    KTMAR = "ktmar"
    SMART = "smart"
    TMAR = "tmar"
    TMAR3 = "tmar3"
    MAR = "mar"
    VAR = "var"
    RRVAR = "rrvar"


AXIS_Z = "z"
AXIS_W = "w"
AXIS_AUTO = "auto"

_SINGLE_AXIS_TAGS = (ModelTag.SMART, ModelTag.TMAR, ModelTag.TMAR3)


@dataclass(frozen=True)
class ModelKind:
    """A model selector: tag plus model-specific knobs.

    ``rank_k`` applies to the reduced-rank vector model only;
    ``threshold_axis`` to models driven by a single threshold variable.
    """

    tag: ModelTag
    rank_k: Optional[int] = None
    threshold_axis: str = AXIS_Z

    def __post_init__(self):
        object.__setattr__(self, "tag", ModelTag(self.tag))
        if self.threshold_axis not in (AXIS_Z, AXIS_W, AXIS_AUTO):
            raise InvalidArgumentError(f"unknown threshold_axis {self.threshold_axis!r}")
        if self.tag == ModelTag.RRVAR and self.rank_k is not None and self.rank_k < 1:
            raise InvalidArgumentError("rank_k must be >= 1")


def param_count(kind: ModelKind, m: int, n: int, k: Optional[int] = None) -> int:
    """Number of raw parameters (coefficients plus thresholds) of a model."""
    mn2 = m * m + n * n
    tag = kind.tag
    if tag == ModelTag.TWO_MART:
        return 2 * mn2 + 2
    if tag == ModelTag.KTMAR:
        return 4 * mn2 + 2
    if tag == ModelTag.SMART:
        return 2 * mn2 + 2
    if tag == ModelTag.TMAR:
        return 2 * mn2 + 1
    if tag == ModelTag.TMAR3:
        return 3 * mn2 + 2
    if tag == ModelTag.MAR:
        return mn2
    if tag == ModelTag.VAR:
        return m * m * n * n
    if tag == ModelTag.RRVAR:
        rank = k if k is not None else kind.rank_k
        if rank is None or not (1 <= rank <= m * n):
            raise InvalidArgumentError("rrvar requires rank_k in [1, mn]")
        return 2 * m * n * rank
    raise InvalidArgumentError(f"unknown model tag {tag!r}")


@dataclass(frozen=True)
class BaselineFit:
    """Uniform fit container for every model kind."""

    kind: ModelKind
    parameters: Dict[str, np.ndarray]
    thresholds: Tuple[float, ...]
    loss: float
    param_count: int
    extras: Dict[str, object] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# linear vector models


def _vec_design(series: MatrixSeries):
    Xs, Xp, _, _ = _split(series)
    N, m, n = Xs.shape
    Y = Xs.transpose(0, 2, 1).reshape(N, m * n)
    Z = Xp.transpose(0, 2, 1).reshape(N, m * n)
    return Y, Z


def _ols_coef(Y, Z):
    """C minimizing sum ||y_t - C z_t||^2 with ridge fallback."""
    G = Z.T @ Z
    R = Z.T @ Y
    try:
        C = np.linalg.solve(G, R).T
        if np.all(np.isfinite(C)):
            return C, False
    except np.linalg.LinAlgError:
        pass
    lam = 1e-8 * np.trace(G) / G.shape[0]
    if lam <= 0:
        lam = 1e-12
    C = np.linalg.solve(G + lam * np.eye(G.shape[0]), R).T
    return C, True


def _fit_var(series: MatrixSeries, kind: ModelKind) -> BaselineFit:
    Y, Z = _vec_design(series)
    C, ridge = _ols_coef(Y, Z)
    resid = Y - Z @ C.T
    L = float(np.sum(resid * resid)) / series.T
    return BaselineFit(
        kind=kind,
        parameters={"coef": C},
        thresholds=(),
        loss=L,
        param_count=param_count(kind, series.m, series.n),
        extras={"ridge_used": ridge},
    )


def _fit_rrvar(series: MatrixSeries, kind: ModelKind) -> BaselineFit:
    mn = series.m * series.n
    rank = kind.rank_k
    if rank is None or not (1 <= rank <= mn):
        raise InvalidArgumentError(f"rrvar requires rank_k in [1, {mn}]")
    Y, Z = _vec_design(series)
    C_ols, ridge = _ols_coef(Y, Z)
    resid = Y - Z @ C_ols.T
    sigma = resid.T @ resid / len(Y)
    sigma += 1e-10 * max(np.trace(sigma) / mn, 1e-12) * np.eye(mn)
    Sxx = Z.T @ Z / len(Z)

    def _mat_power(S, power):
        lam, U = np.linalg.eigh(S)
        lam = np.clip(lam, 1e-14, None)
        return (U * lam**power) @ U.T

    W_half = _mat_power(sigma, -0.5)
    W_half_inv = _mat_power(sigma, 0.5)
    S_half = _mat_power(Sxx, 0.5)
    S_half_inv = _mat_power(Sxx, -0.5)
    M = W_half @ C_ols @ S_half
    U, d, Vt = np.linalg.svd(M)
    d_trunc = np.concatenate((d[:rank], np.zeros(mn - rank)))
    C = W_half_inv @ (U * d_trunc) @ Vt @ S_half_inv
    resid_k = Y - Z @ C.T
    L = float(np.sum(resid_k * resid_k)) / series.T
    return BaselineFit(
        kind=kind,
        parameters={"coef": C},
        thresholds=(),
        loss=L,
        param_count=param_count(kind, series.m, series.n),
        extras={"ridge_used": ridge, "rank": rank},
    )


# ---------------------------------------------------------------------------
# single- and multi-regime matrix models


def _regime_fit(Xs, Xp, mask, T_norm, A0, B0, options):
    """Fit one regime's (A, B) on its subsample; returns (A, B, loss_share)."""
    stats = _CellStats(Xs, Xp, mask, T_norm)
    A, B, trace, _, _ = _als_single(stats, A0, B0, options.max_iters, options.rel_tol)
    return A, B, float(trace[-1])


def _fit_mar(series: MatrixSeries, kind: ModelKind, options: AlsOptions) -> BaselineFit:
    Xs, Xp, zp, _ = _split(series)
    mask = np.ones(len(zp), dtype=bool)
    m, n = series.m, series.n
    A, B, L = _regime_fit(Xs, Xp, mask, series.T, np.eye(m), np.eye(n), options)
    return BaselineFit(
        kind=kind,
        parameters={"A": A, "B": B},
        thresholds=(),
        loss=L,
        param_count=param_count(kind, m, n),
    )


def _axis_values(series: MatrixSeries, axis: str) -> np.ndarray:
    return series.z[:-1] if axis == AXIS_Z else series.w[:-1]


def _threshold_pool(series, v, grid):
    minocc = max(series.m**2, series.n**2) + 1
    pool = _admissible_values(v, grid, minocc)
    return _subsample(pool, grid.max_candidates_per_axis)


def _fit_tmar_axis(series, kind, grid, options, axis) -> BaselineFit:
    Xs, Xp, _, _ = _split(series)
    v = _axis_values(series, axis)
    cands = _threshold_pool(series, v, grid)
    if len(cands) == 0:
        raise EstimationError("no admissible threshold candidates for the tmar fit")
    init = _resolve_init(series, options)
    best = None
    for c in cands:
        lo = v <= c
        A1, B1, L1 = _regime_fit(Xs, Xp, lo, series.T, init.A1, init.B1, options)
        A2, B2, L2 = _regime_fit(Xs, Xp, ~lo, series.T, init.A2, init.B2, options)
        L = L1 + L2
        key = (L, c)
        if best is None or key < best[0]:
            best = (key, c, (A1, B1, A2, B2))
    _, c, (A1, B1, A2, B2) = best
    return BaselineFit(
        kind=kind,
        parameters={"A1": A1, "B1": B1, "A2": A2, "B2": B2},
        thresholds=(float(c),),
        loss=float(best[0][0]),
        param_count=param_count(kind, series.m, series.n),
        extras={"axis": axis},
    )


def _fit_tmar3_axis(series, kind, grid, options, axis) -> BaselineFit:
    Xs, Xp, _, _ = _split(series)
    v = _axis_values(series, axis)
    minocc = max(series.m**2, series.n**2) + 1
    cands = _threshold_pool(series, v, grid)
    sv = np.sort(v)
    best = None
    init = _resolve_init(series, options)
    for a_idx in range(len(cands)):
        for b_idx in range(a_idx + 1, len(cands)):
            c1, c2 = cands[a_idx], cands[b_idx]
            n1 = int(np.searchsorted(sv, c1, side="right"))
            n2 = int(np.searchsorted(sv, c2, side="right")) - n1
            n3 = len(v) - n1 - n2
            if min(n1, n2, n3) < minocc:
                continue
            r1 = v <= c1
            r2 = (v > c1) & (v <= c2)
            r3 = v > c2
            A1, B1, L1 = _regime_fit(Xs, Xp, r1, series.T, init.A1, init.B1, options)
            A2, B2, L2 = _regime_fit(Xs, Xp, r2, series.T, init.A1, init.B1, options)
            A3, B3, L3 = _regime_fit(Xs, Xp, r3, series.T, init.A2, init.B2, options)
            L = L1 + L2 + L3
            key = (L, c1, c2)
            if best is None or key < best[0]:
                best = (key, (c1, c2), (A1, B1, A2, B2, A3, B3))
    if best is None:
        raise EstimationError("no admissible threshold pairs for the tmar3 fit")
    _, (c1, c2), (A1, B1, A2, B2, A3, B3) = best
    return BaselineFit(
        kind=kind,
        parameters={"A1": A1, "B1": B1, "A2": A2, "B2": B2, "A3": A3, "B3": B3},
        thresholds=(float(c1), float(c2)),
        loss=float(best[0][0]),
        param_count=param_count(kind, series.m, series.n),
        extras={"axis": axis},
    )


def _fit_smart_axis(series, kind, grid, options, axis) -> BaselineFit:
    v = series.z if axis == AXIS_Z else series.w
    shared = MatrixSeries(X=series.X, z=v, w=v, threshold_mode="exogenous")
    fit = grid_search_fit(shared, grid, options)
    theta = fit.theta_hat
    return BaselineFit(
        kind=kind,
        parameters={
            "A1": theta.coefs.A1,
            "A2": theta.coefs.A2,
            "B1": theta.coefs.B1,
            "B2": theta.coefs.B2,
        },
        thresholds=(theta.tau.r, theta.tau.s),
        loss=fit.loss,
        param_count=param_count(kind, series.m, series.n),
        extras={"axis": axis, "converged": fit.converged},
    )


def _fit_ktmar(series, kind, grid, options) -> BaselineFit:
    Xs, Xp, zp, wp = _split(series)
    minocc = max(series.m**2, series.n**2) + 1
    r_cands = _threshold_pool(series, zp, grid)
    s_cands = _threshold_pool(series, wp, grid)
    init = _resolve_init(series, options)
    best = None
    for r in r_cands:
        lo_z = zp <= r
        for s in s_cands:
            lo_w = wp <= s
            masks = {
                (1, 1): lo_z & lo_w,
                (2, 1): ~lo_z & lo_w,
                (1, 2): lo_z & ~lo_w,
                (2, 2): ~lo_z & ~lo_w,
            }
            if min(int(mk.sum()) for mk in masks.values()) < minocc:
                continue
            L = 0.0
            params = {}
            for (i, j), mk in masks.items():
                A, B, Lc = _regime_fit(
                    Xs, Xp, mk, series.T, init.a(i), init.b(j), options
                )
                params[f"A{i}{j}"] = A
                params[f"B{i}{j}"] = B
                L += Lc
            key = (L, r, s)
            if best is None or key < best[0]:
                best = (key, (r, s), params)
    if best is None:
        raise EstimationError(
            "no admissible threshold pairs leave all four cells populated"
        )
    _, (r, s), params = best
    return BaselineFit(
        kind=kind,
        parameters=params,
        thresholds=(float(r), float(s)),
        loss=float(best[0][0]),
        param_count=param_count(kind, series.m, series.n),
    )


def _fit_two_mart(series, kind, grid, options) -> BaselineFit:
    fit = grid_search_fit(series, grid, options)
    theta = fit.theta_hat
    return BaselineFit(
        kind=kind,
        parameters={
            "A1": theta.coefs.A1,
            "A2": theta.coefs.A2,
            "B1": theta.coefs.B1,
            "B2": theta.coefs.B2,
        },
        thresholds=(theta.tau.r, theta.tau.s),
        loss=fit.loss,
        param_count=param_count(kind, series.m, series.n),
        extras={"converged": fit.converged},
    )


def fit_baseline(
    series: MatrixSeries,
    kind: ModelKind,
    grid: GridSpec = GridSpec(),
    options: AlsOptions = AlsOptions(),
) -> BaselineFit:
    """Fit any model of the zoo on a series.

    For single-threshold-variable models with ``threshold_axis="auto"`` both
    axes are fitted and the one with the smaller in-sample loss is kept
    (reported in ``extras["axis"]``).
    """
    tag = kind.tag
    if tag in _SINGLE_AXIS_TAGS and kind.threshold_axis == AXIS_AUTO:
        fits = [
            fit_baseline(series, dataclasses.replace(kind, threshold_axis=ax), grid, options)
            for ax in (AXIS_Z, AXIS_W)
        ]
        return min(fits, key=lambda f: (f.loss, f.extras.get("axis", "")))
    if tag == ModelTag.TWO_MART:
        return _fit_two_mart(series, kind, grid, options)
    if tag == ModelTag.KTMAR:
        return _fit_ktmar(series, kind, grid, options)
    if tag == ModelTag.SMART:
        return _fit_smart_axis(series, kind, grid, options, kind.threshold_axis)
    if tag == ModelTag.TMAR:
        return _fit_tmar_axis(series, kind, grid, options, kind.threshold_axis)
    if tag == ModelTag.TMAR3:
        return _fit_tmar3_axis(series, kind, grid, options, kind.threshold_axis)
    if tag == ModelTag.MAR:
        return _fit_mar(series, kind, options)
    if tag == ModelTag.VAR:
        return _fit_var(series, kind)
    if tag == ModelTag.RRVAR:
        return _fit_rrvar(series, kind)
    raise InvalidArgumentError(f"unknown model tag {tag!r}")


def predict_baseline(
    fit: BaselineFit, X_prev: np.ndarray, z_prev: float, w_prev: float
) -> np.ndarray:
    """One-step conditional mean under a fitted model."""
    X_prev = np.asarray(X_prev, dtype=float)
    tag = fit.kind.tag
    p = fit.parameters
    if tag in (ModelTag.TWO_MART, ModelTag.SMART):
        if tag == ModelTag.SMART:
            v = z_prev if fit.extras.get("axis", AXIS_Z) == AXIS_Z else w_prev
            z_prev = w_prev = v
        theta = ThetaParams(
            coefs=CoefSet(A1=p["A1"], A2=p["A2"], B1=p["B1"], B2=p["B2"]),
            tau=Thresholds(*fit.thresholds),
        )
        return predict_one(X_prev, theta, z_prev, w_prev)
    if tag == ModelTag.KTMAR:
        label = classify_regime(z_prev, w_prev, Thresholds(*fit.thresholds))
        A = p[f"A{label.i}{label.j}"]
        B = p[f"B{label.i}{label.j}"]
        return A @ X_prev @ B.T
    if tag in (ModelTag.TMAR, ModelTag.TMAR3):
        v = z_prev if fit.extras.get("axis", AXIS_Z) == AXIS_Z else w_prev
        if tag == ModelTag.TMAR:
            k = 1 if v <= fit.thresholds[0] else 2
        else:
            k = 1 if v <= fit.thresholds[0] else (2 if v <= fit.thresholds[1] else 3)
        return p[f"A{k}"] @ X_prev @ p[f"B{k}"].T
    if tag == ModelTag.MAR:
        return p["A"] @ X_prev @ p["B"].T
    if tag in (ModelTag.VAR, ModelTag.RRVAR):
        m, n = X_prev.shape
        return unvec(p["coef"] @ vec(X_prev), m, n)
    raise InvalidArgumentError(f"unknown model tag {tag!r}")
