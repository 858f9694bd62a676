"""Least squares estimation: alternating closed-form updates and grid search.

At a fixed threshold pair the sum-of-squared-error objective

    L_T = (1/T) * sum_{t=2..T} || X_t - A_i X_{t-1} B_j' ||_F^2

is minimized by alternating exact solves of the stationarity conditions for
(B1, B2) given (A1, A2) and vice versa, renormalizing to the identification
rule each sweep.  The threshold pair itself is found by profiling L_T over a
grid of sample values of the threshold variables.

Everything is computed from per-regime sufficient statistics

    Cp[i,j][a,p,b,q] = sum_t (X_{t-1})_{a,p} (X_{t-1})_{b,q}
    D [i,j][a,p,b,q] = sum_t (X_t)_{a,p} (X_{t-1})_{b,q}

accumulated over the cell (i, j), so one ALS sweep costs O((mn)^2)
independent of T and a grid candidate costs one pass over the sample.
"""

from __future__ import annotations

import dataclasses
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from multiprocessing import get_context
from typing import Optional, Tuple, Union

import numpy as np

from .core import (
    CoefSet,
    MatrixSeries,
    ThetaParams,
    Thresholds,
    normalize,
)
from .exceptions import (
    DegenerateCoefficientError,
    EstimationError,
    InsufficientDataError,
    InvalidArgumentError,
)

SOURCE_SAMPLE = "sample"
SOURCE_QUANTILE = "quantile"

WARM_SHARED = "shared"
WARM_NEIGHBOR = "neighbor"


@dataclass(frozen=True)
class GridSpec:
    """Threshold candidate grid construction.

    Candidates are sample values (or uniform quantiles) of the lagged
    threshold variables between the ``trim_fraction`` and
    ``1 - trim_fraction`` empirical quantiles, subsampled evenly to at most
    ``max_candidates_per_axis`` per axis.  Candidates leaving either side of
    a marginal regime with fewer than max(m^2, n^2) + 1 observations are
    excluded.  Explicit ``r_candidates`` / ``s_candidates`` override the
    construction and are used as given (no trimming or occupancy filter).

    ``warm_start``: "shared" initializes the solver identically at every
    candidate (from the model-wide single-regime fit); "neighbor" walks the
    grid sequentially, starting each candidate from its predecessor's
    solution (faster per candidate, but inherently serial).
    """

    trim_fraction: float = 0.1
    max_candidates_per_axis: int = 100
    candidate_source: str = SOURCE_SAMPLE
    r_candidates: Optional[np.ndarray] = None
    s_candidates: Optional[np.ndarray] = None
    warm_start: str = WARM_SHARED

    def __post_init__(self):
        if not (0 <= self.trim_fraction < 0.5):
            raise InvalidArgumentError("trim_fraction must lie in [0, 0.5)")
        if self.max_candidates_per_axis < 2:
            raise InvalidArgumentError("max_candidates_per_axis must be >= 2")
        if self.candidate_source not in (SOURCE_SAMPLE, SOURCE_QUANTILE):
            raise InvalidArgumentError(f"unknown candidate_source {self.candidate_source!r}")
        if self.warm_start not in (WARM_SHARED, WARM_NEIGHBOR):
            raise InvalidArgumentError(f"unknown warm_start {self.warm_start!r}")
        for name in ("r_candidates", "s_candidates"):
            cand = getattr(self, name)
            if cand is not None:
                arr = np.sort(np.unique(np.asarray(cand, dtype=float)))
                if arr.size == 0 or not np.all(np.isfinite(arr)):
                    raise InvalidArgumentError(f"{name} must be non-empty and finite")
                arr.flags.writeable = False
                object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class AlsOptions:
    """Alternating solver controls.

    ``init`` is "mar" (single-regime fit as warm start), "identity", or an
    explicit CoefSet.  The sweep loop stops when the loss change satisfies
    |L_prev - L| <= rel_tol * |L_prev| or after ``max_iters`` sweeps.
    """

    max_iters: int = 200
    rel_tol: float = 1e-8
    init: Union[str, CoefSet] = "mar"

    def __post_init__(self):
        if self.max_iters < 1:
            raise InvalidArgumentError("max_iters must be >= 1")
        if self.rel_tol <= 0:
            raise InvalidArgumentError("rel_tol must be positive")
        if isinstance(self.init, str) and self.init not in ("mar", "identity"):
            raise InvalidArgumentError(f"unknown init {self.init!r}")


@dataclass(frozen=True)
class FitResult:
    """Outcome of a threshold-model fit.

    ``theta_hat`` is normalized; ``loss_trace`` holds the objective at the
    initial point and after each sweep and is non-increasing (up to
    renormalization rounding); ``residuals`` has one m-by-n matrix per
    transition.  ``held_updates`` lists coefficient blocks that could not be
    updated because their marginal regime was empty.
    """

    theta_hat: ThetaParams
    loss: float
    loss_trace: np.ndarray
    residuals: np.ndarray
    regime_counts: np.ndarray
    converged: bool
    n_iters: int
    ridge_used: bool = False
    held_updates: Tuple[str, ...] = ()
    r_candidates: Optional[np.ndarray] = None
    s_candidates: Optional[np.ndarray] = None
    profile_loss: Optional[np.ndarray] = None


# ---------------------------------------------------------------------------
# sufficient statistics


class _SuffStats:
    __slots__ = ("Cp", "D", "sq_total", "counts", "T_norm", "m", "n")

    def __init__(self, Xs, Xp, hi_z, hi_w, T_norm):
        m, n = Xs.shape[1], Xs.shape[2]
        Cp = np.zeros((2, 2, m, n, m, n))
        D = np.zeros((2, 2, m, n, m, n))
        counts = np.zeros((2, 2), dtype=int)
        sq_total = 0.0
        for i in (0, 1):
            for j in (0, 1):
                mask = (hi_z == bool(i)) & (hi_w == bool(j))
                cnt = int(np.count_nonzero(mask))
                counts[i, j] = cnt
                if cnt == 0:
                    continue
                Xs_c = Xs[mask]
                Xp_c = Xp[mask]
                Cp[i, j] = np.einsum("tap,tbq->apbq", Xp_c, Xp_c)
                D[i, j] = np.einsum("tap,tbq->apbq", Xs_c, Xp_c)
                sq_total += float(np.einsum("tap,tap->", Xs_c, Xs_c))
        self.Cp, self.D, self.sq_total = Cp, D, sq_total
        self.counts, self.T_norm = counts, T_norm
        self.m, self.n = m, n


def _split(series: MatrixSeries):
    if series.T < 2:
        raise InsufficientDataError("need at least 2 observations")
    X = series.X
    return X[1:], X[:-1], series.z[:-1], series.w[:-1]


def _stats_at(series: MatrixSeries, tau: Thresholds) -> _SuffStats:
    Xs, Xp, zp, wp = _split(series)
    return _SuffStats(Xs, Xp, zp > tau.r, wp > tau.s, series.T)


# ---------------------------------------------------------------------------
# alternating solver


def _solve_coef(G, num, ridge_flag):
    """Solve coef @ G = num for coef with a ridge fallback on singular G."""
    try:
        sol = np.linalg.solve(G, num.T).T
        if np.all(np.isfinite(sol)):
            return sol, ridge_flag
    except np.linalg.LinAlgError:
        pass
    lam = 1e-8 * np.trace(G) / G.shape[0]
    if lam <= 0:
        lam = 1e-12
    sol = np.linalg.solve(G + lam * np.eye(G.shape[0]), num.T).T
    return sol, True


def _renorm_arrays(A1, A2, B1, B2):
    c = np.linalg.norm(A1)
    if c == 0.0:
        raise DegenerateCoefficientError("solver produced a zero A1")
    sigma = -1.0 if B1[0, 0] * c < 0 else 1.0
    return A1 * (sigma / c), A2 * (sigma / c), B1 * (sigma * c), B2 * (sigma * c)


def _loss_from_stats(stats: _SuffStats, A, B):
    """Objective value given stacked coefficients A (2,m,m), B (2,n,n)."""
    M = np.einsum("iba,ibc->iac", A, A)  # A_i' A_i
    N = np.einsum("jqp,jqr->jpr", B, B)  # B_j' B_j
    cross = np.einsum("iab,jpq,ijapbq->", A, B, stats.D)
    quad = np.einsum("iab,jpq,ijapbq->", M, N, stats.Cp)
    return (stats.sq_total - 2.0 * cross + quad) / stats.T_norm


def _block_grad_norms(stats, A, B, row_alive, col_alive):
    """(1/T)-scaled stationarity residual norms of the updatable blocks."""
    M = np.einsum("iba,ibc->iac", A, A)
    N = np.einsum("jqp,jqr->jpr", B, B)
    GB = np.einsum("iab,ijapbq->jpq", M, stats.Cp)
    NB = np.einsum("iab,ijapbq->jpq", A, stats.D)
    GA = np.einsum("jpq,ijapbq->iab", N, stats.Cp)
    NA = np.einsum("jpq,ijapbq->iab", B, stats.D)
    norms = []
    for i in (0, 1):
        if row_alive[i]:
            norms.append(np.linalg.norm(A[i] @ GA[i] - NA[i]) / stats.T_norm)
    for j in (0, 1):
        if col_alive[j]:
            norms.append(np.linalg.norm(B[j] @ GB[j] - NB[j]) / stats.T_norm)
    return max(norms) if norms else 0.0


def _als_core(stats: _SuffStats, init: CoefSet, max_iters: int, rel_tol: float,
              grad_tol=None):
    """Alternating sweeps on sufficient statistics.

    Convergence requires the relative loss change to drop below ``rel_tol``;
    when ``grad_tol`` is given, the stationarity residuals must additionally
    fall below grad_tol * (1 + |loss|).  Returns stacked coefficient arrays
    plus the loss trace, convergence flag, ridge flag, and names of held
    (non-updatable) blocks.
    """
    A = np.stack([np.array(init.A1), np.array(init.A2)])
    B = np.stack([np.array(init.B1), np.array(init.B2)])
    row_alive = stats.counts.sum(axis=1) > 0
    col_alive = stats.counts.sum(axis=0) > 0
    held = tuple(
        name
        for name, alive in (
            ("A1", row_alive[0]),
            ("A2", row_alive[1]),
            ("B1", col_alive[0]),
            ("B2", col_alive[1]),
        )
        if not alive
    )
    ridge_used = False
    trace = [_loss_from_stats(stats, A, B)]
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        M = np.einsum("iba,ibc->iac", A, A)
        GB = np.einsum("iab,ijapbq->jpq", M, stats.Cp)
        NB = np.einsum("iab,ijapbq->jpq", A, stats.D)
        for j in (0, 1):
            if col_alive[j]:
                B[j], ridge_used = _solve_coef(GB[j], NB[j], ridge_used)
        N = np.einsum("jqp,jqr->jpr", B, B)
        GA = np.einsum("jpq,ijapbq->iab", N, stats.Cp)
        NA = np.einsum("jpq,ijapbq->iab", B, stats.D)
        for i in (0, 1):
            if row_alive[i]:
                A[i], ridge_used = _solve_coef(GA[i], NA[i], ridge_used)
        A[0], A[1], B[0], B[1] = _renorm_arrays(A[0], A[1], B[0], B[1])
        L = _loss_from_stats(stats, A, B)
        trace.append(L)
        if abs(trace[-2] - L) <= rel_tol * abs(trace[-2]):
            if grad_tol is None or _block_grad_norms(
                stats, A, B, row_alive, col_alive
            ) <= grad_tol * (1.0 + abs(L)):
                converged = True
                break
    return A, B, np.array(trace), converged, it, ridge_used, held


def _resolve_init(series: MatrixSeries, options: AlsOptions) -> CoefSet:
    if isinstance(options.init, CoefSet):
        return options.init
    if options.init == "identity":
        m, n = series.m, series.n
        return CoefSet(A1=np.eye(m), A2=np.eye(m), B1=np.eye(n), B2=np.eye(n))
    return mar_init(series, options)


# ---------------------------------------------------------------------------
# public operations


def _residual_loss(series: MatrixSeries, coefs: CoefSet, tau: Thresholds):
    """Residual matrices and the exact objective value at (coefs, tau)."""
    Xs, Xp, zp, wp = _split(series)
    hi_z, hi_w = zp > tau.r, wp > tau.s
    resid = np.empty_like(Xs)
    counts = np.zeros((2, 2), dtype=int)
    for i in (0, 1):
        for j in (0, 1):
            mask = (hi_z == bool(i)) & (hi_w == bool(j))
            counts[i, j] = int(np.count_nonzero(mask))
            if counts[i, j]:
                Ai = coefs.a(i + 1)
                Bj = coefs.b(j + 1)
                resid[mask] = Xs[mask] - np.einsum("ab,tbq,pq->tap", Ai, Xp[mask], Bj)
    return resid, counts, float(np.sum(resid * resid)) / series.T


def loss(series: MatrixSeries, theta: ThetaParams) -> float:
    """The sum-of-squared-error objective (1/T normalized) at theta."""
    _, _, L = _residual_loss(series, theta.coefs, theta.tau)
    return L


def gradient_residuals(series: MatrixSeries, theta: ThetaParams) -> dict:
    """(1/T)-scaled stationarity-condition residual matrices per block.

    At an exact optimum of the objective for fixed thresholds these four
    matrices are zero.
    """
    stats = _stats_at(series, theta.tau)
    A = np.stack([theta.coefs.A1, theta.coefs.A2])
    B = np.stack([theta.coefs.B1, theta.coefs.B2])
    M = np.einsum("iba,ibc->iac", A, A)
    N = np.einsum("jqp,jqr->jpr", B, B)
    GB = np.einsum("iab,ijapbq->jpq", M, stats.Cp)
    NB = np.einsum("iab,ijapbq->jpq", A, stats.D)
    GA = np.einsum("jpq,ijapbq->iab", N, stats.Cp)
    NA = np.einsum("jpq,ijapbq->iab", B, stats.D)
    T = stats.T_norm
    return {
        "A1": (A[0] @ GA[0] - NA[0]) / T,
        "A2": (A[1] @ GA[1] - NA[1]) / T,
        "B1": (B[0] @ GB[0] - NB[0]) / T,
        "B2": (B[1] @ GB[1] - NB[1]) / T,
    }


class _CellStats:
    """Sufficient statistics of one regime subsample (single-cell model)."""

    __slots__ = ("Cp", "D", "sq", "count", "T_norm")

    def __init__(self, Xs, Xp, mask, T_norm):
        Xs_c = Xs[mask]
        Xp_c = Xp[mask]
        self.count = int(Xs_c.shape[0])
        self.Cp = np.einsum("tap,tbq->apbq", Xp_c, Xp_c)
        self.D = np.einsum("tap,tbq->apbq", Xs_c, Xp_c)
        self.sq = float(np.einsum("tap,tap->", Xs_c, Xs_c))
        self.T_norm = T_norm


def _renorm_pair(A, B):
    c = np.linalg.norm(A)
    if c == 0.0:
        raise DegenerateCoefficientError("solver produced a zero row coefficient")
    sigma = -1.0 if B[0, 0] * c < 0 else 1.0
    return A * (sigma / c), B * (sigma * c)


def _cell_loss(stats: _CellStats, A, B):
    cross = np.einsum("ab,pq,apbq->", A, B, stats.D)
    quad = np.einsum("ab,pq,apbq->", A.T @ A, B.T @ B, stats.Cp)
    return (stats.sq - 2.0 * cross + quad) / stats.T_norm


def _als_single(stats: _CellStats, A0, B0, max_iters, rel_tol, grad_tol=None):
    """Alternating sweeps for the one-regime bilinear model."""
    A = np.array(A0, dtype=float)
    B = np.array(B0, dtype=float)
    ridge = False
    trace = [_cell_loss(stats, A, B)]
    converged = False
    for _ in range(max_iters):
        GB = np.einsum("ab,apbq->pq", A.T @ A, stats.Cp)
        NB = np.einsum("ab,apbq->pq", A, stats.D)
        B, ridge = _solve_coef(GB, NB, ridge)
        GA = np.einsum("pq,apbq->ab", B.T @ B, stats.Cp)
        NA = np.einsum("pq,apbq->ab", B, stats.D)
        A, ridge = _solve_coef(GA, NA, ridge)
        A, B = _renorm_pair(A, B)
        L = _cell_loss(stats, A, B)
        trace.append(L)
        if abs(trace[-2] - L) <= rel_tol * abs(trace[-2]):
            if grad_tol is None:
                converged = True
                break
            GB = np.einsum("ab,apbq->pq", A.T @ A, stats.Cp)
            NB = np.einsum("ab,apbq->pq", A, stats.D)
            gb = np.linalg.norm(B @ GB - NB) / stats.T_norm
            GA = np.einsum("pq,apbq->ab", B.T @ B, stats.Cp)
            NA = np.einsum("pq,apbq->ab", B, stats.D)
            ga = np.linalg.norm(A @ GA - NA) / stats.T_norm
            if max(ga, gb) <= grad_tol * (1.0 + abs(L)):
                converged = True
                break
    return A, B, np.array(trace), converged, ridge


def mar_init(series: MatrixSeries, options: AlsOptions = AlsOptions()) -> CoefSet:
    """Single-regime bilinear least squares fit, used as a warm start.

    Solves min over (A, B) of the pooled objective by the same alternating
    sweeps with one regime, starting from identity matrices.  Returns the
    normalized CoefSet with A1 = A2 and B1 = B2.
    """
    Xs, Xp, zp, wp = _split(series)
    stats = _CellStats(Xs, Xp, np.ones(len(zp), dtype=bool), series.T)
    m, n = series.m, series.n
    A, B, _, _, _ = _als_single(
        stats, np.eye(m), np.eye(n), options.max_iters, options.rel_tol, grad_tol=1e-6
    )
    return normalize(CoefSet(A1=A, A2=A, B1=B, B2=B))


def _result_from_fit(series, tau, A, B, trace, converged, n_iters, ridge, held):
    coefs = normalize(CoefSet(A1=A[0], A2=A[1], B1=B[0], B2=B[1]))
    resid, counts, exact_loss = _residual_loss(series, coefs, tau)
    return FitResult(
        theta_hat=ThetaParams(coefs=coefs, tau=tau),
        loss=exact_loss,
        loss_trace=trace,
        residuals=resid,
        regime_counts=counts,
        converged=converged,
        n_iters=n_iters,
        ridge_used=ridge,
        held_updates=held,
    )


def als_fit(
    series: MatrixSeries, tau: Thresholds, options: AlsOptions = AlsOptions()
) -> FitResult:
    """Fit the coefficient matrices at a fixed threshold pair."""
    stats = _stats_at(series, tau)
    init = _resolve_init(series, options)
    A, B, trace, converged, n_iters, ridge, held = _als_core(
        stats, init, options.max_iters, options.rel_tol, grad_tol=1e-6
    )
    return _result_from_fit(series, tau, A, B, trace, converged, n_iters, ridge, held)


# ---------------------------------------------------------------------------
# grid search


def _admissible_values(v: np.ndarray, grid: GridSpec, minocc: int) -> np.ndarray:
    sv = np.sort(v)
    if grid.candidate_source == SOURCE_QUANTILE:
        levels = np.linspace(grid.trim_fraction, 1.0 - grid.trim_fraction, 4096)
        pool = np.unique(np.quantile(v, levels))
    else:
        lo, hi = np.quantile(v, [grid.trim_fraction, 1.0 - grid.trim_fraction])
        pool = np.unique(v)
        pool = pool[(pool >= lo) & (pool <= hi)]
    n_le = np.searchsorted(sv, pool, side="right")
    keep = (n_le >= minocc) & (len(v) - n_le >= minocc)
    return pool[keep]


def _subsample(values: np.ndarray, cap: int) -> np.ndarray:
    if len(values) <= cap:
        return values
    idx = np.unique(np.round(np.linspace(0, len(values) - 1, cap)).astype(int))
    return values[idx]


def _candidate_axes(series, grid):
    zp = series.z[:-1]
    wp = series.w[:-1]
    minocc = max(series.m**2, series.n**2) + 1
    if grid.r_candidates is not None:
        r_c = np.asarray(grid.r_candidates)
    else:
        r_c = _subsample(_admissible_values(zp, grid, minocc), grid.max_candidates_per_axis)
    if grid.s_candidates is not None:
        s_c = np.asarray(grid.s_candidates)
    else:
        s_c = _subsample(_admissible_values(wp, grid, minocc), grid.max_candidates_per_axis)
    return r_c, s_c


def _profile_losses_serial(Xs, Xp, zp, wp, T_norm, r_c, s_c, pairs, init, options):
    out = np.empty(len(pairs))
    for k, (ir, js) in enumerate(pairs):
        stats = _SuffStats(Xs, Xp, zp > r_c[ir], wp > s_c[js], T_norm)
        _, _, trace, _, _, _, _ = _als_core(stats, init, options.max_iters, options.rel_tol)
        out[k] = trace[-1]
    return out


def _eval_chunk(args):
    (Xs, Xp, zp, wp, T_norm, r_c, s_c, pairs, init, options) = args
    return _profile_losses_serial(Xs, Xp, zp, wp, T_norm, r_c, s_c, pairs, init, options)


def grid_search_fit(
    series: MatrixSeries,
    grid: GridSpec = GridSpec(),
    options: AlsOptions = AlsOptions(),
    workers: int = 1,
) -> FitResult:
    """Profile the objective over the threshold grid and refit at the argmin.

    Candidates are evaluated independently (optionally across ``workers``
    processes); the reduction is a deterministic argmin with lexicographic
    tie-breaking on (r, s), so results are identical for any worker count.
    The returned result carries the candidate axes and the full profile-loss
    table for diagnostics.
    """
    Xs, Xp, zp, wp = _split(series)
    r_c, s_c = _candidate_axes(series, grid)
    if len(r_c) == 0 or len(s_c) == 0:
        raise EstimationError(
            "no admissible threshold candidates (sample too short for the trim "
            "and occupancy rules)"
        )
    init = _resolve_init(series, options)
    pairs = [(ir, js) for ir in range(len(r_c)) for js in range(len(s_c))]
    profile = np.empty((len(r_c), len(s_c)))

    if grid.warm_start == WARM_NEIGHBOR:
        current = init
        for ir in range(len(r_c)):
            for js in range(len(s_c)):
                stats = _SuffStats(Xs, Xp, zp > r_c[ir], wp > s_c[js], series.T)
                A, B, trace, _, _, _, _ = _als_core(
                    stats, current, options.max_iters, options.rel_tol
                )
                profile[ir, js] = trace[-1]
                current = CoefSet(A1=A[0], A2=A[1], B1=B[0], B2=B[1])
    elif workers <= 1 or len(pairs) < 4:
        losses = _profile_losses_serial(
            Xs, Xp, zp, wp, series.T, r_c, s_c, pairs, init, options
        )
        for (ir, js), L in zip(pairs, losses):
            profile[ir, js] = L
    else:
        n_chunks = min(len(pairs), 4 * workers)
        chunks = [pairs[k::n_chunks] for k in range(n_chunks)]
        ctx = get_context("fork")
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
            args = [
                (Xs, Xp, zp, wp, series.T, r_c, s_c, chunk, init, options)
                for chunk in chunks
            ]
            for chunk, losses in zip(chunks, pool.map(_eval_chunk, args)):
                for (ir, js), L in zip(chunk, losses):
                    profile[ir, js] = L

    best = min(
        ((profile[ir, js], r_c[ir], s_c[js]) for ir, js in pairs),
        key=lambda t: (t[0], t[1], t[2]),
    )
    tau_hat = Thresholds(r=float(best[1]), s=float(best[2]))
    refit_options = dataclasses.replace(options, init=init)
    result = als_fit(series, tau_hat, refit_options)
    return dataclasses.replace(
        result, r_candidates=r_c, s_candidates=s_c, profile_loss=profile
    )


def refine_search(
    series: MatrixSeries,
    grid: GridSpec = GridSpec(),
    options: AlsOptions = AlsOptions(),
    workers: int = 1,
    max_rounds: int = 10,
) -> FitResult:
    """Iterated grid search down to full sample resolution near the argmin.

    Runs :func:`grid_search_fit`, then re-grids on all admissible sample
    values near the best candidates and repeats until the winning windows
    are searched exhaustively.  The first zoom keeps the three best basins
    per axis (the coarse pass may rank shallow local minima wrongly); later
    zooms track only the current argmin.  Early rounds use a loosened solver
    tolerance; the final full-resolution rounds use the requested one.
    """
    zp = series.z[:-1]
    wp = series.w[:-1]
    minocc = max(series.m**2, series.n**2) + 1
    r_pool = (
        np.asarray(grid.r_candidates)
        if grid.r_candidates is not None
        else _admissible_values(zp, grid, minocc)
    )
    s_pool = (
        np.asarray(grid.s_candidates)
        if grid.s_candidates is not None
        else _admissible_values(wp, grid, minocc)
    )
    if len(r_pool) == 0 or len(s_pool) == 0:
        raise EstimationError("no admissible threshold candidates")
    cap = grid.max_candidates_per_axis
    coarse_options = dataclasses.replace(options, rel_tol=max(options.rel_tol, 1e-6))
    r_c, r_full = _subsample(r_pool, cap), len(r_pool) <= cap
    s_c, s_full = _subsample(s_pool, cap), len(s_pool) <= cap
    fit = None
    for round_no in range(max_rounds):
        full_res = r_full and s_full
        g = dataclasses.replace(grid, r_candidates=r_c, s_candidates=s_c)
        fit = grid_search_fit(series, g, options if full_res else coarse_options, workers)
        if full_res:
            break
        top_k = 3 if round_no == 0 else 1
        r_c, r_full = _zoom(r_pool, fit.r_candidates, fit.profile_loss.min(axis=1), cap, top_k)
        s_c, s_full = _zoom(s_pool, fit.s_candidates, fit.profile_loss.min(axis=0), cap, top_k)
    return fit


def _zoom(pool, cands, axis_losses, cap, top_k, pad=2):
    """Union of full-resolution pool windows around the best candidates."""
    order = np.argsort(axis_losses, kind="stable")[:top_k]
    take = np.zeros(len(pool), dtype=bool)
    for k in order:
        lo_v = cands[max(k - pad, 0)]
        hi_v = cands[min(k + pad, len(cands) - 1)]
        lo = np.searchsorted(pool, lo_v, side="left")
        hi = np.searchsorted(pool, hi_v, side="right")
        take[lo:hi] = True
    window = pool[take]
    if len(window) == 0:
        window = cands[order[:1]]
    return _subsample(window, cap), len(window) <= cap
