"""Asymptotic inference for the fitted threshold matrix autoregression.

Coefficient inference builds the sandwich covariance of the stacked
coefficient vector from the per-step score directions W_t, with the
identification direction added so the information matrix is invertible.
Threshold inference simulates the two-sided compound Poisson processes whose
argmin is the limit law of T(tau_hat - tau); jump distributions are
approximated by kernel-weighted resampling of plug-in jump values, and the
jump rates by kernel density estimates of the threshold variables at the
fitted thresholds.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from statistics import NormalDist
from typing import Dict, Optional, Tuple

import numpy as np

from .core import MatrixSeries, vec
from .estimate import FitResult
from .exceptions import (
    BandwidthError,
    InferenceError,
    InsufficientDataError,
    InvalidArgumentError,
)

_STALL_JUMPS = 20  # one-sided simulation stops after this many non-improving jumps


def rule_of_thumb_bandwidth(v: np.ndarray) -> float:
    """Gaussian-kernel bandwidth 1.06 * sd * len^(-1/5)."""
    v = np.asarray(v, dtype=float)
    return float(1.06 * np.std(v, ddof=1) * len(v) ** (-0.2))


def _gauss_kernel(u: np.ndarray) -> np.ndarray:
    return np.exp(-0.5 * u * u) / math.sqrt(2.0 * math.pi)


def kernel_density_at(v: np.ndarray, point: float, bandwidth: float) -> float:
    """Kernel density estimate of the sample ``v`` evaluated at ``point``."""
    return float(np.mean(_gauss_kernel((v - point) / bandwidth)) / bandwidth)


def estimate_sigma(residuals: np.ndarray) -> np.ndarray:
    """Sample covariance of the vectorized residuals, centered at their mean."""
    residuals = np.asarray(residuals, dtype=float)
    N, m, n = residuals.shape
    if N < m * n + 1:
        raise InsufficientDataError(
            f"need at least {m * n + 1} residuals to estimate a {m * n}x{m * n} covariance"
        )
    V = residuals.transpose(0, 2, 1).reshape(N, m * n)  # row t = vec(E_t)
    return np.atleast_2d(np.cov(V, rowvar=False))


@dataclass(frozen=True)
class CoefInference:
    """Sandwich covariance and per-entry normal confidence intervals.

    ``intervals`` maps each coefficient block name to (lower, upper) matrices
    of the same shape; ``se`` holds the per-entry standard errors of the
    (already root-T scaled) estimates.
    """

    sigma_hat: np.ndarray
    H_hat: np.ndarray
    xi_hat: np.ndarray
    intervals: Dict[str, Tuple[np.ndarray, np.ndarray]]
    se: Dict[str, np.ndarray]
    level: float


def _score_blocks(Xp_t, hi_z_t, hi_w_t, coefs):
    """W_t' of shape (mn, 2(m^2+n^2)): two non-zero blocks per step."""
    m, n = coefs.m, coefs.n
    p = 2 * (m * m + n * n)
    Wt = np.zeros((m * n, p))
    i = 2 if hi_z_t else 1
    j = 2 if hi_w_t else 1
    BX = coefs.b(j) @ Xp_t.T
    AX = coefs.a(i) @ Xp_t
    a_off = (i - 1) * m * m
    b_off = 2 * m * m + (j - 1) * n * n
    Wt[:, a_off : a_off + m * m] = np.kron(BX, np.eye(m))
    Wt[:, b_off : b_off + n * n] = np.kron(np.eye(n), AX)
    return Wt


def asymptotic_cov_beta(
    series: MatrixSeries,
    fit: FitResult,
    level: float = 0.95,
    sigma: Optional[np.ndarray] = None,
) -> CoefInference:
    """Normal confidence intervals for every autoregressive coefficient entry.

    Builds H = avg(W_t W_t') + gamma gamma' with gamma spanning the
    identification (scale) direction, the sandwich
    Xi = H^-1 avg(W_t Sigma W_t') H^-1, and per-entry intervals
    beta_k +/- z * sqrt(Xi_kk / T).

    Raises
    ------
    InferenceError
        If H is numerically singular beyond the identification augmentation.
    """
    if not (0 < level < 1):
        raise InvalidArgumentError("level must lie in (0, 1)")
    coefs = fit.theta_hat.coefs
    tau = fit.theta_hat.tau
    if np.any(fit.regime_counts.sum(axis=1) == 0) or np.any(
        fit.regime_counts.sum(axis=0) == 0
    ):
        raise InferenceError("a marginal regime is empty; coefficient inference undefined")
    if not fit.converged:
        warnings.warn("fit did not converge; inference may be unreliable", RuntimeWarning)
    if sigma is None:
        sigma = estimate_sigma(fit.residuals)
    sigma = np.asarray(sigma, dtype=float)

    X = series.X
    Xp = X[:-1]
    hi_z = series.z[:-1] > tau.r
    hi_w = series.w[:-1] > tau.s
    m, n = series.m, series.n
    p = 2 * (m * m + n * n)
    HW = np.zeros((p, p))
    HS = np.zeros((p, p))
    N = len(Xp)
    for t in range(N):
        Wt = _score_blocks(Xp[t], hi_z[t], hi_w[t], coefs)
        HW += Wt.T @ Wt
        HS += Wt.T @ sigma @ Wt
    HW /= N
    HS /= N
    gamma = np.zeros(p)
    gamma[: m * m] = vec(coefs.A1)
    H = HW + np.outer(gamma, gamma)
    cond = np.linalg.cond(H)
    if not np.isfinite(cond) or cond > 1e12:
        raise InferenceError(
            f"information matrix numerically singular (condition number {cond:.3g})"
        )
    Hinv = np.linalg.inv(H)
    xi = Hinv @ HS @ Hinv
    xi = 0.5 * (xi + xi.T)

    z = NormalDist().inv_cdf(0.5 + level / 2.0)
    se_vec = np.sqrt(np.clip(np.diag(xi), 0.0, None) / series.T)
    # beta layout: vec(A1), vec(A2), vec(B1'), vec(B2') (column-major)
    blocks = {}
    se = {}
    offsets = {"A1": 0, "A2": m * m, "B1": 2 * m * m, "B2": 2 * m * m + n * n}
    for name in ("A1", "A2", "B1", "B2"):
        est = getattr(coefs, name)
        d = m if name.startswith("A") else n
        seg = se_vec[offsets[name] : offsets[name] + d * d].reshape((d, d), order="F")
        if name.startswith("B"):
            seg = seg.T  # block parameterizes the transpose
        blocks[name] = (est - z * seg, est + z * seg)
        se[name] = seg
    return CoefInference(
        sigma_hat=sigma, H_hat=H, xi_hat=xi, intervals=blocks, se=se, level=level
    )


# ---------------------------------------------------------------------------
# threshold inference


def jump_samples(
    series: MatrixSeries, fit: FitResult, which: int, bandwidth: float
) -> Tuple[np.ndarray, np.ndarray]:
    """Plug-in jump values with kernel weights for one jump distribution.

    ``which`` selects the jump family: 1 and 2 are the right/left jumps of
    the row-threshold process (weighted by the kernel distance of z_{t-1}
    from r_hat), 3 and 4 those of the column-threshold process (weighted via
    w_{t-1} and s_hat).  Each value is

        xi_t(Phi) = ||Phi vec(X_{t-1})||^2 + 2 vec(E_t)' Phi vec(X_{t-1})

    with Phi the regime-dependent Kronecker contrast of the fitted
    coefficients.

    Raises
    ------
    BandwidthError
        If all kernel weights are numerically zero.
    """
    if which not in (1, 2, 3, 4):
        raise InvalidArgumentError("which must be in {1, 2, 3, 4}")
    coefs = fit.theta_hat.coefs
    tau = fit.theta_hat.tau
    m, n = series.m, series.n
    Xp = series.X[:-1]
    zp = series.z[:-1]
    wp = series.w[:-1]
    xv = Xp.transpose(0, 2, 1).reshape(len(Xp), m * n)  # rows vec(X_{t-1})
    ev = fit.residuals.transpose(0, 2, 1).reshape(len(Xp), m * n)

    A1, A2, B1, B2 = coefs.A1, coefs.A2, coefs.B1, coefs.B2
    if which in (1, 2):
        dA = (A2 - A1) if which == 1 else (A1 - A2)
        phi_hi = np.kron(B2, dA)
        phi_lo = np.kron(B1, dA)
        gate = wp > tau.s
        center, h_var = tau.r, zp
    else:
        dB = (B2 - B1) if which == 3 else (B1 - B2)
        phi_hi = np.kron(dB, A1)
        phi_lo = np.kron(dB, A2)
        gate = zp > tau.r
        center, h_var = tau.s, wp

    u_hi = xv @ phi_hi.T
    u_lo = xv @ phi_lo.T
    xi_hi = np.einsum("tk,tk->t", u_hi, u_hi) + 2.0 * np.einsum("tk,tk->t", ev, u_hi)
    xi_lo = np.einsum("tk,tk->t", u_lo, u_lo) + 2.0 * np.einsum("tk,tk->t", ev, u_lo)
    values = np.where(gate, xi_hi, xi_lo)
    weights = _gauss_kernel((h_var - center) / bandwidth)
    if not np.any(weights > 0):
        raise BandwidthError("all kernel weights vanish; increase the bandwidth")
    return values, weights


def _one_sided_min(rate, values, probs, rng, block=128, max_jumps=1 << 15):
    """Simulate one side of a compound Poisson path until the running minimum
    stalls for ``_STALL_JUMPS`` consecutive jumps.

    Returns (times, sums) of all jumps up to and including the stall point.
    """
    times = np.empty(0)
    sums = np.empty(0)
    t_last = 0.0
    s_last = 0.0
    best = 0.0
    last_new = -1  # index of the latest strict improvement
    while len(sums) < max_jumps:
        gaps = rng.exponential(1.0 / rate, size=block)
        jumps = values[rng.choice(len(values), size=block, p=probs)]
        ts = t_last + np.cumsum(gaps)
        ss = s_last + np.cumsum(jumps)
        base = len(sums)
        prev_best = np.minimum.accumulate(np.concatenate(([best], ss)))[:-1]
        is_new = ss < prev_best
        idx = np.where(is_new, base + np.arange(block), last_new)
        idx = np.maximum.accumulate(np.maximum(idx, last_new))
        counter = base + np.arange(block) - idx
        times = np.concatenate((times, ts))
        sums = np.concatenate((sums, ss))
        stop = np.nonzero(counter >= _STALL_JUMPS)[0]
        if stop.size:
            k = base + stop[0]
            return times[: k + 1], sums[: k + 1]
        t_last, s_last = times[-1], sums[-1]
        best = min(best, float(np.min(ss)))
        last_new = int(idx[-1])
    return times, sums


def _argmin_left_endpoint(rate, vals_pos, probs_pos, vals_neg, probs_neg, rng):
    """One draw of the left endpoint of the argmin interval of the two-sided
    compound Poisson process (right-continuous on the right side,
    left-continuous on the left side)."""
    t_r, s_r = _one_sided_min(rate, vals_pos, probs_pos, rng)
    t_l, s_l = _one_sided_min(rate, vals_neg, probs_neg, rng)
    # Piecewise-constant intervals [left, right) and their values:
    # center [-t_l[0], t_r[0]) has value 0; right interval k starts at t_r[k];
    # left interval k spans [-t_l[k+1], -t_l[k]).
    cand_vals = np.concatenate(([0.0], s_r[:-1], s_l[:-1]))
    cand_left = np.concatenate(([-t_l[0]], t_r[:-1], -t_l[1:]))
    order = np.lexsort((cand_left, cand_vals))
    return float(cand_left[order[0]])


@dataclass(frozen=True)
class ThresholdInference:
    """Confidence intervals for the two thresholds.

    ``m_samples_r`` / ``m_samples_s`` hold the simulated argmin draws so
    intervals at other levels can be formed without re-simulating (see
    :meth:`interval_at`).
    """

    r_interval: Tuple[float, float]
    s_interval: Tuple[float, float]
    level: float
    jump_rates: Tuple[float, float]
    n_sims: int
    bandwidths: Tuple[float, float]
    m_samples_r: np.ndarray
    m_samples_s: np.ndarray
    tau_hat: Tuple[float, float]
    T: int

    def interval_at(self, level: float, which: str = "r") -> Tuple[float, float]:
        """Interval for ``which`` in {"r", "s"} at another confidence level."""
        samples = self.m_samples_r if which == "r" else self.m_samples_s
        center = self.tau_hat[0] if which == "r" else self.tau_hat[1]
        q_lo, q_hi = np.quantile(samples, [(1 - level) / 2, (1 + level) / 2])
        return (center - q_hi / self.T, center - q_lo / self.T)


def threshold_ci(
    series: MatrixSeries,
    fit: FitResult,
    level: float = 0.95,
    n_sims: int = 500,
    bandwidths: Optional[Tuple[float, float]] = None,
    seed: int = 0,
) -> ThresholdInference:
    """Simulate the argmin limit law and invert it into threshold intervals.

    The jump rate of each two-sided process is the kernel density of the
    corresponding threshold variable at its fitted threshold; jump sizes are
    resampled from the kernel-weighted plug-in jump values.  The interval for
    r is [r_hat - q_hi / T, r_hat - q_lo / T] with q the empirical quantiles
    of the simulated argmin left endpoints (and likewise for s).
    """
    if not (0 < level < 1):
        raise InvalidArgumentError("level must lie in (0, 1)")
    tau = fit.theta_hat.tau
    zp = series.z[:-1]
    wp = series.w[:-1]
    if bandwidths is None:
        bandwidths = (rule_of_thumb_bandwidth(zp), rule_of_thumb_bandwidth(wp))
    h_z, h_w = bandwidths
    rate_r = kernel_density_at(zp, tau.r, h_z)
    rate_s = kernel_density_at(wp, tau.s, h_w)

    fams = {}
    for which in (1, 2, 3, 4):
        h = h_z if which in (1, 2) else h_w
        values, weights = jump_samples(series, fit, which, h)
        probs = weights / weights.sum()
        if float(values @ probs) <= 0:
            warnings.warn(
                f"estimated jump mean for family {which} is not positive; the "
                "threshold effect may be too weak for reliable intervals",
                RuntimeWarning,
            )
        fams[which] = (values, probs)

    rng = np.random.default_rng(seed)
    m_r = np.array(
        [
            _argmin_left_endpoint(rate_r, *fams[1], *fams[2], rng)
            for _ in range(n_sims)
        ]
    )
    m_s = np.array(
        [
            _argmin_left_endpoint(rate_s, *fams[3], *fams[4], rng)
            for _ in range(n_sims)
        ]
    )

    def _interval(center, samples):
        q_lo, q_hi = np.quantile(samples, [(1 - level) / 2, (1 + level) / 2])
        return (center - q_hi / series.T, center - q_lo / series.T)

    return ThresholdInference(
        r_interval=_interval(tau.r, m_r),
        s_interval=_interval(tau.s, m_s),
        level=level,
        jump_rates=(rate_r, rate_s),
        n_sims=n_sims,
        bandwidths=(float(h_z), float(h_w)),
        m_samples_r=m_r,
        m_samples_s=m_s,
        tau_hat=(tau.r, tau.s),
        T=series.T,
    )


def independence_diagnostic(
    pairs: np.ndarray, n_permutations: int = 2000, seed: int = 0
) -> Dict[str, float]:
    """Permutation test of distance correlation between two coordinates.

    Under independence of the coordinates the p-value is uniform; small
    p-values indicate dependence.  Requires at least 50 pairs.
    """
    pairs = np.asarray(pairs, dtype=float)
    if pairs.ndim != 2 or pairs.shape[1] != 2:
        raise InvalidArgumentError("pairs must be an (N, 2) array")
    N = pairs.shape[0]
    if N < 50:
        raise InsufficientDataError("need at least 50 replicate pairs")

    def centered(v):
        d = np.abs(v[:, None] - v[None, :])
        return d - d.mean(axis=0, keepdims=True) - d.mean(axis=1, keepdims=True) + d.mean()

    A = centered(pairs[:, 0])
    B = centered(pairs[:, 1])
    dcov2 = float((A * B).mean())
    dvar = float((A * A).mean()) * float((B * B).mean())
    stat = math.sqrt(max(dcov2, 0.0) / math.sqrt(dvar)) if dvar > 0 else 0.0

    rng = np.random.default_rng(seed)
    hits = 0
    for _ in range(n_permutations):
        perm = rng.permutation(N)
        if float((A * B[np.ix_(perm, perm)]).mean()) >= dcov2:
            hits += 1
    p_value = (1 + hits) / (1 + n_permutations)
    return {"statistic": stat, "p_value": float(p_value)}
