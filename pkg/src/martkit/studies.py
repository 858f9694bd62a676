"""Monte Carlo replicate studies: estimation error, interval coverage,
threshold-estimate independence, and out-of-sample forecast comparisons.

Replicates are independent work items seeded by the documented splitting
rule (root seed + replicate index) and may be evaluated on any number of
worker processes; aggregation is order-independent, so results are
identical for any worker count.

Error-covariance settings: "I" is the identity; "II" draws one random
Kronecker-factor covariance per study (seeded by the root seed) and holds
it fixed across replicates, so all replicates share a single data
generating process.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from multiprocessing import get_context
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .baselines import ModelKind, ModelTag, fit_baseline, predict_baseline
from .core import CoefSet, MatrixSeries, ThetaParams, Thresholds, kron_coefficient, RegimeLabel
from .estimate import AlsOptions, FitResult, GridSpec, refine_search
from .exceptions import InvalidArgumentError
from .forecast import RollingSpec, rolling_mspe
from .inference import asymptotic_cov_beta, independence_diagnostic, threshold_ci
from .simulate import (
    DgpSpec,
    NoiseSpec,
    make_kronecker_sigma,
    replicate_seed,
    simulate_path,
    standard_design,
)

SETTING_IDENTITY = "I"
SETTING_KRONECKER = "II"


def kron_product_error(estimated: CoefSet, truth: CoefSet) -> float:
    """Sum over regimes of the squared Frobenius distance of B_j kron A_i."""
    err = 0.0
    for i in (1, 2):
        for j in (1, 2):
            d = kron_coefficient(estimated, RegimeLabel(i, j)) - kron_coefficient(
                truth, RegimeLabel(i, j)
            )
            err += float(np.sum(d * d))
    return err


def noise_for_setting(setting: str, m: int, n: int, path_seed: int, sigma_seed: int) -> NoiseSpec:
    if setting == SETTING_IDENTITY:
        return NoiseSpec(kind="identity", seed=path_seed)
    if setting == SETTING_KRONECKER:
        base = make_kronecker_sigma(m, n, seed=sigma_seed)
        return NoiseSpec(
            kind="kronecker", sigma_r=base.sigma_r, sigma_c=base.sigma_c, seed=path_seed
        )
    raise InvalidArgumentError(f"unknown setting {setting!r}; use 'I' or 'II'")


def study_grid(cap: int = 40, trim: float = 0.1) -> GridSpec:
    return GridSpec(trim_fraction=trim, max_candidates_per_axis=cap)


def _pmap(fn, tasks, workers):
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    ctx = get_context("fork")
    with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


# ---------------------------------------------------------------------------
# estimation / inference replicates


def _run_estimation_rep(task: dict) -> dict:
    m, n, T = task["m"], task["n"], task["T"]
    theta0 = standard_design(m, n)
    seed = replicate_seed(task["root_seed"], task["index"])
    noise = noise_for_setting(task["setting"], m, n, seed, task["root_seed"])
    series = simulate_path(DgpSpec(theta=theta0, noise=noise, T=T, burn_in=task["burn_in"]))
    grid = study_grid(task["grid_cap"], task["trim"])
    options = AlsOptions()
    fit = refine_search(series, grid, options)
    tau_hat = fit.theta_hat.tau
    rec = {
        "index": task["index"],
        "T": T,
        "est_error": kron_product_error(fit.theta_hat.coefs, theta0.coefs),
        "r_hat": tau_hat.r,
        "s_hat": tau_hat.s,
        "r_err_scaled": T * (tau_hat.r - theta0.tau.r),
        "s_err_scaled": T * (tau_hat.s - theta0.tau.s),
        "converged": fit.converged,
    }
    if task["coef_level"] is not None:
        ci = asymptotic_cov_beta(series, fit, level=task["coef_level"])
        hits = 0
        total = 0
        for name in ("A1", "A2", "B1", "B2"):
            lower, upper = ci.intervals[name]
            true = getattr(theta0.coefs, name)
            hits += int(np.sum((lower <= true) & (true <= upper)))
            total += true.size
        rec["coef_coverage"] = hits / total
    levels = task["threshold_levels"]
    if levels:
        ti = threshold_ci(
            series, fit, level=levels[0], n_sims=task["n_sims"], seed=seed
        )
        for lev in levels:
            lo_r, hi_r = ti.interval_at(lev, "r")
            lo_s, hi_s = ti.interval_at(lev, "s")
            rec[f"cov_r_{lev:g}"] = bool(lo_r <= theta0.tau.r <= hi_r)
            rec[f"cov_s_{lev:g}"] = bool(lo_s <= theta0.tau.s <= hi_s)
            rec[f"width_r_{lev:g}"] = hi_r - lo_r
            rec[f"width_s_{lev:g}"] = hi_s - lo_s
    return rec


def replication_study(
    setting: str,
    m: int,
    n: int,
    T: int,
    reps: int,
    root_seed: int = 20240,
    workers: int = 1,
    grid_cap: int = 40,
    trim: float = 0.1,
    burn_in: int = 200,
    coef_level: Optional[float] = None,
    threshold_levels: Sequence[float] = (),
    n_sims: int = 500,
) -> List[dict]:
    """Simulate-and-fit replicates; optionally attach interval coverage."""
    tasks = [
        {
            "setting": setting,
            "m": m,
            "n": n,
            "T": T,
            "index": k,
            "root_seed": root_seed,
            "grid_cap": grid_cap,
            "trim": trim,
            "burn_in": burn_in,
            "coef_level": coef_level,
            "threshold_levels": tuple(threshold_levels),
            "n_sims": n_sims,
        }
        for k in range(reps)
    ]
    return _pmap(_run_estimation_rep, tasks, workers)


def mean_coef_ecp(records: List[dict]) -> float:
    return float(np.mean([r["coef_coverage"] for r in records]))


def threshold_ecp(records: List[dict], which: str, level: float) -> float:
    key = f"cov_{which}_{level:g}"
    return float(np.mean([r[key] for r in records]))


def median_est_error(records: List[dict]) -> float:
    return float(np.median([r["est_error"] for r in records]))


def scaled_tau_errors(records: List[dict], which: str = "r") -> np.ndarray:
    return np.asarray([r[f"{which}_err_scaled"] for r in records])


def independence_from_records(
    records: List[dict], n_permutations: int = 2000, seed: int = 0
) -> Dict[str, float]:
    pairs = np.column_stack(
        [scaled_tau_errors(records, "r"), scaled_tau_errors(records, "s")]
    )
    return independence_diagnostic(pairs, n_permutations=n_permutations, seed=seed)


# ---------------------------------------------------------------------------
# forecast comparison replicates


def _smart_design(m: int, n: int) -> ThetaParams:
    base = standard_design(m, n)
    return ThetaParams(coefs=base.coefs, tau=Thresholds(r=0.3, s=-0.3))


def _run_forecast_rep(task: dict) -> dict:
    m, n = task["m"], task["n"]
    seed = replicate_seed(task["root_seed"], task["index"])
    T_total = task["T_total"]
    burn_in = task["burn_in"]
    if task["truth"] == "2mart":
        theta0 = standard_design(m, n)
        noise = NoiseSpec(kind="identity", seed=seed)
        series = simulate_path(DgpSpec(theta=theta0, noise=noise, T=T_total, burn_in=burn_in))
    else:  # single shared threshold variable with two levels
        theta0 = _smart_design(m, n)
        v = np.random.default_rng([seed, 1]).standard_normal(burn_in + T_total + 1)
        noise = NoiseSpec(kind="identity", seed=seed)
        series = simulate_path(
            DgpSpec(
                theta=theta0,
                noise=noise,
                T=T_total,
                burn_in=burn_in,
                threshold_def="exogenous",
                z_path=v,
                w_path=v,
            )
        )
    spec = RollingSpec(
        train_window=task["train_window"],
        test_start=task["test_start"],
        test_end=task["test_end"],
        refit_every=task["refit_every"],
    )
    grid = study_grid(task["grid_cap"], task["trim"])
    out = {"index": task["index"]}
    for tag in task["models"]:
        kind = ModelKind(tag=ModelTag(tag), rank_k=task["rank_k"])
        res = rolling_mspe(series, kind, spec, grid, AlsOptions())
        out[tag] = res.mspe
    return out


def forecast_ordering_study(
    truth: str,
    models: Sequence[str],
    n_datasets: int,
    m: int = 3,
    n: int = 2,
    T_total: int = 700,
    train_window: int = 500,
    test_start: int = 521,
    test_end: int = 600,
    refit_every: int = 20,
    rank_k: int = 2,
    root_seed: int = 7340,
    workers: int = 1,
    grid_cap: int = 30,
    trim: float = 0.1,
    burn_in: int = 200,
) -> List[dict]:
    """Rolling MSPE of several models on datasets simulated from ``truth``."""
    if truth not in ("2mart", "smart"):
        raise InvalidArgumentError("truth must be '2mart' or 'smart'")
    tasks = [
        {
            "truth": truth,
            "models": tuple(models),
            "index": k,
            "root_seed": root_seed,
            "m": m,
            "n": n,
            "T_total": T_total,
            "train_window": train_window,
            "test_start": test_start,
            "test_end": test_end,
            "refit_every": refit_every,
            "rank_k": rank_k,
            "grid_cap": grid_cap,
            "trim": trim,
            "burn_in": burn_in,
        }
        for k in range(n_datasets)
    ]
    return _pmap(_run_forecast_rep, tasks, workers)


def win_fraction(records: List[dict], winner: str, loser: str) -> float:
    wins = [r[winner] < r[loser] for r in records]
    return float(np.mean(wins))
