"""Batch command line surface.

Subcommands: simulate, fit, infer, benchmark, replicate.  All outputs are
deterministic given (config, seed).  Exit codes: 0 success, 1 usage error,
2 data error, 3 numerical failure; failures print a single machine-parsable
line on stderr.  Set MARTKIT_LOG=debug|info|warning to control logging.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import schemas
from .baselines import ModelKind, ModelTag, fit_baseline, param_count
from .dataio import (
    baseline_fit_to_dict,
    coef_inference_to_dict,
    fit_result_to_dict,
    ingest,
    threshold_inference_to_dict,
    write_csv_rows,
    write_json,
    write_series_csv,
)
from .estimate import AlsOptions, GridSpec, grid_search_fit, refine_search
from .exceptions import (
    BandwidthError,
    DataFormatError,
    DegenerateCoefficientError,
    EstimationError,
    InferenceError,
    InsufficientDataError,
    InvalidArgumentError,
    MartkitError,
    StationarityError,
)
from .forecast import RollingSpec, rolling_mspe
from .inference import asymptotic_cov_beta, threshold_ci
from .simulate import DgpSpec, NoiseSpec, make_kronecker_sigma, simulate_path, standard_design
from .studies import (
    forecast_ordering_study,
    independence_from_records,
    mean_coef_ecp,
    replication_study,
    threshold_ecp,
    win_fraction,
    _pmap,
)

log = logging.getLogger("martkit")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _load_config(path):
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise _UsageError(f"config file not found: {path}")
    except json.JSONDecodeError as e:
        raise _UsageError(f"config file is not valid JSON: {e}")
    try:
        jsonschema.validate(cfg, schemas.CONFIG_SCHEMA)
    except jsonschema.ValidationError as e:
        raise _UsageError(f"invalid config: {e.message} (at {'/'.join(map(str, e.path))})")
    return cfg


class _Ctx:
    """Option resolution: explicit flag > config value > default."""

    def __init__(self, args):
        self.args = args
        self.cfg = _load_config(args.config) if args.config else {}

    def get(self, flag, section, key, default):
        v = getattr(self.args, flag, None)
        if v is not None:
            return v
        sec = self.cfg.get(section, {}) if section else self.cfg
        return sec.get(key, default)

    def grid(self):
        return GridSpec(
            trim_fraction=self.get("trim", "grid", "trim_fraction", 0.1),
            max_candidates_per_axis=self.get(
                "max_candidates", "grid", "max_candidates_per_axis", 100
            ),
            candidate_source=self.get("candidate_source", "grid", "candidate_source", "sample"),
        )

    def als(self):
        return AlsOptions(
            max_iters=self.get("max_iters", "als", "max_iters", 200),
            rel_tol=self.get("rel_tol", "als", "rel_tol", 1e-8),
        )

    @property
    def seed(self):
        return self.get("seed", None, "seed", 0)

    @property
    def threads(self):
        return self.get("threads", None, "threads", 1)

    @property
    def out_dir(self):
        out = Path(self.get("out_dir", None, "out_dir", "."))
        out.mkdir(parents=True, exist_ok=True)
        return out


def _emit(path):
    print(path)


def _noise_for(setting, m, n, seed):
    if setting == "II":
        base = make_kronecker_sigma(m, n, seed=seed)
        return NoiseSpec(kind="kronecker", sigma_r=base.sigma_r, sigma_c=base.sigma_c, seed=seed)
    return NoiseSpec(kind="identity", seed=seed)


def _cmd_simulate(ctx):
    dims = ctx.get("dims", "simulate", "dims", [3, 2])
    m, n = int(dims[0]), int(dims[1])
    T = ctx.get("T", "simulate", "T", 500)
    burn_in = ctx.get("burn_in", "simulate", "burn_in", 200)
    setting = ctx.get("setting", "simulate", "setting", "I")
    theta = standard_design(m, n)
    noise = _noise_for(setting, m, n, ctx.seed)
    series = simulate_path(DgpSpec(theta=theta, noise=noise, T=T, burn_in=burn_in))
    out = ctx.out_dir
    write_series_csv(series, out / "series.csv", out / "thresholds.csv")
    _emit(out / "series.csv")
    _emit(out / "thresholds.csv")
    return EXIT_OK


def _read_series(ctx):
    if ctx.args.data is None:
        raise _UsageError("--data is required")
    thresholds = ctx.args.thresholds
    return ingest(ctx.args.data, thresholds)


def _cmd_fit(ctx):
    series = _read_series(ctx)
    grid = ctx.grid()
    options = ctx.als()
    tag = ctx.get("model", "model", "tag", "2mart")
    if tag == "2mart":
        search = refine_search if ctx.args.refine else grid_search_fit
        fit = search(series, grid, options, workers=ctx.threads)
        doc = fit_result_to_dict(fit, series.m, series.n, series.T)
    else:
        kind = ModelKind(
            tag=ModelTag(tag),
            rank_k=ctx.get("rank", "model", "rank_k", None),
            threshold_axis=ctx.get("axis", "model", "threshold_axis", "z"),
        )
        bfit = fit_baseline(series, kind, grid, options)
        doc = baseline_fit_to_dict(bfit, series.m, series.n, series.T)
    jsonschema.validate(doc, schemas.FIT_SCHEMA)
    out = ctx.out_dir / "fit.json"
    write_json(doc, out)
    _emit(out)
    return EXIT_OK


def _cmd_infer(ctx):
    series = _read_series(ctx)
    grid = ctx.grid()
    options = ctx.als()
    level = ctx.get("level", "inference", "level", 0.95)
    n_sims = ctx.get("n_sims", "inference", "n_sims", 500)
    fit = refine_search(series, grid, options, workers=ctx.threads)
    ci = asymptotic_cov_beta(series, fit, level=level)
    ti = threshold_ci(series, fit, level=level, n_sims=n_sims, seed=ctx.seed)
    doc = {
        "fit": fit_result_to_dict(fit, series.m, series.n, series.T),
        "coefficients": coef_inference_to_dict(ci),
        "thresholds": threshold_inference_to_dict(ti),
    }
    jsonschema.validate(doc, schemas.INFER_SCHEMA)
    out = ctx.out_dir / "infer.json"
    write_json(doc, out)
    _emit(out)
    return EXIT_OK


def _benchmark_one(task):
    series, tag, rank, axis, grid, options, spec = task
    kind = ModelKind(tag=ModelTag(tag), rank_k=rank, threshold_axis=axis)
    res = rolling_mspe(series, kind, spec, grid, options)
    return {
        "model": tag,
        "param_count": param_count(kind, series.m, series.n),
        "mspe": res.mspe,
        "n_fits": res.n_fits,
    }


def _cmd_benchmark(ctx):
    series = _read_series(ctx)
    grid = ctx.grid()
    options = ctx.als()
    models = (ctx.get("models", "model", "tag", "2mart,mar,var") or "").split(",")
    spec = RollingSpec(
        train_window=ctx.get("train_window", "rolling", "train_window", series.T // 2),
        test_start=ctx.get("test_start", "rolling", "test_start", series.T // 2 + 1),
        test_end=ctx.get("test_end", "rolling", "test_end", series.T),
        refit_every=ctx.get("refit_every", "rolling", "refit_every", 1),
    )
    rank = ctx.get("rank", "model", "rank_k", None)
    if rank is None and "rrvar" in models:
        rank = max(1, min(series.m, series.n))
    axis = ctx.get("axis", "model", "threshold_axis", "z")
    tasks = [(series, tag.strip(), rank, axis, grid, options, spec) for tag in models]
    results = _pmap(_benchmark_one, tasks, ctx.threads)
    doc = {
        "rolling": {
            "train_window": spec.train_window,
            "test_start": spec.test_start,
            "test_end": spec.test_end,
            "refit_every": spec.refit_every,
        },
        "results": results,
    }
    jsonschema.validate(doc, schemas.BENCHMARK_SCHEMA)
    out_json = ctx.out_dir / "benchmark.json"
    write_json(doc, out_json)
    rows = [(r["model"], r["param_count"], float(r["mspe"]), r["n_fits"]) for r in results]
    out_csv = ctx.out_dir / "benchmark.csv"
    write_csv_rows(out_csv, ["model", "param_count", "mspe", "n_fits"], rows)
    _emit(out_json)
    _emit(out_csv)
    return EXIT_OK


def _quartiles(v):
    v = np.asarray(v, dtype=float)
    return [float(np.min(v))] + [float(np.quantile(v, q)) for q in (0.25, 0.5, 0.75)] + [
        float(np.max(v))
    ]


def _cmd_replicate(ctx):
    what = ctx.get("what", "replicate", "what", "estimation-error")
    dims = ctx.get("dims", "replicate", "dims", [3, 2])
    m, n = int(dims[0]), int(dims[1])
    Ts = ctx.get("T", "replicate", "T", [1000])
    if isinstance(Ts, int):
        Ts = [Ts]
    reps = ctx.get("reps", "replicate", "reps", 200)
    setting = ctx.get("setting", "replicate", "setting", "I")
    grid_cap = ctx.get("grid_cap", "replicate", "grid_cap", 40)
    n_sims = ctx.get("n_sims", "replicate", "n_sims", 500)
    out = ctx.out_dir

    if what == "estimation-error":
        per_rep = []
        summary = []
        for T in Ts:
            records = replication_study(
                setting, m, n, T, reps, root_seed=ctx.seed, workers=ctx.threads,
                grid_cap=grid_cap,
            )
            for r in records:
                per_rep.append((T, r["index"], float(r["est_error"]), float(r["r_hat"]),
                                float(r["s_hat"])))
            logs = [math.log(r["est_error"]) for r in records]
            summary.append([T] + _quartiles(logs))
        write_csv_rows(out / "estimation_error.csv",
                       ["T", "rep", "est_error", "r_hat", "s_hat"], per_rep)
        write_csv_rows(out / "estimation_error_boxplot.csv",
                       ["T", "min", "q1", "median", "q3", "max"], summary)
        _emit(out / "estimation_error.csv")
        _emit(out / "estimation_error_boxplot.csv")
        return EXIT_OK

    if what == "ecp-coef":
        level = ctx.get("level", "inference", "level", 0.95)
        rows = []
        summary = []
        for T in Ts:
            records = replication_study(
                setting, m, n, T, reps, root_seed=ctx.seed, workers=ctx.threads,
                grid_cap=grid_cap, coef_level=level,
            )
            rows += [(T, r["index"], float(r["coef_coverage"])) for r in records]
            summary.append((setting, f"({m},{n})", T, reps, level, mean_coef_ecp(records)))
        write_csv_rows(out / "ecp_coef.csv", ["T", "rep", "coverage"], rows)
        write_csv_rows(out / "ecp_coef_summary.csv",
                       ["setting", "dims", "T", "reps", "level", "mean_ecp"], summary)
        _emit(out / "ecp_coef.csv")
        _emit(out / "ecp_coef_summary.csv")
        return EXIT_OK

    if what == "ecp-threshold":
        levels = (0.90, 0.95, 0.99)
        rows = []
        summary = []
        for T in Ts:
            records = replication_study(
                setting, m, n, T, reps, root_seed=ctx.seed, workers=ctx.threads,
                grid_cap=grid_cap, threshold_levels=levels, n_sims=n_sims,
            )
            for r in records:
                rows.append(
                    (T, r["index"])
                    + tuple(int(r[f"cov_r_{v:g}"]) for v in levels)
                    + tuple(int(r[f"cov_s_{v:g}"]) for v in levels)
                )
            for which in ("r", "s"):
                for lev in levels:
                    summary.append(
                        (setting, f"({m},{n})", T, reps, which, lev,
                         threshold_ecp(records, which, lev))
                    )
        header = ["T", "rep"] + [f"cov_r_{v:g}" for v in levels] + [
            f"cov_s_{v:g}" for v in levels
        ]
        write_csv_rows(out / "ecp_threshold.csv", header, rows)
        write_csv_rows(out / "ecp_threshold_summary.csv",
                       ["setting", "dims", "T", "reps", "param", "level", "ecp"], summary)
        _emit(out / "ecp_threshold.csv")
        _emit(out / "ecp_threshold_summary.csv")
        return EXIT_OK

    if what == "independence":
        T = Ts[0]
        records = replication_study(
            setting, m, n, T, reps, root_seed=ctx.seed, workers=ctx.threads,
            grid_cap=grid_cap,
        )
        result = independence_from_records(records, seed=ctx.seed)
        pairs = [(r["index"], float(r["r_err_scaled"]), float(r["s_err_scaled"]))
                 for r in records]
        write_csv_rows(out / "independence_pairs.csv",
                       ["rep", "r_err_scaled", "s_err_scaled"], pairs)
        write_csv_rows(out / "independence_summary.csv",
                       ["setting", "dims", "T", "reps", "statistic", "p_value"],
                       [(setting, f"({m},{n})", T, reps,
                         float(result["statistic"]), float(result["p_value"]))])
        _emit(out / "independence_pairs.csv")
        _emit(out / "independence_summary.csv")
        return EXIT_OK

    if what == "forecast-ordering":
        truth = ctx.get("truth", "replicate", "truth", "2mart")
        models = (ctx.get("models", None, "models", None)
                  or ("2mart,mar,var" if truth == "2mart" else "smart,tmar")).split(",")
        records = forecast_ordering_study(
            truth, [t.strip() for t in models], reps,
            root_seed=ctx.seed, workers=ctx.threads, grid_cap=grid_cap,
        )
        rows = [tuple([r["index"]] + [float(r[t.strip()]) for t in models]) for r in records]
        write_csv_rows(out / "forecast_mspe.csv", ["rep"] + list(models), rows)
        base = models[0].strip()
        summary = [(truth, base, other.strip(), win_fraction(records, base, other.strip()))
                   for other in models[1:]]
        write_csv_rows(out / "forecast_summary.csv",
                       ["truth", "model", "versus", "win_fraction"], summary)
        _emit(out / "forecast_mspe.csv")
        _emit(out / "forecast_summary.csv")
        return EXIT_OK

    raise _UsageError(f"unknown --what {what!r}")


def build_parser() -> _Parser:
    p = _Parser(prog="martkit", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", default=None)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--threads", type=int, default=None)
        sp.add_argument("--out-dir", dest="out_dir", default=None)

    sp = sub.add_parser("simulate", help="simulate a path from the reference design")
    common(sp)
    sp.add_argument("--dims", type=int, nargs=2, default=None, metavar=("M", "N"))
    sp.add_argument("--T", type=int, default=None)
    sp.add_argument("--burn-in", dest="burn_in", type=int, default=None)
    sp.add_argument("--setting", choices=["I", "II"], default=None)

    def fit_args(sp):
        sp.add_argument("--data", default=None)
        sp.add_argument("--thresholds", default=None)
        sp.add_argument("--trim", type=float, default=None)
        sp.add_argument("--max-candidates", dest="max_candidates", type=int, default=None)
        sp.add_argument("--candidate-source", dest="candidate_source",
                        choices=["sample", "quantile"], default=None)
        sp.add_argument("--max-iters", dest="max_iters", type=int, default=None)
        sp.add_argument("--rel-tol", dest="rel_tol", type=float, default=None)

    sp = sub.add_parser("fit", help="fit one model to a data file")
    common(sp)
    fit_args(sp)
    sp.add_argument("--model", default=None,
                    choices=[t.value for t in ModelTag])
    sp.add_argument("--axis", choices=["z", "w", "auto"], default=None)
    sp.add_argument("--rank", type=int, default=None)
    sp.add_argument("--refine", action="store_true")

    sp = sub.add_parser("infer", help="confidence intervals for coefficients and thresholds")
    common(sp)
    fit_args(sp)
    sp.add_argument("--level", type=float, default=None)
    sp.add_argument("--n-sims", dest="n_sims", type=int, default=None)

    sp = sub.add_parser("benchmark", help="rolling one-step MSPE per model")
    common(sp)
    fit_args(sp)
    sp.add_argument("--models", default=None)
    sp.add_argument("--axis", choices=["z", "w", "auto"], default=None)
    sp.add_argument("--rank", type=int, default=None)
    sp.add_argument("--train-window", dest="train_window", type=int, default=None)
    sp.add_argument("--test-start", dest="test_start", type=int, default=None)
    sp.add_argument("--test-end", dest="test_end", type=int, default=None)
    sp.add_argument("--refit-every", dest="refit_every", type=int, default=None)

    sp = sub.add_parser("replicate", help="Monte Carlo study summaries")
    common(sp)
    sp.add_argument("--what", default=None,
                    choices=["estimation-error", "ecp-coef", "ecp-threshold",
                             "independence", "forecast-ordering"])
    sp.add_argument("--setting", choices=["I", "II"], default=None)
    sp.add_argument("--dims", type=int, nargs=2, default=None, metavar=("M", "N"))
    sp.add_argument("--T", type=int, nargs="+", default=None)
    sp.add_argument("--reps", type=int, default=None)
    sp.add_argument("--grid-cap", dest="grid_cap", type=int, default=None)
    sp.add_argument("--n-sims", dest="n_sims", type=int, default=None)
    sp.add_argument("--level", type=float, default=None)
    sp.add_argument("--truth", choices=["2mart", "smart"], default=None)
    sp.add_argument("--models", default=None)
    return p


_COMMANDS = {
    "simulate": _cmd_simulate,
    "fit": _cmd_fit,
    "infer": _cmd_infer,
    "benchmark": _cmd_benchmark,
    "replicate": _cmd_replicate,
}

_DATA_ERRORS = (DataFormatError, InsufficientDataError, FileNotFoundError)
_NUMERIC_ERRORS = (
    EstimationError,
    InferenceError,
    StationarityError,
    DegenerateCoefficientError,
    BandwidthError,
)


def _fail(code, exc):
    print(
        f"martkit: code={code} error={type(exc).__name__} message={str(exc)!r}",
        file=sys.stderr,
    )
    return code


def main(argv=None) -> int:
    level = os.environ.get("MARTKIT_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        ctx = _Ctx(args)
        return _COMMANDS[args.command](ctx)
    except _UsageError as e:
        return _fail(EXIT_USAGE, e)
    except InvalidArgumentError as e:
        return _fail(EXIT_USAGE, e)
    except _DATA_ERRORS as e:
        return _fail(EXIT_DATA, e)
    except _NUMERIC_ERRORS as e:
        return _fail(EXIT_NUMERIC, e)
    except MartkitError as e:
        return _fail(EXIT_NUMERIC, e)


if __name__ == "__main__":
    sys.exit(main())
