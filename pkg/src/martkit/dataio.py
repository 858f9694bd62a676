"""File formats: long-format matrix CSV, thresholds CSV, and JSON results.

Matrix CSV schema (header required): ``t,row,col,value`` with t a 1-based
contiguous time index, row in 1..m, col in 1..n, and every (t,row,col)
appearing exactly once.  Thresholds CSV schema: ``t,z,w`` with the same
contiguity rule.  Numbers are written with 17 significant digits so files
round-trip bit-for-bit through :func:`ingest`.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Optional

import numpy as np

from .core import MatrixSeries, THRESHOLD_EXOGENOUS
from .estimate import FitResult
from .exceptions import DataFormatError


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_series_csv(
    series: MatrixSeries, matrix_path, thresholds_path=None
) -> None:
    """Emit a series to the matrix CSV (and optionally thresholds CSV) schema."""
    matrix_path = Path(matrix_path)
    with matrix_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "row", "col", "value"])
        for t in range(series.T):
            for i in range(series.m):
                for j in range(series.n):
                    writer.writerow([t + 1, i + 1, j + 1, _fmt(series.X[t, i, j])])
    if thresholds_path is not None:
        with Path(thresholds_path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "z", "w"])
            for t in range(series.T):
                writer.writerow([t + 1, _fmt(series.z[t]), _fmt(series.w[t])])


def _parse_int(text: str, what: str, line_no: int) -> int:
    try:
        return int(text)
    except ValueError:
        raise DataFormatError(f"line {line_no}: {what} is not an integer: {text!r}")


def _parse_float(text: str, what: str, line_no: int) -> float:
    try:
        v = float(text)
    except ValueError:
        raise DataFormatError(f"line {line_no}: {what} is not a number: {text!r}")
    if not np.isfinite(v):
        raise DataFormatError(f"line {line_no}: {what} is not finite: {text!r}")
    return v


def ingest(matrix_path, thresholds_path=None) -> MatrixSeries:
    """Assemble a series from CSV files.

    Dimensions are inferred from the maximum row/col indices.  When the
    thresholds file is absent, z and w are recomputed from X with the
    endogenous spread formulas.

    Raises
    ------
    DataFormatError
        On missing cells, duplicate cells, non-contiguous time indices or
        malformed numbers, naming the offending file line.
    """
    matrix_path = Path(matrix_path)
    cells = {}
    with matrix_path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["t", "row", "col", "value"]:
            raise DataFormatError(
                f"{matrix_path}: expected header 't,row,col,value', got {header!r}"
            )
        for line_no, fields in enumerate(reader, start=2):
            if not fields:
                continue
            if len(fields) != 4:
                raise DataFormatError(
                    f"line {line_no}: expected 4 fields, got {len(fields)}"
                )
            t = _parse_int(fields[0], "t", line_no)
            i = _parse_int(fields[1], "row", line_no)
            j = _parse_int(fields[2], "col", line_no)
            v = _parse_float(fields[3], "value", line_no)
            if t < 1 or i < 1 or j < 1:
                raise DataFormatError(f"line {line_no}: indices must be 1-based positive")
            if (t, i, j) in cells:
                raise DataFormatError(f"line {line_no}: duplicate cell (t={t},row={i},col={j})")
            cells[(t, i, j)] = v
    if not cells:
        raise DataFormatError(f"{matrix_path}: no data rows")
    T = max(key[0] for key in cells)
    m = max(key[1] for key in cells)
    n = max(key[2] for key in cells)
    X = np.empty((T, m, n))
    for t in range(1, T + 1):
        for i in range(1, m + 1):
            for j in range(1, n + 1):
                if (t, i, j) not in cells:
                    raise DataFormatError(
                        f"{matrix_path}: missing cell (t={t},row={i},col={j})"
                    )
                X[t - 1, i - 1, j - 1] = cells[(t, i, j)]

    if thresholds_path is None:
        return MatrixSeries.from_path(X)

    zs = {}
    with Path(thresholds_path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["t", "z", "w"]:
            raise DataFormatError(
                f"{thresholds_path}: expected header 't,z,w', got {header!r}"
            )
        for line_no, fields in enumerate(reader, start=2):
            if not fields:
                continue
            if len(fields) != 3:
                raise DataFormatError(
                    f"line {line_no}: expected 3 fields, got {len(fields)}"
                )
            t = _parse_int(fields[0], "t", line_no)
            if t in zs:
                raise DataFormatError(f"line {line_no}: duplicate time index t={t}")
            zs[t] = (
                _parse_float(fields[1], "z", line_no),
                _parse_float(fields[2], "w", line_no),
            )
    if sorted(zs) != list(range(1, T + 1)):
        missing = sorted(set(range(1, T + 1)) - set(zs))
        raise DataFormatError(
            f"{thresholds_path}: time indices not contiguous 1..{T}"
            + (f" (first missing: {missing[0]})" if missing else "")
        )
    z = np.array([zs[t][0] for t in range(1, T + 1)])
    w = np.array([zs[t][1] for t in range(1, T + 1)])
    return MatrixSeries(X=X, z=z, w=w, threshold_mode=THRESHOLD_EXOGENOUS)


# ---------------------------------------------------------------------------
# JSON result documents


def _mat(a) -> list:
    return np.asarray(a, dtype=float).tolist()


def fit_result_to_dict(fit: FitResult, m: int, n: int, T: int) -> dict:
    coefs = fit.theta_hat.coefs
    return {
        "model": "2mart",
        "m": m,
        "n": n,
        "T": T,
        "loss": float(fit.loss),
        "param_count": 2 * (m * m + n * n) + 2,
        "thresholds": {"r": fit.theta_hat.tau.r, "s": fit.theta_hat.tau.s},
        "parameters": {
            "A1": _mat(coefs.A1),
            "A2": _mat(coefs.A2),
            "B1": _mat(coefs.B1),
            "B2": _mat(coefs.B2),
        },
        "converged": bool(fit.converged),
        "n_iters": int(fit.n_iters),
        "regime_counts": np.asarray(fit.regime_counts, dtype=int).tolist(),
        "ridge_used": bool(fit.ridge_used),
        "held_updates": list(fit.held_updates),
    }


def baseline_fit_to_dict(bfit, m: int, n: int, T: int) -> dict:
    return {
        "model": bfit.kind.tag.value,
        "m": m,
        "n": n,
        "T": T,
        "loss": float(bfit.loss),
        "param_count": int(bfit.param_count),
        "thresholds": [float(c) for c in bfit.thresholds],
        "parameters": {k: _mat(v) for k, v in bfit.parameters.items()},
        "extras": {
            k: (v if isinstance(v, (bool, int, float, str)) else str(v))
            for k, v in bfit.extras.items()
        },
    }


def coef_inference_to_dict(ci) -> dict:
    return {
        "level": ci.level,
        "intervals": {
            name: {"lower": _mat(lo), "upper": _mat(hi)}
            for name, (lo, hi) in ci.intervals.items()
        },
        "se": {name: _mat(v) for name, v in ci.se.items()},
    }


def threshold_inference_to_dict(ti) -> dict:
    return {
        "level": ti.level,
        "r_interval": [ti.r_interval[0], ti.r_interval[1]],
        "s_interval": [ti.s_interval[0], ti.s_interval[1]],
        "jump_rates": [ti.jump_rates[0], ti.jump_rates[1]],
        "n_sims": int(ti.n_sims),
        "bandwidths": [ti.bandwidths[0], ti.bandwidths[1]],
    }


def write_json(doc: dict, path) -> None:
    with Path(path).open("w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_csv_rows(path, header, rows) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                [_fmt(x) if isinstance(x, float) else x for x in row]
            )
