"""Rolling-origin one-step forecasting and the MSPE benchmark protocol.

For each origin t in the test span the model is fitted on the preceding
``train_window`` observations (refitting every ``refit_every`` origins and
reusing the parameters in between), a one-step forecast of X_t is formed
from (X_{t-1}, z_{t-1}, w_{t-1}), and the squared Frobenius error is
accumulated.  Threshold variables at forecast time are the observed lagged
values, which are available at the origin; the protocol is strictly
one-step.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from .baselines import BaselineFit, ModelKind, fit_baseline, predict_baseline
from .core import MatrixSeries
from .estimate import AlsOptions, GridSpec
from .exceptions import InsufficientDataError, InvalidArgumentError


@dataclass(frozen=True)
class RollingSpec:
    """Rolling forecast protocol: 1-based origins in [test_start, test_end].

    Origin t is forecast from a model fitted on observations
    t - train_window .. t - 1.  ``refit_every`` > 1 is a speed knob that
    reuses a fit for that many consecutive origins.
    """

    train_window: int
    test_start: int
    test_end: int
    refit_every: int = 1

    def __post_init__(self):
        if self.train_window < 2:
            raise InvalidArgumentError("train_window must be >= 2")
        if self.test_start <= self.train_window:
            raise InvalidArgumentError("test_start must exceed train_window")
        if self.test_end < self.test_start:
            raise InvalidArgumentError("test_end must be >= test_start")
        if self.refit_every < 1:
            raise InvalidArgumentError("refit_every must be >= 1")


@dataclass(frozen=True)
class RollingResult:
    mspe: float
    per_step_errors: np.ndarray
    n_fits: int


def _sub_series(series: MatrixSeries, start: int, stop: int) -> MatrixSeries:
    # 0-based half-open window [start, stop)
    return MatrixSeries(
        X=series.X[start:stop],
        z=series.z[start:stop],
        w=series.w[start:stop],
        threshold_mode=series.threshold_mode,
    )


def rolling_mspe(
    series: MatrixSeries,
    kind: ModelKind,
    spec: RollingSpec,
    grid: GridSpec = GridSpec(),
    options: AlsOptions = AlsOptions(),
    fit_fn: Optional[Callable[[MatrixSeries], object]] = None,
    predict_fn: Optional[Callable] = None,
) -> RollingResult:
    """Mean squared one-step prediction error over the rolling test span.

    ``fit_fn`` / ``predict_fn`` override the model surface for
    instrumentation (e.g. counting fits or stubbing a perfect-foresight
    predictor); ``predict_fn`` receives (fitted, X_prev, z_prev, w_prev, t)
    with t the 1-based forecast target index.
    """
    if series.T < spec.test_end:
        raise InsufficientDataError(
            f"series has T={series.T} but the test span ends at {spec.test_end}"
        )
    if fit_fn is None:
        fit_fn = lambda sub: fit_baseline(sub, kind, grid, options)  # noqa: E731
    if predict_fn is None:
        predict_fn = lambda fitted, Xp, zp, wp, t: predict_baseline(  # noqa: E731
            fitted, Xp, zp, wp
        )

    errors = np.empty(spec.test_end - spec.test_start + 1)
    fitted = None
    n_fits = 0
    for k, t in enumerate(range(spec.test_start, spec.test_end + 1)):
        if fitted is None or k % spec.refit_every == 0:
            train = _sub_series(series, t - 1 - spec.train_window, t - 1)
            fitted = fit_fn(train)
            n_fits += 1
        X_prev = series.X[t - 2]
        X_hat = predict_fn(fitted, X_prev, series.z[t - 2], series.w[t - 2], t)
        diff = np.asarray(X_hat) - series.X[t - 1]
        errors[k] = float(np.sum(diff * diff))
    return RollingResult(mspe=float(errors.mean()), per_step_errors=errors, n_fits=n_fits)
