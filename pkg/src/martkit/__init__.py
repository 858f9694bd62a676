"""martkit: two-way threshold matrix autoregression toolkit.

Simulation, alternating least squares estimation with threshold grid
search, asymptotic inference for coefficients and thresholds, a comparison
model zoo, and a rolling-origin forecast benchmark.
"""

from .core import (
    CoefSet,
    MatrixSeries,
    RegimeLabel,
    ThetaParams,
    Thresholds,
    classify_regime,
    col_spread,
    kron_coefficient,
    normalize,
    predict_one,
    regime_counts,
    row_spread,
    unvec,
    vec,
)
from .estimate import (
    AlsOptions,
    FitResult,
    GridSpec,
    als_fit,
    grid_search_fit,
    gradient_residuals,
    loss,
    mar_init,
    refine_search,
)
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
from .inference import (
    CoefInference,
    ThresholdInference,
    asymptotic_cov_beta,
    estimate_sigma,
    independence_diagnostic,
    jump_samples,
    threshold_ci,
)
from .baselines import BaselineFit, ModelKind, ModelTag, fit_baseline, param_count, predict_baseline
from .forecast import RollingResult, RollingSpec, rolling_mspe
from .simulate import (
    DgpSpec,
    NoiseSpec,
    StationarityReport,
    check_stationarity,
    make_kronecker_sigma,
    replicate_seed,
    simulate_path,
    standard_design,
)
from .dataio import ingest, write_series_csv

__version__ = "0.1.0"

__all__ = [
    "AlsOptions",
    "BandwidthError",
    "BaselineFit",
    "CoefInference",
    "CoefSet",
    "DataFormatError",
    "DegenerateCoefficientError",
    "DgpSpec",
    "EstimationError",
    "FitResult",
    "GridSpec",
    "InferenceError",
    "InsufficientDataError",
    "InvalidArgumentError",
    "MartkitError",
    "MatrixSeries",
    "ModelKind",
    "ModelTag",
    "NoiseSpec",
    "RegimeLabel",
    "RollingResult",
    "RollingSpec",
    "StationarityError",
    "StationarityReport",
    "ThetaParams",
    "ThresholdInference",
    "Thresholds",
    "als_fit",
    "asymptotic_cov_beta",
    "check_stationarity",
    "classify_regime",
    "col_spread",
    "estimate_sigma",
    "fit_baseline",
    "gradient_residuals",
    "grid_search_fit",
    "independence_diagnostic",
    "ingest",
    "jump_samples",
    "kron_coefficient",
    "loss",
    "mar_init",
    "make_kronecker_sigma",
    "normalize",
    "param_count",
    "predict_baseline",
    "predict_one",
    "refine_search",
    "regime_counts",
    "replicate_seed",
    "rolling_mspe",
    "row_spread",
    "simulate_path",
    "standard_design",
    "threshold_ci",
    "unvec",
    "vec",
    "write_series_csv",
]
