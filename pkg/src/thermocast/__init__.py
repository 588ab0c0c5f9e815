"""Indoor-temperature forecasting toolkit: data prep, perceptron
forecasters, smoothing/autoregressive baselines, ensembles, and the
evaluation harness around them."""

from .baselines import (
    ArimaForecaster,
    ArimaModel,
    EtsForecaster,
    EtsModel,
    fit_arima,
    fit_ets,
    fit_ets_family,
    forecast_arima,
    forecast_ets,
    rolling_forecast_arima,
    rolling_forecast_ets,
    select_by_aic,
)
from .ensemble import (
    Ensemble,
    EnsembleSpec,
    Member,
    MemberScore,
    combine_deltas,
    make_spec,
    softmax_weights,
)
from .exceptions import ConfigError, DataError, DivergenceError
from .ingest import (
    CHANNELS,
    DEFAULT_PERIOD,
    GapRecord,
    PartitionSpec,
    RawSeries,
    SensorFrame,
    build_frames,
    default_partition,
    fill_gaps,
    load_csv,
    resample,
    split,
)
from .metrics import (
    AggregateError,
    WindowError,
    aggregate,
    evaluate_forecasts,
    horizon_profile,
    mae,
    rmse,
    smape,
    window_errors,
)
from .mi import (
    DEFAULT_BINS,
    MiReport,
    build_report,
    entropy,
    mutual_information,
    normalized_mi,
)
from .mlp import MlpConfig, MlpForecaster, TrainReport, train
from .persist import load_model, save_model
from .preprocess import (
    NormStats,
    PatternBuilder,
    PatternSet,
    WindowSpec,
    build_patterns,
    compute_norm_stats,
    difference,
    invert_difference,
)
from .search import (
    DEFAULT_SWEEP,
    GridSpec,
    TrainSettings,
    box_stats,
    enumerate_grid,
    run_grid,
    sweep_past_sizes,
)
from .synth import SynthConfig, generate, write_csv

__version__ = "0.1.0"

__all__ = [
    "AggregateError",
    "ArimaForecaster",
    "ArimaModel",
    "CHANNELS",
    "ConfigError",
    "DEFAULT_BINS",
    "DEFAULT_PERIOD",
    "DEFAULT_SWEEP",
    "DataError",
    "DivergenceError",
    "Ensemble",
    "EnsembleSpec",
    "EtsForecaster",
    "EtsModel",
    "GapRecord",
    "GridSpec",
    "Member",
    "MemberScore",
    "MiReport",
    "MlpConfig",
    "MlpForecaster",
    "NormStats",
    "PartitionSpec",
    "PatternBuilder",
    "PatternSet",
    "RawSeries",
    "SensorFrame",
    "SynthConfig",
    "TrainReport",
    "TrainSettings",
    "WindowError",
    "WindowSpec",
    "aggregate",
    "box_stats",
    "build_frames",
    "build_patterns",
    "build_report",
    "combine_deltas",
    "compute_norm_stats",
    "default_partition",
    "difference",
    "entropy",
    "enumerate_grid",
    "evaluate_forecasts",
    "fill_gaps",
    "fit_arima",
    "fit_ets",
    "fit_ets_family",
    "forecast_arima",
    "forecast_ets",
    "generate",
    "horizon_profile",
    "invert_difference",
    "load_csv",
    "load_model",
    "mae",
    "make_spec",
    "mutual_information",
    "normalized_mi",
    "resample",
    "rmse",
    "rolling_forecast_arima",
    "rolling_forecast_ets",
    "run_grid",
    "save_model",
    "select_by_aic",
    "smape",
    "softmax_weights",
    "split",
    "sweep_past_sizes",
    "train",
    "window_errors",
    "write_csv",
]
