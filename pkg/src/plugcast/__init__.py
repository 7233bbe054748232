"""Day-ahead forecasting of half-hourly minimum EV plug-in counts.

The pipeline: charging events are parsed and filtered, summed into a
minutely occupancy series, collapsed to half-hourly minima, masked for
unreliable stretches, turned into calendar-lag feature rows, and forecast
with a persistence rule, per-day linear models, and small neural networks
trained from scratch. A synthetic event generator stands in for private
source data.
"""

from .errors import (
    AlignmentError,
    ConfigError,
    DataError,
    DegenerateSeriesError,
    DivergenceError,
    FitError,
    InsufficientHistoryError,
    PlugcastError,
    SchemaError,
    TrainingError,
    UndefinedStatisticError,
)
from .evaluate import (
    EvaluationReport,
    GroupedDistribution,
    MetricSet,
    ResidualStats,
    build_report,
    compute_metrics,
    exogenous_correlation,
    grouped_distribution,
    lag_correlation_by_day,
    pearson,
    residual_stats,
    residuals,
    spearman,
)
from .features import FeatureMatrix, FeatureSpec, build_matrix, one_hot, split_rows
from .ingest import ChargingEvent, IngestReport, filter_overlong, parse_events
from .models import (
    GlmModel,
    MlpModel,
    PersistenceModel,
    TrainConfig,
    adam_step,
    fit_glm,
    init_mlp,
    load_artifact,
    persistence_predict,
    save_artifact,
    train_mlp,
)
from .series import (
    AdfResult,
    ExclusionConfig,
    PluginSeries,
    adf_test,
    aggregate_events,
    apply_exclusions,
    occupancy_range,
    resample_half_hourly_min,
)
from .synth import SynthConfig, default_config, generate_events

__version__ = "0.1.0"

__all__ = [
    "AdfResult",
    "AlignmentError",
    "ChargingEvent",
    "ConfigError",
    "DataError",
    "DegenerateSeriesError",
    "DivergenceError",
    "EvaluationReport",
    "ExclusionConfig",
    "FeatureMatrix",
    "FeatureSpec",
    "FitError",
    "GlmModel",
    "GroupedDistribution",
    "IngestReport",
    "InsufficientHistoryError",
    "MetricSet",
    "MlpModel",
    "PersistenceModel",
    "PlugcastError",
    "PluginSeries",
    "ResidualStats",
    "SchemaError",
    "SynthConfig",
    "TrainConfig",
    "TrainingError",
    "UndefinedStatisticError",
    "adam_step",
    "adf_test",
    "aggregate_events",
    "apply_exclusions",
    "build_matrix",
    "build_report",
    "compute_metrics",
    "default_config",
    "exogenous_correlation",
    "filter_overlong",
    "fit_glm",
    "generate_events",
    "grouped_distribution",
    "init_mlp",
    "lag_correlation_by_day",
    "load_artifact",
    "occupancy_range",
    "one_hot",
    "parse_events",
    "pearson",
    "persistence_predict",
    "residual_stats",
    "residuals",
    "resample_half_hourly_min",
    "save_artifact",
    "spearman",
    "split_rows",
    "train_mlp",
]
