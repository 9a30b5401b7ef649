"""Nonparametric estimation of a monotone preference function from
sequential binary choices, with likelihood-ratio confidence sets and a
simulation-study driver."""

from .inference import (
    DEFAULT_CI_GRID_STEP,
    QUANTILE_LEVELS,
    ConfidenceInterval,
    DQuantileTable,
    LrProfile,
    confidence_set,
    default_quantiles,
    fit_constrained,
    fit_npmle,
    lr_profile,
    lr_statistic,
    simulate_d_quantiles,
)
from .ingest import (
    CategoriesResult,
    CategoryColumns,
    EventColumns,
    GroupSpec,
    IngestRules,
    IngestSummary,
    LoadResult,
    Membership,
    RatingEvent,
    RowError,
    classify_item,
    extract_pairwise,
    load_categories,
    load_events,
)
from .isotonic import IsotonicFit, WeightedSeries, constrained_fit, gcm_slopes, isotonic_fit, pava
from .metrics import (
    EVAL_GRID,
    PerReplication,
    ReliabilityBins,
    ReplicationSummary,
    ece,
    nadaraya_watson_oracle,
    oracle_curve,
    reliability_bins,
    summarize_replications,
    test_error,
)
from .model import (
    ChoiceEvent,
    ChoicePairs,
    ChoiceTrajectory,
    MonotoneStepFn,
    PooledSample,
    eval_step,
    loglik,
    pool,
    pool_pairs,
    read_trajectories,
    relative_intensities,
    write_trajectories,
)
from .simulate import (
    ConstantLength,
    DegenerateIntensity,
    PersistentIntensity,
    PreferenceSpec,
    SimConfig,
    TruncatedPoissonLength,
    UniformIntensity,
    draw_intensities,
    draw_length,
    gen_trajectory,
    generate_dataset,
    gerw_preference,
    split_train_test,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "DEFAULT_CI_GRID_STEP",
    "QUANTILE_LEVELS",
    "EVAL_GRID",
    "WeightedSeries",
    "IsotonicFit",
    "pava",
    "isotonic_fit",
    "gcm_slopes",
    "constrained_fit",
    "ChoiceEvent",
    "ChoiceTrajectory",
    "ChoicePairs",
    "PooledSample",
    "MonotoneStepFn",
    "relative_intensities",
    "pool",
    "pool_pairs",
    "loglik",
    "eval_step",
    "read_trajectories",
    "write_trajectories",
    "ConfidenceInterval",
    "DQuantileTable",
    "LrProfile",
    "fit_npmle",
    "fit_constrained",
    "lr_statistic",
    "lr_profile",
    "confidence_set",
    "simulate_d_quantiles",
    "default_quantiles",
    "PreferenceSpec",
    "gerw_preference",
    "ConstantLength",
    "TruncatedPoissonLength",
    "DegenerateIntensity",
    "UniformIntensity",
    "PersistentIntensity",
    "SimConfig",
    "draw_length",
    "draw_intensities",
    "gen_trajectory",
    "generate_dataset",
    "split_train_test",
    "oracle_curve",
    "nadaraya_watson_oracle",
    "test_error",
    "ReliabilityBins",
    "reliability_bins",
    "ece",
    "PerReplication",
    "ReplicationSummary",
    "summarize_replications",
    "RatingEvent",
    "Membership",
    "GroupSpec",
    "IngestRules",
    "EventColumns",
    "CategoryColumns",
    "RowError",
    "LoadResult",
    "CategoriesResult",
    "IngestSummary",
    "classify_item",
    "load_events",
    "load_categories",
    "extract_pairwise",
]
