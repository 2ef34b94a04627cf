"""Stress-dependent Wiener-process degradation models with a temperature
mechanism transition: likelihood fitting, mechanism determination and Monte
Carlo reliability prediction.
"""
from .evaluation import DivergenceReport, MetricReport, aic, cmd, kld, loso_extrapolation, rmse, robustness
from .inference import (
    IntervalEstimate,
    MechanismVerdict,
    SubsampleConfig,
    determine_mechanism,
    subsample_intervals,
)
from .likelihood import PENALTY, covariance_matrix, total_loglik, unit_loglik
from .model import (
    DEFAULT_NORMALIZATION,
    PARAM_NAMES,
    REFERENCE_PARAMS,
    DegradationDataset,
    DomainError,
    ModelParams,
    ModelVariant,
    StressLevel,
    StressNormalization,
    StressVector,
    UnitSeries,
    mean_trajectory,
    phi1,
    phi3,
    rate,
    standardize_humidity,
    standardize_temperature,
)
from .optimize import Bounds, FitResult, OptimizationError, OptimizerConfig, fit, multi_run_stats
from .reliability import (
    LifetimeSample,
    MCConfig,
    ReliabilityCurve,
    StressProfile,
    lifetime,
    reliability_bands,
    reliability_curve,
    simulate_path,
    storage_profile,
)
from .synth import ExperimentDesign, generate_dataset

__all__ = [name for name in dir() if not name.startswith("_")]
