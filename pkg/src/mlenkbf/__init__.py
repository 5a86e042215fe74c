"""Multilevel ensemble Kalman--Bucy filtering for linear-Gaussian models.

The package provides exact-grid Kalman--Bucy references, single-level
ensemble filters (stochastic and deterministic transport variants), coupled
multilevel estimators built on counter-based noise streams, and a benchmark
harness that measures cost-vs-MSE rates.
"""

from .errors import (
    BadConfig,
    BadEpsilon,
    BadLength,
    DimensionMismatch,
    EnkbfError,
    AssumptionWarning,
    LevelMismatch,
    NonPositive,
    NotPSD,
    NotSymmetric,
    PlanPathMismatch,
    Singular,
    TooFewParticles,
    TooFewPoints,
)
from .model import (
    LinearGaussianModel,
    StabilityReport,
    model_from_json,
    model_to_json,
    random_model,
    stability_report,
    sym_psd_sqrt,
    validate_model,
)
from .paths import (
    NoiseRole,
    NoiseStream,
    PathBundle,
    aggregate_increments,
    generate_path,
    write_path_csv,
)
from .reference import (
    ReferenceState,
    ReferenceTrajectory,
    kbf_mean_step,
    riccati_covariances,
    riccati_step,
    run_reference,
    write_reference_csv,
)
from .ensemble import (
    Ensemble,
    SampleMoments,
    StepCoefficients,
    collapsed_step,
    denkbf_step,
    enkbf_step,
    iid_step,
    init_ensemble,
    recursion_check,
    run_single_level,
    sample_moments,
    step_coefficients,
)
from .multilevel import (
    CoupledPair,
    LevelPlan,
    coupled_pair_step,
    init_coupled_pair,
    ml_estimate,
    plan_allocation,
    plan_to_json,
    run_coupled_level,
)
from .harness import (
    MseEstimate,
    PocConfig,
    PocRow,
    RateFit,
    SweepConfig,
    SweepRow,
    cost_mse_sweep,
    estimate_mse,
    fit_rate,
    poc_sweep,
    write_poc_csv,
    write_rates_csv,
    write_sweep_csv,
)
from .records import RunRecord, write_run_csv

__version__ = "0.1.0"

__all__ = [
    "AssumptionWarning",
    "BadConfig",
    "BadEpsilon",
    "BadLength",
    "CoupledPair",
    "DimensionMismatch",
    "EnkbfError",
    "Ensemble",
    "LevelMismatch",
    "LevelPlan",
    "LinearGaussianModel",
    "MseEstimate",
    "NoiseRole",
    "NoiseStream",
    "NonPositive",
    "NotPSD",
    "NotSymmetric",
    "PathBundle",
    "PlanPathMismatch",
    "PocConfig",
    "PocRow",
    "RateFit",
    "ReferenceState",
    "ReferenceTrajectory",
    "RunRecord",
    "SampleMoments",
    "Singular",
    "StabilityReport",
    "StepCoefficients",
    "SweepConfig",
    "SweepRow",
    "TooFewParticles",
    "TooFewPoints",
    "aggregate_increments",
    "collapsed_step",
    "cost_mse_sweep",
    "coupled_pair_step",
    "denkbf_step",
    "enkbf_step",
    "estimate_mse",
    "fit_rate",
    "generate_path",
    "iid_step",
    "init_coupled_pair",
    "init_ensemble",
    "kbf_mean_step",
    "ml_estimate",
    "model_from_json",
    "model_to_json",
    "plan_allocation",
    "plan_to_json",
    "poc_sweep",
    "random_model",
    "recursion_check",
    "riccati_covariances",
    "riccati_step",
    "run_coupled_level",
    "run_reference",
    "run_single_level",
    "sample_moments",
    "stability_report",
    "step_coefficients",
    "sym_psd_sqrt",
    "validate_model",
    "write_path_csv",
    "write_poc_csv",
    "write_rates_csv",
    "write_reference_csv",
    "write_run_csv",
    "write_sweep_csv",
]
