"""Conformal OOD safety constraints with Monte-Carlo PAC certification."""

from .bounds import (
    BoundQuery,
    EpsilonBound,
    binomial_condition_holds,
    epsilon_adjusted,
    epsilon_chernoff,
    epsilon_no_violations,
    exact_epsilon,
    pac_sample_complexity,
)
from .conformal import (
    IN_DISTRIBUTION,
    CalibrationSet,
    ConformalPredictor,
    KernelSpec,
    calibrate,
    conformity,
    conformity_many,
    is_safe,
    kde_score,
    load_calibration_csv,
    load_predictor,
    predict_set,
    save_calibration_csv,
    save_predictor,
)
from .errors import FormatError, ValidationError
from .harness import (
    ExperimentSpec,
    TrialRecord,
    ViolationStats,
    emit_plot_data,
    emit_table,
    run_grid,
    violation_study,
)
from .latent import GaussianLatentModel, SampleStream, load_model, log_density, sample, save_model
from .verifier import (
    ScenarioResult,
    VerificationConfig,
    VerificationReport,
    count_violations,
    scenario_relax,
    verify,
)

__version__ = "0.1.0"

__all__ = [
    "BoundQuery",
    "CalibrationSet",
    "ConformalPredictor",
    "EpsilonBound",
    "ExperimentSpec",
    "FormatError",
    "GaussianLatentModel",
    "IN_DISTRIBUTION",
    "KernelSpec",
    "SampleStream",
    "ScenarioResult",
    "TrialRecord",
    "ValidationError",
    "VerificationConfig",
    "VerificationReport",
    "ViolationStats",
    "binomial_condition_holds",
    "calibrate",
    "conformity",
    "conformity_many",
    "count_violations",
    "emit_plot_data",
    "emit_table",
    "epsilon_adjusted",
    "epsilon_chernoff",
    "epsilon_no_violations",
    "exact_epsilon",
    "is_safe",
    "kde_score",
    "load_calibration_csv",
    "load_model",
    "load_predictor",
    "log_density",
    "pac_sample_complexity",
    "predict_set",
    "run_grid",
    "sample",
    "save_calibration_csv",
    "save_model",
    "save_predictor",
    "scenario_relax",
    "verify",
    "violation_study",
]
