"""Kalman-Bucy filtering for linear systems with uncertain parameters.

A finite family of parameter realizations ``(A, Gamma, R, Q)`` is filtered
member by member; the results are aggregated by three ensemble estimators
(averaged matrices, averaged filters, expected-energy minimizer) plus an
expected-gain variant.
"""
from ._backend import BACKEND
from .diagnostics import (
    DiagnosticSeries,
    brute_force_energy,
    diag_dominance,
    expected_energy,
    generalized_precision,
    mahalanobis,
    system_deviation,
    value_function,
    weighted_error_series,
)
from .ensemble import EnsembleResult, ParameterSpace, build_parameter_space, run_ensemble
from .errors import (
    ConfigurationError,
    DomainError,
    KalmanError,
    NonConvergenceError,
    NumericalError,
    ValidationError,
)
from .estimators import (
    EstimatorOutput,
    compute_estimators,
    energy_min_estimator,
    expected_filter_estimator,
    expected_gain_estimator,
    expected_matrices_estimator,
)
from .filter import KalmanRun, run_filter
from .model import (
    MatrixTrajectory,
    SharedModel,
    SpdMatrix,
    SystemTuple,
    TimeGrid,
    Trajectory,
    evaluate,
)
from .experiment import ExperimentConfig, ExperimentReport, load_config, run_experiment
from .odeint import IntegratorConfig, integrate
from .riccati import (
    RiccatiSolution,
    make_solution,
    solve_covariance_riccati,
    solve_precision_riccati,
)
from .scenarios import (
    ScenarioBundle,
    amplidyne_scenario,
    build_scenario,
    inline_scenario,
    oscillator_scenario,
)
from .synth import DisturbanceRealization, generate_measurement, sample_disturbances

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ConfigurationError",
    "DiagnosticSeries",
    "DisturbanceRealization",
    "DomainError",
    "EnsembleResult",
    "EstimatorOutput",
    "ExperimentConfig",
    "ExperimentReport",
    "IntegratorConfig",
    "KalmanError",
    "KalmanRun",
    "MatrixTrajectory",
    "NonConvergenceError",
    "NumericalError",
    "ParameterSpace",
    "RiccatiSolution",
    "ScenarioBundle",
    "SharedModel",
    "SpdMatrix",
    "SystemTuple",
    "TimeGrid",
    "Trajectory",
    "ValidationError",
    "amplidyne_scenario",
    "build_scenario",
    "brute_force_energy",
    "build_parameter_space",
    "compute_estimators",
    "diag_dominance",
    "energy_min_estimator",
    "evaluate",
    "expected_energy",
    "expected_filter_estimator",
    "expected_gain_estimator",
    "expected_matrices_estimator",
    "generalized_precision",
    "generate_measurement",
    "inline_scenario",
    "integrate",
    "load_config",
    "mahalanobis",
    "make_solution",
    "oscillator_scenario",
    "run_ensemble",
    "run_experiment",
    "run_filter",
    "sample_disturbances",
    "solve_covariance_riccati",
    "solve_precision_riccati",
    "system_deviation",
    "value_function",
    "weighted_error_series",
]
