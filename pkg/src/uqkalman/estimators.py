"""Ensemble state estimators for the uncertain system.

``expected_matrices``
    One Kalman filter for the averaged tuple ``(A_E, Gamma_E, R_E, Q_E)``.
``expected_filter``
    Unweighted mean of the member filters.
``energy_min``
    Minimizer of the expected energy: the precision-weighted mean
    ``(sum_k P_k)^{-1} sum_k P_k x_k``.
``expected_gain``
    Filter with ``A_E`` and ``Q_E`` whose gain uses the averaged member
    covariance ``(1/N) sum_k Pi_k`` instead of ``Pi_E``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg as la

from .ensemble import EnsembleResult, ParameterSpace
from .errors import ConfigurationError, NumericalError
from .filter import filter_with_covariance, run_filter
from .model import MatrixTrajectory, SharedModel, SystemTuple, TimeGrid, Trajectory, symmetrize
from .odeint import IntegratorConfig
from .riccati import make_solution

KINDS = ("expected_matrices", "expected_filter", "energy_min", "expected_gain")


@dataclass(frozen=True, eq=False)
class EstimatorOutput:
    kind: str
    estimate: Trajectory
    aux: Optional[MatrixTrajectory] = None


def mean_system(space: ParameterSpace) -> SystemTuple:
    """Entrywise mean of the member tuples."""
    members = space.members
    return SystemTuple(
        np.mean([s.a for s in members], axis=0),
        symmetrize(np.mean([s.gamma.data for s in members], axis=0)),
        symmetrize(np.mean([s.r.data for s in members], axis=0)),
        symmetrize(np.mean([s.q.data for s in members], axis=0)),
    )


def expected_matrices_estimator(
    space: ParameterSpace,
    shared: SharedModel,
    measurement: Trajectory,
    grid: TimeGrid,
    config: IntegratorConfig = IntegratorConfig(),
    *,
    backend=None,
) -> EstimatorOutput:
    sys = mean_system(space)
    solution = make_solution(sys, shared, grid, config, backend=backend)
    run = run_filter(sys, shared, measurement, solution, grid, config, backend=backend)
    return EstimatorOutput("expected_matrices", run.estimate, solution.covariance)


def _pin_initial(estimate: np.ndarray, members: np.ndarray) -> np.ndarray:
    # all members start from x0; keep the aggregate bit-exact there
    if np.all(members[:, 0] == members[0, 0]):
        estimate[0] = members[0, 0]
    return estimate


def expected_filter_estimator(ensemble: EnsembleResult) -> EstimatorOutput:
    if len(ensemble) == 0:
        raise ConfigurationError("ensemble is empty")
    members = ensemble.estimates
    mean = _pin_initial(members.mean(axis=0), members)
    return EstimatorOutput("expected_filter", Trajectory(ensemble.grid, mean))


def precision_weighted_mean(precisions: np.ndarray, estimates: np.ndarray):
    """Nodewise ``(sum_k P_k)^{-1} sum_k P_k x_k``.

    ``precisions`` has shape ``(N, J, n, n)`` and ``estimates`` ``(N, J, n)``.
    Returns the weighted mean ``(J, n)`` and the summed precision ``(J, n, n)``.
    """
    total = symmetrize(precisions.sum(axis=0))
    weighted = np.einsum("kjab,kjb->ja", precisions, estimates)
    out = np.empty_like(weighted)
    for j in range(total.shape[0]):
        try:
            factor = la.cho_factor(total[j], lower=True, check_finite=True)
        except (la.LinAlgError, ValueError):
            raise NumericalError(f"summed precision is singular at node {j}", node=j) from None
        out[j] = la.cho_solve(factor, weighted[j])
    return out, total


def energy_min_estimator(ensemble: EnsembleResult) -> EstimatorOutput:
    if len(ensemble) == 0:
        raise ConfigurationError("ensemble is empty")
    members = ensemble.estimates
    estimate, total = precision_weighted_mean(ensemble.precisions, members)
    estimate = _pin_initial(estimate, members)
    grid = ensemble.grid
    return EstimatorOutput(
        "energy_min", Trajectory(grid, estimate), MatrixTrajectory(grid, total, spd=True)
    )


def expected_gain_estimator(
    space: ParameterSpace,
    ensemble: EnsembleResult,
    shared: SharedModel,
    measurement: Trajectory,
    grid: TimeGrid,
    config: IntegratorConfig = IntegratorConfig(),
    *,
    backend=None,
) -> EstimatorOutput:
    if len(ensemble) != len(space):
        raise ConfigurationError("ensemble does not match the parameter space")
    sys = mean_system(space)
    covariance = MatrixTrajectory(grid, symmetrize(ensemble.covariances.mean(axis=0)), spd=True)
    estimate = filter_with_covariance(
        sys, shared, measurement, covariance, grid, config, backend=backend
    )
    return EstimatorOutput("expected_gain", estimate, covariance)


def compute_estimators(
    kinds,
    space: ParameterSpace,
    ensemble: EnsembleResult,
    shared: SharedModel,
    measurement: Trajectory,
    grid: TimeGrid,
    config: IntegratorConfig = IntegratorConfig(),
    *,
    backend=None,
) -> dict:
    """Evaluate the requested estimator kinds, keyed by kind in ``KINDS`` order."""
    unknown = set(kinds) - set(KINDS)
    if unknown:
        raise ConfigurationError(f"unknown estimator kinds: {sorted(unknown)}")
    out = {}
    for kind in KINDS:
        if kind not in kinds:
            continue
        if kind == "expected_matrices":
            out[kind] = expected_matrices_estimator(
                space, shared, measurement, grid, config, backend=backend
            )
        elif kind == "expected_filter":
            out[kind] = expected_filter_estimator(ensemble)
        elif kind == "energy_min":
            out[kind] = energy_min_estimator(ensemble)
        else:
            out[kind] = expected_gain_estimator(
                space, ensemble, shared, measurement, grid, config, backend=backend
            )
    return out
