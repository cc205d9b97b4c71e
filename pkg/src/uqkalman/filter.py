"""Kalman-Bucy filter ODE for a single parameter realization.

    x_hat' = A x_hat + f(t) + Pi(t) C^T Q^{-1} (y(t) - C x_hat),   x_hat(0) = x0

The covariance trajectory is precomputed (it does not depend on ``y``) and
the gain ``Pi(t) C^T Q^{-1}`` is interpolated linearly between grid nodes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from .errors import ConfigurationError
from .model import MatrixTrajectory, SharedModel, SystemTuple, TimeGrid, Trajectory
from .odeint import IntegratorConfig
from .riccati import RiccatiSolution


@dataclass(frozen=True, eq=False)
class KalmanRun:
    estimate: Trajectory
    riccati: RiccatiSolution
    sys: SystemTuple
    shared: SharedModel
    residual: Trajectory


def _check_grid(grid: TimeGrid, *trajectories):
    for traj in trajectories:
        if traj.grid != grid:
            raise ConfigurationError("all trajectories must share the filter grid")


def filter_with_covariance(
    sys: SystemTuple,
    shared: SharedModel,
    measurement: Trajectory,
    covariance: MatrixTrajectory,
    grid: TimeGrid,
    config: IntegratorConfig = IntegratorConfig(),
    *,
    q_inverse=None,
    backend=None,
) -> Trajectory:
    """Integrate the filter ODE with an explicitly supplied covariance trajectory.

    ``q_inverse`` overrides ``sys.q.inverse`` in the gain; used by the
    expected-gain estimator and by tests that inject a constant ``Pi``.
    """
    sys.check_against(shared)
    _check_grid(grid, measurement, covariance)
    r = shared.c.shape[0]
    if measurement.dim != r:
        raise ConfigurationError(f"measurement has dimension {measurement.dim}, expected {r}")
    if covariance.dim != sys.n:
        raise ConfigurationError("covariance dimension does not match the state")
    q_inv = sys.q.inverse if q_inverse is None else np.asarray(q_inverse, dtype=float)
    gain = covariance.values @ (shared.c.T @ q_inv)
    kernels = _backend.get_kernels(backend)
    values = kernels.affine(
        sys.a, shared.c, gain, measurement.values, shared.forcing_on(grid), shared.x0,
        grid.nodes, config.rel_tol, config.abs_tol, config.max_steps, config.first_step(grid),
    )
    values[0] = shared.x0
    return Trajectory(grid, values)


def residual_of(estimate: Trajectory, shared: SharedModel, measurement: Trajectory) -> Trajectory:
    """``y(t_j) - C x_hat(t_j)`` at every node."""
    return Trajectory(estimate.grid, measurement.values - estimate.values @ shared.c.T)


def run_filter(
    sys: SystemTuple,
    shared: SharedModel,
    measurement: Trajectory,
    riccati: RiccatiSolution,
    grid: TimeGrid,
    config: IntegratorConfig = IntegratorConfig(),
    *,
    backend=None,
) -> KalmanRun:
    estimate = filter_with_covariance(
        sys, shared, measurement, riccati.covariance, grid, config, backend=backend
    )
    return KalmanRun(estimate, riccati, sys, shared, residual_of(estimate, shared, measurement))
