"""Forward differential Riccati equations for the error covariance and precision.

Covariance::

    Pi' = A Pi + Pi A^T - Pi C^T Q^{-1} C Pi + B R B^T,   Pi(0) = Gamma

Precision (the inverse of ``Pi``)::

    P' = -A^T P - P A - P B R B^T P + C^T Q^{-1} C,       P(0) = Gamma^{-1}

Both are instances of ``X' = F X + X F^T - X S X + W`` and share one kernel.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import _backend
from .errors import NumericalError
from .model import MatrixTrajectory, SharedModel, SystemTuple, TimeGrid, symmetrize
from .odeint import IntegratorConfig

DUALITY_TOL = 1e-6


class PrecisionReplacedWarning(RuntimeWarning):
    """Precision trajectory was rebuilt by inverting the covariance nodewise."""


@dataclass(frozen=True, eq=False)
class RiccatiSolution:
    covariance: MatrixTrajectory
    precision: MatrixTrajectory
    precision_replaced: bool = False
    duality_error: float = 0.0


def measurement_weight(sys: SystemTuple, shared: SharedModel) -> np.ndarray:
    """``C^T Q^{-1} C``."""
    return symmetrize(shared.c.T @ sys.q.inverse @ shared.c)


def process_weight(sys: SystemTuple, shared: SharedModel) -> np.ndarray:
    """``B R B^T``."""
    return symmetrize(shared.b @ sys.r.data @ shared.b.T)


def _check_definite(values: np.ndarray, what: str) -> None:
    try:
        np.linalg.cholesky(values)
        return
    except np.linalg.LinAlgError:
        pass
    for j, x in enumerate(values):
        try:
            np.linalg.cholesky(x)
        except np.linalg.LinAlgError:
            raise NumericalError(f"{what} lost positive definiteness at node {j}", node=j) from None


def _solve(f, s, w, x0, grid, config, what, backend=None):
    kernels = _backend.get_kernels(backend)
    raw = kernels.riccati(
        f, s, w, x0, grid.nodes,
        config.rel_tol, config.abs_tol, config.max_steps, config.first_step(grid),
    )
    values = symmetrize(raw)
    values[0] = x0
    if not np.all(np.isfinite(values)):
        bad = int(np.nonzero(~np.isfinite(values).all(axis=(1, 2)))[0][0])
        raise NumericalError(f"{what} is not finite at node {bad}", node=bad)
    _check_definite(values, what)
    return MatrixTrajectory(grid, values, spd=True)


def solve_covariance_riccati(
    sys: SystemTuple,
    shared: SharedModel,
    grid: TimeGrid,
    config: IntegratorConfig = IntegratorConfig(),
    *,
    backend=None,
) -> MatrixTrajectory:
    sys.check_against(shared)
    return _solve(
        sys.a, measurement_weight(sys, shared), process_weight(sys, shared),
        sys.gamma.data, grid, config, "covariance", backend,
    )


def solve_precision_riccati(
    sys: SystemTuple,
    shared: SharedModel,
    grid: TimeGrid,
    config: IntegratorConfig = IntegratorConfig(),
    *,
    backend=None,
) -> MatrixTrajectory:
    sys.check_against(shared)
    return _solve(
        -sys.a.T, process_weight(sys, shared), measurement_weight(sys, shared),
        sys.gamma.inverse, grid, config, "precision", backend,
    )


def duality_defect(covariance: MatrixTrajectory, precision: MatrixTrajectory) -> np.ndarray:
    """Nodewise ``max |Pi P - I|``."""
    n = covariance.dim
    prod = covariance.values @ precision.values
    return np.max(np.abs(prod - np.eye(n)), axis=(1, 2))


def make_solution(
    sys: SystemTuple,
    shared: SharedModel,
    grid: TimeGrid,
    config: IntegratorConfig = IntegratorConfig(),
    *,
    backend=None,
) -> RiccatiSolution:
    """Integrate both Riccati forms and cross-check ``Pi P = I`` at every node.

    If the check fails beyond ``DUALITY_TOL`` the precision is replaced by
    nodewise inversion of the covariance and ``precision_replaced`` is set.
    ``duality_error`` always reports the defect of the two integrated
    solutions, before any replacement.
    """
    covariance = solve_covariance_riccati(sys, shared, grid, config, backend=backend)
    precision = solve_precision_riccati(sys, shared, grid, config, backend=backend)
    defect = float(np.max(duality_defect(covariance, precision)))
    if defect <= DUALITY_TOL:
        return RiccatiSolution(covariance, precision, False, defect)

    warnings.warn(
        f"covariance/precision mismatch {defect:.3e} > {DUALITY_TOL}; inverting covariance",
        PrecisionReplacedWarning,
        stacklevel=2,
    )
    inverted = np.empty_like(covariance.values)
    eye = np.eye(covariance.dim)
    for j, pi in enumerate(covariance.values):
        try:
            factor = np.linalg.cholesky(pi)
        except np.linalg.LinAlgError:
            raise NumericalError(f"covariance not invertible at node {j}", node=j) from None
        inv = np.linalg.solve(factor.T, np.linalg.solve(factor, eye))
        inverted[j] = inv
    inverted = symmetrize(inverted)
    replaced = MatrixTrajectory(grid, inverted, spd=True)
    return RiccatiSolution(covariance, replaced, True, defect)
