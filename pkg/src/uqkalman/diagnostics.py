"""Value functions, energies, Mahalanobis distances and precision summaries."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import cumulative_trapezoid

from .ensemble import EnsembleResult, ParameterSpace
from .errors import ConfigurationError, NumericalError
from .filter import KalmanRun, residual_of
from .model import SharedModel, SpdMatrix, SystemTuple, TimeGrid, Trajectory

BRUTE_FORCE_MAX_UNKNOWNS = 5000


@dataclass(frozen=True, eq=False)
class DiagnosticSeries:
    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float).reshape(-1)
        if values.shape[0] != self.grid.size:
            raise ConfigurationError(f"series needs {self.grid.size} values, got {values.shape[0]}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


def _mat(precision):
    return precision.data if isinstance(precision, SpdMatrix) else np.asarray(precision, dtype=float)


def mahalanobis(xi, mean, precision) -> float:
    """``sqrt((xi - mean)^T P (xi - mean))``."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    p = _mat(precision)
    if xi.shape != mean.shape or p.shape != (xi.size, xi.size):
        raise ConfigurationError("precision and vector dimensions differ")
    d = xi - mean
    return float(np.sqrt(max(0.0, d @ p @ d)))


def generalized_precision(precision) -> float:
    """Determinant of an SPD precision matrix from its Cholesky factor."""
    factor = la.cholesky(_mat(precision), lower=True)
    return float(np.prod(np.diag(factor)) ** 2)


def diag_dominance(precision) -> float:
    """``min_j |p_jj| / sum_i |p_ji|``; at least 0.5 means diagonally dominant."""
    p = np.abs(_mat(precision))
    rows = p.sum(axis=1)
    if np.any(rows == 0):
        raise NumericalError("precision matrix has a zero row")
    return float(np.min(np.diag(p) / rows))


def generalized_precision_series(precisions: np.ndarray, grid: TimeGrid) -> DiagnosticSeries:
    factors = np.linalg.cholesky(precisions)
    diag = np.diagonal(factors, axis1=-2, axis2=-1)
    return DiagnosticSeries(grid, np.prod(diag, axis=-1) ** 2)


def diag_dominance_series(precisions: np.ndarray, grid: TimeGrid) -> DiagnosticSeries:
    p = np.abs(precisions)
    rows = p.sum(axis=-1)
    if np.any(rows == 0):
        raise NumericalError("precision matrix has a zero row")
    return DiagnosticSeries(grid, np.min(np.diagonal(p, axis1=-2, axis2=-1) / rows, axis=-1))


def _residual_energy(run: KalmanRun, measurement: Optional[Trajectory]) -> np.ndarray:
    """Cumulative trapezoidal ``int_0^{t_j} |y - C x_hat|^2_{Q^{-1}}`` per node."""
    residual = run.residual if measurement is None else residual_of(run.estimate, run.shared, measurement)
    r = residual.values
    integrand = np.einsum("ja,ab,jb->j", r, run.sys.q.inverse, r)
    return cumulative_trapezoid(integrand, residual.grid.nodes, initial=0.0)


def value_function(
    run: KalmanRun, t_index: int, xi, measurement: Optional[Trajectory] = None
) -> float:
    """Minimal energy to reach ``xi`` at node ``t_index``.

    ``V = 1/2 |xi - x_hat|_P^2 + 1/2 int_0^t |y - C x_hat|^2_{Q^{-1}} ds`` with
    the integral taken by the trapezoidal rule on nodes ``0..t_index``.
    """
    x_hat = run.estimate.values[t_index]
    p = run.riccati.precision.values[t_index]
    d = np.asarray(xi, dtype=float) - x_hat
    return 0.5 * float(d @ p @ d) + 0.5 * float(_residual_energy(run, measurement)[t_index])


def brute_force_energy(
    sys: SystemTuple,
    shared: SharedModel,
    measurement: Trajectory,
    t_index: int,
    xi,
) -> float:
    """Independent oracle for :func:`value_function`.

    Discretizes the energy-minimization problem on the measurement grid with
    piecewise-constant disturbances and trapezoidal (Crank-Nicolson) dynamics
    ``x_{j+1} = x_j + h/2 (A x_j + A x_{j+1} + f_j + f_{j+1}) + h B v_j``,
    a rectangle rule for the disturbance energy, a trapezoidal rule for the
    output misfit and the terminal constraint ``x_K = xi``, then solves the
    KKT system of the resulting equality-constrained quadratic program. The
    error is second order in the grid step.
    """
    sys.check_against(shared)
    grid = measurement.grid
    n, m = sys.n, sys.r.dim
    K = int(t_index)
    if not 0 <= K < grid.size:
        raise ConfigurationError(f"t_index {t_index} outside the grid")
    nx, nv = n * (K + 1), m * K
    if nx + nv > BRUTE_FORCE_MAX_UNKNOWNS:
        raise ConfigurationError(f"{nx + nv} unknowns exceed the brute-force limit")
    h = grid.step
    xi = np.asarray(xi, dtype=float)
    y = measurement.values
    forcing = shared.forcing_on(grid)
    g_inv, r_inv, q_inv = sys.gamma.inverse, sys.r.inverse, sys.q.inverse
    c = shared.c
    ctqc = c.T @ q_inv @ c

    hess = sp.lil_matrix((nx + nv, nx + nv))
    lin = np.zeros(nx + nv)
    const = 0.5 * shared.x0 @ g_inv @ shared.x0
    hess[:n, :n] = g_inv
    lin[:n] -= g_inv @ shared.x0
    for j in range(K + 1):
        w = h if 0 < j < K else 0.5 * h
        if K == 0:
            w = 0.0
        sl = slice(j * n, (j + 1) * n)
        hess[sl, sl] = hess[sl, sl].toarray() + w * ctqc
        lin[sl] -= w * (c.T @ q_inv @ y[j])
        const += 0.5 * w * y[j] @ q_inv @ y[j]
    for j in range(K):
        sl = slice(nx + j * m, nx + (j + 1) * m)
        hess[sl, sl] = h * r_inv

    eq = sp.lil_matrix((n * K + n, nx + nv))
    rhs = np.zeros(n * K + n)
    behind = np.eye(n) + 0.5 * h * sys.a
    ahead = np.eye(n) - 0.5 * h * sys.a
    for j in range(K):
        rows = slice(j * n, (j + 1) * n)
        eq[rows, j * n:(j + 1) * n] = -behind
        eq[rows, (j + 1) * n:(j + 2) * n] = ahead
        eq[rows, nx + j * m:nx + (j + 1) * m] = -h * shared.b
        if forcing is not None:
            rhs[rows] = 0.5 * h * (forcing[j] + forcing[j + 1])
    eq[n * K:, K * n:(K + 1) * n] = np.eye(n)
    rhs[n * K:] = xi

    hess = hess.tocsr()
    eq = eq.tocsr()
    kkt = sp.bmat([[hess, eq.T], [eq, None]], format="csc")
    sol = spla.spsolve(kkt, np.concatenate([-lin, rhs]))
    if not np.all(np.isfinite(sol)):
        raise NumericalError("singular optimality system in brute-force energy")
    z = sol[: nx + nv]
    return float(0.5 * z @ (hess @ z) + lin @ z + const)


def expected_energy(
    ensemble: EnsembleResult, t_index: int, xi, measurement: Optional[Trajectory] = None
) -> float:
    """Mean of the member value functions at ``(t_index, xi)``."""
    return float(np.mean([value_function(run, t_index, xi, measurement) for run in ensemble.runs]))


def expected_energy_gradient(ensemble: EnsembleResult, t_index: int, xi) -> np.ndarray:
    """``(1/N) sum_k P_k (xi - x_k)``."""
    xi = np.asarray(xi, dtype=float)
    p = ensemble.precisions[:, t_index]
    x = ensemble.estimates[:, t_index]
    return np.einsum("kab,kb->a", p, xi - x) / len(ensemble)


def expected_energy_series(
    ensemble: EnsembleResult, xi: Trajectory, measurement: Optional[Trajectory] = None
) -> DiagnosticSeries:
    """Expected energy evaluated along a state trajectory, node by node."""
    d = xi.values[None] - ensemble.estimates
    quad = np.einsum("kja,kjab,kjb->kj", d, ensemble.precisions, d)
    integrals = np.stack([_residual_energy(run, measurement) for run in ensemble.runs])
    return DiagnosticSeries(ensemble.grid, 0.5 * (quad + integrals).mean(axis=0))


def expected_sq_mahalanobis(ensemble: EnsembleResult, t_index: int, xi) -> float:
    """``(1/N) sum_k |xi - x_k(t)|^2_{P_k(t)}``."""
    d = np.asarray(xi, dtype=float) - ensemble.estimates[:, t_index]
    return float(np.einsum("ka,kab,kb->", d, ensemble.precisions[:, t_index], d) / len(ensemble))


def expected_sq_mahalanobis_series(ensemble: EnsembleResult, xi: Trajectory) -> DiagnosticSeries:
    d = xi.values[None] - ensemble.estimates
    values = np.einsum("kja,kjab,kjb->j", d, ensemble.precisions, d) / len(ensemble)
    return DiagnosticSeries(ensemble.grid, values)


def _matrix_norm(x, kind):
    if kind == "spectral":
        return float(np.linalg.norm(x, 2))
    if kind == "frobenius":
        return float(np.linalg.norm(x, "fro"))
    raise ConfigurationError(f"unknown matrix norm {kind!r}")


def tuple_distance(s1: SystemTuple, s2: SystemTuple, p: int = 1, matrix_norm: str = "spectral") -> float:
    """``|S1 - S2|_p`` with componentwise differences of ``(A, Gamma, R, Q)``."""
    if p not in (1, 2):
        raise ConfigurationError("p must be 1 or 2")
    parts = [
        _matrix_norm(x - y, matrix_norm)
        for x, y in zip(
            (s1.a, s1.gamma.data, s1.r.data, s1.q.data),
            (s2.a, s2.gamma.data, s2.r.data, s2.q.data),
        )
    ]
    return float(sum(v ** p for v in parts) ** (1.0 / p))


def system_deviation(
    space: ParameterSpace, sigma_bar_index: int, p: int = 1, matrix_norm: str = "spectral"
):
    """Per-member deviations from member ``sigma_bar_index`` and their mean."""
    if not 0 <= sigma_bar_index < len(space):
        raise ConfigurationError(f"member index {sigma_bar_index} out of range")
    ref = space.members[sigma_bar_index]
    per_member = np.array([tuple_distance(s, ref, p, matrix_norm) for s in space.members])
    per_member[sigma_bar_index] = 0.0
    return per_member, float(per_member.mean())


def weighted_error_series(estimate: Trajectory, reference_run: KalmanRun) -> DiagnosticSeries:
    """``|x(t) - x_ref(t)|_{P_ref(t)}`` at every node."""
    ref = reference_run.estimate
    if estimate.grid != ref.grid:
        raise ConfigurationError("estimate and reference use different grids")
    d = estimate.values - ref.values
    sq = np.einsum("ja,jab,jb->j", d, reference_run.riccati.precision.values, d)
    return DiagnosticSeries(ref.grid, np.sqrt(np.maximum(sq, 0.0)))
