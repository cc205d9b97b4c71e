"""Core value types: SPD matrices, system tuples, time grids and trajectories.

All containers are immutable; array payloads are stored as read-only
``numpy`` arrays so they can be shared between threads without copying.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np
import scipy.linalg as la

from .errors import ConfigurationError, DomainError, ValidationError

SYMMETRY_RTOL = 1e-12
COMPUTED_SYMMETRY_RTOL = 1e-9


def _frozen(array, ndim=None, name="array"):
    arr = np.array(array, dtype=float)
    if ndim is not None and arr.ndim != ndim:
        raise ConfigurationError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


def as_matrix(value, name="matrix"):
    """Coerce scalars and nested sequences to a read-only 2-D float array."""
    arr = np.array(value, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2:
        raise ConfigurationError(f"{name} must be a matrix, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


def is_symmetric(matrix, rtol=SYMMETRY_RTOL):
    matrix = np.asarray(matrix)
    scale = max(1.0, float(np.max(np.abs(matrix), initial=0.0)))
    return float(np.max(np.abs(matrix - matrix.T), initial=0.0)) <= rtol * scale


def symmetrize(matrices):
    """Return ``(X + X^T) / 2`` over the last two axes."""
    matrices = np.asarray(matrices)
    return 0.5 * (matrices + np.swapaxes(matrices, -1, -2))


@dataclass(frozen=True, eq=False)
class SpdMatrix:
    """Symmetric positive definite matrix validated by a Cholesky factorization.

    Scalars are accepted and promoted to ``1 x 1`` matrices.
    """

    data: np.ndarray

    def __post_init__(self):
        data = as_matrix(self.data, "SPD matrix")
        if data.shape[0] != data.shape[1]:
            raise ValidationError(f"SPD matrix must be square, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValidationError("SPD matrix contains non-finite entries")
        if not is_symmetric(data):
            raise ValidationError("matrix is not symmetric")
        try:
            la.cholesky(data, lower=True)
        except la.LinAlgError as exc:
            raise ValidationError("matrix is not positive definite") from exc
        object.__setattr__(self, "data", data)

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    @cached_property
    def cholesky(self) -> np.ndarray:
        factor = la.cholesky(self.data, lower=True)
        factor.setflags(write=False)
        return factor

    @cached_property
    def inverse(self) -> np.ndarray:
        inv = la.cho_solve((self.cholesky, True), np.eye(self.dim))
        inv = symmetrize(inv)
        inv.setflags(write=False)
        return inv

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)

    def __repr__(self):
        return f"SpdMatrix({self.data.tolist()!r})"


def _spd(value, name):
    if isinstance(value, SpdMatrix):
        return value
    try:
        return SpdMatrix(value)
    except ValidationError as exc:
        raise ValidationError(f"{name}: {exc}") from exc


@dataclass(frozen=True, eq=False)
class SystemTuple:
    """One parameter realization ``(A, Gamma, R, Q)`` of the uncertain system."""

    a: np.ndarray
    gamma: SpdMatrix
    r: SpdMatrix
    q: SpdMatrix

    def __post_init__(self):
        a = as_matrix(self.a, "A")
        if a.shape[0] != a.shape[1]:
            raise ConfigurationError(f"A must be square, got shape {a.shape}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "gamma", _spd(self.gamma, "Gamma"))
        object.__setattr__(self, "r", _spd(self.r, "R"))
        object.__setattr__(self, "q", _spd(self.q, "Q"))
        if self.gamma.dim != a.shape[0]:
            raise ConfigurationError("Gamma and A have different state dimensions")

    @property
    def n(self) -> int:
        return self.a.shape[0]

    def check_against(self, shared: "SharedModel") -> None:
        n, m, r = self.n, self.r.dim, self.q.dim
        if shared.b.shape != (n, m):
            raise ConfigurationError(f"B has shape {shared.b.shape}, expected {(n, m)}")
        if shared.c.shape != (r, n):
            raise ConfigurationError(f"C has shape {shared.c.shape}, expected {(r, n)}")
        if shared.x0.shape != (n,):
            raise ConfigurationError(f"x0 has shape {shared.x0.shape}, expected {(n,)}")

    def same_as(self, other: "SystemTuple") -> bool:
        return all(
            np.array_equal(np.asarray(x), np.asarray(y))
            for x, y in zip(
                (self.a, self.gamma.data, self.r.data, self.q.data),
                (other.a, other.gamma.data, other.r.data, other.q.data),
            )
        )


@dataclass(frozen=True, eq=False)
class SharedModel:
    """Quantities common to all parameter realizations.

    ``forcing`` is an optional callable ``t -> R^n`` added to the drift of the
    truth and of every filter; it never enters the Riccati equations.
    """

    b: np.ndarray
    c: np.ndarray
    x0: np.ndarray
    horizon: float
    forcing: Optional[Callable[[float], np.ndarray]] = None

    def __post_init__(self):
        object.__setattr__(self, "b", as_matrix(self.b, "B"))
        object.__setattr__(self, "c", as_matrix(self.c, "C"))
        object.__setattr__(self, "x0", _frozen(np.atleast_1d(self.x0), 1, "x0"))
        if not self.horizon > 0:
            raise ConfigurationError("horizon must be positive")
        object.__setattr__(self, "horizon", float(self.horizon))

    @property
    def n(self) -> int:
        return self.x0.shape[0]

    def forcing_on(self, grid: "TimeGrid") -> Optional[np.ndarray]:
        """Forcing sampled at the grid nodes, shape ``(M + 1, n)``."""
        if self.forcing is None:
            return None
        samples = np.array([np.atleast_1d(self.forcing(t)) for t in grid.nodes], dtype=float)
        if samples.shape != (grid.size, self.n):
            raise ConfigurationError(
                f"forcing must return {self.n}-vectors, got shape {samples.shape[1:]}"
            )
        if not np.all(np.isfinite(samples)):
            raise ConfigurationError("forcing is not finite on the whole horizon")
        return samples


@dataclass(frozen=True)
class TimeGrid:
    """Equidistant nodes ``t_j = t_start + j (t_end - t_start) / M``."""

    t_end: float
    num_intervals: int = 1000
    t_start: float = 0.0

    def __post_init__(self):
        if int(self.num_intervals) != self.num_intervals or self.num_intervals < 1:
            raise ConfigurationError("num_intervals must be a positive integer")
        if not self.t_end > self.t_start:
            raise ConfigurationError("t_end must exceed t_start")
        object.__setattr__(self, "num_intervals", int(self.num_intervals))

    @cached_property
    def nodes(self) -> np.ndarray:
        j = np.arange(self.num_intervals + 1, dtype=float)
        nodes = self.t_start + j * (self.t_end - self.t_start) / self.num_intervals
        nodes[-1] = self.t_end
        nodes.setflags(write=False)
        return nodes

    @property
    def size(self) -> int:
        return self.num_intervals + 1

    @property
    def step(self) -> float:
        return (self.t_end - self.t_start) / self.num_intervals

    def index_of(self, t: float, atol: float = 1e-12) -> int:
        """Index of the node equal to ``t`` (within ``atol``)."""
        j = int(round((t - self.t_start) / self.step))
        if 0 <= j < self.size and abs(self.nodes[j] - t) <= atol * max(1.0, abs(t)):
            return j
        raise DomainError(f"t = {t} is not a grid node")


def _interpolate(grid: TimeGrid, values: np.ndarray, t: float) -> np.ndarray:
    nodes = grid.nodes
    if not (nodes[0] <= t <= nodes[-1]):
        raise DomainError(f"t = {t} outside [{nodes[0]}, {nodes[-1]}]")
    i = int(np.searchsorted(nodes, t, side="right")) - 1
    if nodes[i] == t:
        return values[i].copy()
    w = (t - nodes[i]) / (nodes[i + 1] - nodes[i])
    return (1.0 - w) * values[i] + w * values[i + 1]


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Vector-valued function sampled on a :class:`TimeGrid`."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2 or values.shape[0] != self.grid.size:
            raise ConfigurationError(
                f"trajectory needs {self.grid.size} rows, got shape {values.shape}"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def __call__(self, t: float) -> np.ndarray:
        return evaluate(self, t)


@dataclass(frozen=True, eq=False)
class MatrixTrajectory:
    """Square-matrix-valued function sampled on a :class:`TimeGrid`."""

    grid: TimeGrid
    values: np.ndarray
    spd: bool = field(default=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 3 or values.shape[0] != self.grid.size or values.shape[1] != values.shape[2]:
            raise ConfigurationError(
                f"matrix trajectory needs shape ({self.grid.size}, n, n), got {values.shape}"
            )
        if self.spd:
            scale = np.maximum(1.0, np.max(np.abs(values), axis=(1, 2)))
            asym = np.max(np.abs(values - np.swapaxes(values, 1, 2)), axis=(1, 2))
            bad = np.nonzero(asym > COMPUTED_SYMMETRY_RTOL * scale)[0]
            if bad.size:
                raise ValidationError(f"matrix trajectory not symmetric at node {int(bad[0])}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def __call__(self, t: float) -> np.ndarray:
        return _interpolate(self.grid, self.values, t)


def evaluate(traj: Trajectory, t: float) -> np.ndarray:
    """Linear interpolant of ``traj`` at time ``t``; exact at grid nodes."""
    return _interpolate(traj.grid, traj.values, t)
