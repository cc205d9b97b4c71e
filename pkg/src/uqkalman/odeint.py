"""Adaptive Dormand-Prince 5(4) integration sampled on a :class:`TimeGrid`.

Steps are clipped so that every grid node is hit exactly; node values are
therefore produced by the stepper itself and never by dense-output
interpolation. The compiled kernels in :mod:`uqkalman._kernels` implement
the identical step-size controller.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ConfigurationError, NonConvergenceError, NumericalError
from .model import TimeGrid, Trajectory

# Dormand & Prince (1980), FSAL: the last stage equals f(t + h, y_new).
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
A71, A73, A74, A75, A76 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = (
    71 / 57600,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)

SAFETY = 0.9
FAC_MIN = 0.2
FAC_MAX = 5.0


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_steps: int = 10_000_000
    initial_step: Optional[float] = None

    def __post_init__(self):
        if not self.rel_tol >= 1e-14:
            raise ConfigurationError("rel_tol must be >= 1e-14")
        if not self.abs_tol >= 1e-16:
            raise ConfigurationError("abs_tol must be >= 1e-16")
        if int(self.max_steps) != self.max_steps or self.max_steps < 1:
            raise ConfigurationError("max_steps must be a positive integer")
        object.__setattr__(self, "max_steps", int(self.max_steps))
        if self.initial_step is not None and not self.initial_step > 0:
            raise ConfigurationError("initial_step must be positive")

    def first_step(self, grid: TimeGrid) -> float:
        return grid.step if self.initial_step is None else min(self.initial_step, grid.step)

    def as_dict(self) -> dict:
        return asdict(self)


def drive(rhs, y0, nodes, rel_tol, abs_tol, max_steps, h0):
    """Run the clipped DP5(4) stepper through ``nodes``.

    ``rhs(j, t, y)`` receives the index ``j`` of the grid interval containing
    the current step so piecewise-linear inputs can be evaluated without a
    search. Returns an array of shape ``(len(nodes), len(y0))``.
    """
    # blow-ups are detected through the error norm below
    with np.errstate(over="ignore", invalid="ignore"):
        return _drive(rhs, y0, nodes, rel_tol, abs_tol, max_steps, h0)


def _drive(rhs, y0, nodes, rel_tol, abs_tol, max_steps, h0):
    y = np.array(y0, dtype=float)
    out = np.empty((len(nodes), y.size))
    out[0] = y
    h = h0
    steps = 0
    t = nodes[0]
    k1 = rhs(0, t, y)
    if not np.all(np.isfinite(k1)):
        raise NumericalError(f"non-finite derivative at t = {t}", time=t)
    for j in range(len(nodes) - 1):
        t_next = nodes[j + 1]
        while t < t_next:
            remaining = t_next - t
            last = h >= remaining
            hs = remaining if last else h
            steps += 1
            if steps > max_steps:
                raise NonConvergenceError(
                    f"exceeded max_steps = {max_steps} at t = {t}", time=t
                )
            k2 = rhs(j, t + C2 * hs, y + hs * (A21 * k1))
            k3 = rhs(j, t + C3 * hs, y + hs * (A31 * k1 + A32 * k2))
            k4 = rhs(j, t + C4 * hs, y + hs * (A41 * k1 + A42 * k2 + A43 * k3))
            k5 = rhs(j, t + C5 * hs, y + hs * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4))
            k6 = rhs(
                j, t + hs, y + hs * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5)
            )
            y_new = y + hs * (A71 * k1 + A73 * k3 + A74 * k4 + A75 * k5 + A76 * k6)
            t_new = t_next if last else t + hs
            k7 = rhs(j, t_new, y_new)
            err_vec = hs * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)
            scale = abs_tol + rel_tol * np.maximum(np.abs(y), np.abs(y_new))
            err = float(np.sqrt(np.mean((err_vec / scale) ** 2)))
            if not np.isfinite(err):
                raise NumericalError(f"non-finite derivative near t = {t}", time=t)
            if err <= 1.0:
                fac = FAC_MAX if err == 0.0 else min(FAC_MAX, max(FAC_MIN, SAFETY * err ** -0.2))
                h_new = hs * fac
                h = max(h, h_new) if last else h_new
                t, y, k1 = t_new, y_new, k7
            else:
                h = hs * max(FAC_MIN, SAFETY * err ** -0.2)
                if h <= 1e-14 * max(1.0, abs(t)):
                    raise NonConvergenceError(f"step size underflow at t = {t}", time=t)
        out[j + 1] = y
    return out


def integrate(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    y0,
    grid: TimeGrid,
    config: IntegratorConfig = IntegratorConfig(),
) -> Trajectory:
    """Integrate ``y' = rhs(t, y)`` from ``y0`` and sample at every grid node.

    Raises
    ------
    NonConvergenceError
        If more than ``config.max_steps`` steps are attempted.
    NumericalError
        If ``rhs`` returns non-finite values; ``exc.time`` holds the time.
    """
    y0 = np.atleast_1d(np.asarray(y0, dtype=float))

    def wrapped(_j, t, y):
        return np.asarray(rhs(t, y), dtype=float).reshape(y0.shape)

    values = drive(
        wrapped,
        y0,
        grid.nodes,
        config.rel_tol,
        config.abs_tol,
        config.max_steps,
        config.first_step(grid),
    )
    return Trajectory(grid, values)
