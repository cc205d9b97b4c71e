"""Seeded disturbance realizations and the resulting truth and measurement.

Random numbers come from NumPy's PCG64 bit generator. Each disturbance kind
draws from its own child stream ``SeedSequence(seed, spawn_key=(k,))`` with
``k = 0`` for the initial error, ``1`` for the process disturbance and ``2``
for the measurement error; new kinds get new keys, so existing streams never
shift. Standard normals use ``Generator.standard_normal`` (ziggurat) and are
coloured by the lower Cholesky factor: ``sample = L z``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _backend
from .model import SharedModel, SpdMatrix, SystemTuple, TimeGrid, Trajectory
from .odeint import IntegratorConfig

STREAM_ETA, STREAM_V, STREAM_MU = 0, 1, 2


def stream(seed: int, key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(key,))))


class Disturbances(NamedTuple):
    eta: np.ndarray
    v: Trajectory
    mu: Trajectory
    seed: int


@dataclass(frozen=True, eq=False)
class DisturbanceRealization:
    seed: int
    eta: np.ndarray
    v: Trajectory
    mu: Trajectory
    truth: Trajectory
    measurement: Trajectory


def _gaussian(gen, cov: SpdMatrix, count=None):
    if count is None:
        return cov.cholesky @ gen.standard_normal(cov.dim)
    return gen.standard_normal((count, cov.dim)) @ cov.cholesky.T


def sample_disturbances(
    shared: SharedModel,
    gamma,
    r_cov,
    q_cov,
    grid: TimeGrid,
    seed: int,
) -> Disturbances:
    """Draw ``eta ~ N(0, Gamma)`` and node-i.i.d. ``v ~ N(0, R)``, ``mu ~ N(0, Q)``."""
    gamma, r_cov, q_cov = (c if isinstance(c, SpdMatrix) else SpdMatrix(c) for c in (gamma, r_cov, q_cov))
    eta = _gaussian(stream(seed, STREAM_ETA), gamma)
    v = _gaussian(stream(seed, STREAM_V), r_cov, grid.size)
    mu = _gaussian(stream(seed, STREAM_MU), q_cov, grid.size)
    eta.setflags(write=False)
    return Disturbances(eta, Trajectory(grid, v), Trajectory(grid, mu), int(seed))


def generate_measurement(
    sys_true: SystemTuple,
    shared: SharedModel,
    disturbances: Disturbances,
    grid: TimeGrid,
    config: IntegratorConfig = IntegratorConfig(),
    *,
    backend=None,
) -> DisturbanceRealization:
    """Integrate ``x' = A x + f + B v`` from ``x0 + eta`` and form ``y = C x + mu``."""
    sys_true.check_against(shared)
    eta, v, mu, seed = disturbances
    drive = v.values @ shared.b.T
    forcing = shared.forcing_on(grid)
    if forcing is not None:
        drive = drive + forcing
    start = shared.x0 + eta
    kernels = _backend.get_kernels(backend)
    x = kernels.affine(
        sys_true.a, shared.c, None, None, drive, start, grid.nodes,
        config.rel_tol, config.abs_tol, config.max_steps, config.first_step(grid),
    )
    x[0] = start
    y = x @ shared.c.T + mu.values
    return DisturbanceRealization(seed, eta, v, mu, Trajectory(grid, x), Trajectory(grid, y))


def realization_columns(real: DisturbanceRealization) -> list:
    n, m, r = real.truth.dim, real.v.dim, real.mu.dim
    return (
        ["t"]
        + [f"eta_{i + 1}" for i in range(n)]
        + [f"v_{i + 1}" for i in range(m)]
        + [f"mu_{i + 1}" for i in range(r)]
        + [f"x_{i + 1}" for i in range(n)]
        + [f"y_{i + 1}" for i in range(r)]
    )


def write_realization_csv(real: DisturbanceRealization, path) -> None:
    """Write one row per node; ``eta`` appears on the first row only."""
    grid = real.truth.grid
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(realization_columns(real))
        for j, t in enumerate(grid.nodes):
            eta = [format(e, ".17g") for e in real.eta] if j == 0 else [""] * len(real.eta)
            row = np.concatenate([real.v.values[j], real.mu.values[j], real.truth.values[j], real.measurement.values[j]])
            writer.writerow([format(t, ".17g")] + eta + [format(x, ".17g") for x in row])


def read_realization_csv(path, grid: TimeGrid) -> DisturbanceRealization:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]

    def cols(prefix):
        idx = [i for i, h in enumerate(header) if h.startswith(prefix + "_")]
        return np.array([[float(r[i]) for i in idx] for r in body])

    eta = np.array([float(body[0][i]) for i, h in enumerate(header) if h.startswith("eta_")])
    return DisturbanceRealization(
        -1, eta,
        Trajectory(grid, cols("v")), Trajectory(grid, cols("mu")),
        Trajectory(grid, cols("x")), Trajectory(grid, cols("y")),
    )
