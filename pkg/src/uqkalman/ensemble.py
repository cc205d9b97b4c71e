"""Finite product parameter space and the family of member Kalman filters."""
from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigurationError, KalmanError, ValidationError
from .filter import run_filter
from .model import SharedModel, SpdMatrix, SystemTuple, TimeGrid, Trajectory, as_matrix
from .odeint import IntegratorConfig
from .riccati import RiccatiSolution, make_solution

FACTOR_NAMES = ("A", "Gamma", "R", "Q")


@dataclass(frozen=True, eq=False)
class ParameterSpace:
    """Cartesian product ``Sigma_A x Sigma_Gamma x Sigma_R x Sigma_Q``.

    Members are enumerated lexicographically with the ``A`` index varying
    slowest and the ``Q`` index fastest. Every member has weight ``1/N``.
    """

    members: tuple
    labels: tuple
    factor_sizes: tuple

    @property
    def size(self) -> int:
        return len(self.members)

    def __len__(self):
        return len(self.members)

    @property
    def weight(self) -> float:
        return 1.0 / len(self.members)

    def factor_indices(self, k: int) -> tuple:
        return tuple(int(i) for i in np.unravel_index(k, self.factor_sizes))

    def member_index(self, i_a: int, i_gamma: int, i_r: int, i_q: int) -> int:
        return int(np.ravel_multi_index((i_a, i_gamma, i_r, i_q), self.factor_sizes))

    def find(self, label, atol: float = 1e-12) -> int:
        """Index of the member whose label equals ``label`` within ``atol``."""
        target = np.atleast_1d(np.asarray(label, dtype=float))
        for k, lab in enumerate(self.labels):
            lab = np.asarray(lab, dtype=float)
            if lab.shape == target.shape and np.all(np.abs(lab - target) <= atol):
                return k
        raise ConfigurationError(f"parameter {label!r} is not a member of the parameter space")


def _factor_labels(labels, size, name):
    if labels is None:
        return [np.array([float(i)]) for i in range(size)]
    if len(labels) != size:
        raise ConfigurationError(f"{name} labels have length {len(labels)}, expected {size}")
    return [np.atleast_1d(np.asarray(lab, dtype=float)) for lab in labels]


def build_parameter_space(
    a_factors: Sequence,
    gamma_factors: Sequence,
    r_factors: Sequence,
    q_factors: Sequence,
    labels: Optional[Sequence] = None,
) -> ParameterSpace:
    """Enumerate the product of four lists of matrix realizations.

    ``labels`` optionally gives, per factor, one parameter vector per entry;
    a member's label is the concatenation of its factor labels. Factors
    without labels contribute nothing when at least one factor is labelled.
    """
    factors = (a_factors, gamma_factors, r_factors, q_factors)
    for name, factor in zip(FACTOR_NAMES, factors):
        if len(factor) == 0:
            raise ConfigurationError(f"factor {name} is empty")
    a_list = [as_matrix(a, "A") for a in a_factors]
    spd_lists = []
    for name, factor in zip(FACTOR_NAMES[1:], factors[1:]):
        converted = []
        for i, value in enumerate(factor):
            try:
                converted.append(value if isinstance(value, SpdMatrix) else SpdMatrix(value))
            except ValidationError as exc:
                raise ValidationError(f"{name} candidate {i}: {exc}") from exc
        spd_lists.append(converted)
    sizes = tuple(len(f) for f in factors)

    if labels is None:
        label_lists = [[np.array([float(i)]) for i in range(s)] for s in sizes]
    else:
        if len(labels) != 4:
            raise ConfigurationError("labels must give one entry (or None) per factor")
        label_lists = [
            _factor_labels(lab, s, name) if lab is not None else [np.empty(0)] * s
            for lab, s, name in zip(labels, sizes, FACTOR_NAMES)
        ]

    members, member_labels = [], []
    for ia, ig, ir, iq in itertools.product(*(range(s) for s in sizes)):
        members.append(SystemTuple(a_list[ia], spd_lists[0][ig], spd_lists[1][ir], spd_lists[2][iq]))
        lab = np.concatenate(
            [label_lists[0][ia], label_lists[1][ig], label_lists[2][ir], label_lists[3][iq]]
        )
        lab.setflags(write=False)
        member_labels.append(lab)
    return ParameterSpace(tuple(members), tuple(member_labels), sizes)


@dataclass(frozen=True, eq=False)
class EnsembleResult:
    runs: tuple
    grid: TimeGrid

    def __len__(self):
        return len(self.runs)

    @property
    def estimates(self) -> np.ndarray:
        """Member estimates, shape ``(N, M + 1, n)``."""
        return np.stack([run.estimate.values for run in self.runs])

    @property
    def precisions(self) -> np.ndarray:
        """Member precisions, shape ``(N, M + 1, n, n)``."""
        return np.stack([run.riccati.precision.values for run in self.runs])

    @property
    def covariances(self) -> np.ndarray:
        return np.stack([run.riccati.covariance.values for run in self.runs])


def _map(fn, items, jobs):
    def guarded(pair):
        k, item = pair
        try:
            return fn(item)
        except KalmanError as exc:
            exc.member = k
            exc.args = (f"member {k}: {exc}",) + exc.args[1:]
            raise

    pairs = list(enumerate(items))
    if jobs is None or jobs <= 1:
        return [guarded(p) for p in pairs]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(guarded, pairs))


def solve_riccati_family(
    space: ParameterSpace,
    shared: SharedModel,
    grid: TimeGrid,
    config: IntegratorConfig = IntegratorConfig(),
    *,
    jobs: int = 1,
    backend=None,
) -> list:
    """Riccati solutions for every member (measurement independent)."""
    return _map(lambda s: make_solution(s, shared, grid, config, backend=backend), space.members, jobs)


def run_ensemble(
    space: ParameterSpace,
    shared: SharedModel,
    measurement: Trajectory,
    grid: TimeGrid,
    config: IntegratorConfig = IntegratorConfig(),
    *,
    riccati: Optional[Sequence[RiccatiSolution]] = None,
    jobs: int = 1,
    backend=None,
) -> EnsembleResult:
    """Run one Kalman filter per member; results are ordered by member index.

    Precomputed ``riccati`` solutions may be passed to reuse them across
    several measurements.
    """
    if riccati is None:
        riccati = solve_riccati_family(space, shared, grid, config, jobs=jobs, backend=backend)
    elif len(riccati) != len(space):
        raise ConfigurationError("one Riccati solution per member is required")

    def one(pair):
        sys, sol = pair
        return run_filter(sys, shared, measurement, sol, grid, config, backend=backend)

    runs = _map(one, list(zip(space.members, riccati)), jobs)
    return EnsembleResult(tuple(runs), grid)
