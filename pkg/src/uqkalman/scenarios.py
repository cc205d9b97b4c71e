"""Benchmark systems: damped harmonic oscillator and two connected amplidynes."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ensemble import ParameterSpace, build_parameter_space
from .errors import ConfigurationError
from .model import SharedModel, SpdMatrix, TimeGrid
from .odeint import IntegratorConfig

LOOKUP_ATOL = 1e-12

# oscillator
OSC_MASS = 1.0
OSC_SPRING = 1.0
OSC_HORIZON = 10.0
OSC_X0 = (1.0, 0.0)
OSC_GAMMA = 0.1
OSC_R = 0.05
OSC_Q = 0.05
OSC_N_A = 101
OSC_DAMPING_MIN = 0.1
OSC_DAMPING_SPAN = 2.9
OSC_PROBES = (0.1, 1.55, 3.0)

# amplidynes
AMP_RHO = (5.0, 10.0, 5.0, 10.0)
AMP_K = (20.0, 50.0, 20.0, 50.0)
AMP_L1 = 0.5
AMP_HORIZON = 10.0
AMP_X0 = (0.5, 1.0, 10.0, 20.0)
AMP_GAMMA = (0.125, 0.25, 2.5, 5.0)
AMP_R = 0.01
AMP_Q = 1600.0
AMP_L2 = (10.0, 12.5, 15.0, 17.5, 20.0)
AMP_L3 = (0.5, 0.75, 1.0, 1.25, 1.5)
AMP_L4 = (10.0, 17.5, 25.0, 32.5, 40.0)
AMP_PROBES = tuple(
    (10.0 + k * 2.5, 0.5 + k * 0.25, 10.0 + k * 7.5) for k in range(5)
)

DEFAULT_INTERVALS = 1000

# Pi_k is badly conditioned on the amplidyne (cond ~ 1e5); at the default
# tolerance |Pi P - I| reaches 1e-5, at this one it stays near 3e-8
AMP_INTEGRATOR = IntegratorConfig(rel_tol=1e-12, abs_tol=1e-14)


@dataclass(frozen=True, eq=False)
class ScenarioBundle:
    name: str
    space: ParameterSpace
    shared: SharedModel
    grid: TimeGrid
    true_index: int
    covariances: tuple
    probes: tuple = ()
    integrator: IntegratorConfig = IntegratorConfig()

    @property
    def true_system(self):
        return self.space.members[self.true_index]

    @property
    def sigma_bar(self):
        return self.space.labels[self.true_index]

    def label_of(self, index: int) -> str:
        """Compact column-safe label of member ``index``, e.g. ``1.55`` or ``10_0.5_10``."""
        return format_label(self.space.labels[index])


def format_label(label) -> str:
    values = np.atleast_1d(np.asarray(label, dtype=float))
    return "_".join(format(float(v), ".12g") for v in values)


def oscillator_dampings(n_a: int = OSC_N_A) -> np.ndarray:
    k = np.arange(n_a)
    return OSC_DAMPING_MIN + k / (n_a - 1) * OSC_DAMPING_SPAN


def oscillator_matrix(damping: float, mass: float = OSC_MASS, spring: float = OSC_SPRING) -> np.ndarray:
    return np.array([[0.0, 1.0], [-spring / mass, -damping / mass]])


def _lookup(values, target, what):
    values = np.asarray(values, dtype=float)
    target = np.asarray(target, dtype=float)
    diff = np.abs(values - target).reshape(len(values), -1).max(axis=1)
    hits = np.nonzero(diff <= LOOKUP_ATOL)[0]
    if hits.size == 0:
        raise ConfigurationError(f"{what} {target.tolist()} is not in the parameter set")
    return int(hits[0])


def oscillator_scenario(
    sigma_bar: float = 3.0,
    *,
    shrink: float = 1.0,
    num_intervals: int = DEFAULT_INTERVALS,
) -> ScenarioBundle:
    """Harmonic oscillator with uncertain damping.

    ``shrink`` contracts the damping set about ``sigma_bar``:
    ``sigma_bar + shrink * (sigma_k - sigma_bar)``. The default reproduces the
    published 101-point grid on ``[0.1, 3.0]``.
    """
    dampings = oscillator_dampings()
    true_index = _lookup(dampings, sigma_bar, "damping")
    if shrink != 1.0:
        if not 0 < shrink <= 1:
            raise ConfigurationError("shrink must lie in (0, 1]")
        centre = dampings[true_index]
        dampings = centre + shrink * (dampings - centre)
        dampings[true_index] = centre
    a_list = [oscillator_matrix(s) for s in dampings]
    gamma = SpdMatrix(OSC_GAMMA * np.eye(2))
    r_cov, q_cov = SpdMatrix(OSC_R), SpdMatrix(OSC_Q)
    space = build_parameter_space(
        a_list, [gamma], [r_cov], [q_cov], labels=[list(dampings), None, None, None]
    )
    shared = SharedModel(
        b=[[0.0], [1.0]], c=[[1.0, 0.0]], x0=OSC_X0, horizon=OSC_HORIZON
    )
    probes = tuple(space.find(p) for p in OSC_PROBES if shrink == 1.0)
    return ScenarioBundle(
        "oscillator", space, shared, TimeGrid(OSC_HORIZON, num_intervals), true_index,
        (gamma, r_cov, q_cov), probes,
    )


def amplidyne_matrix(l2: float, l3: float, l4: float) -> np.ndarray:
    rho1, rho2, rho3, rho4 = AMP_RHO
    k1, k2, k3, _ = AMP_K
    return np.array([
        [-rho1 / AMP_L1, 0.0, 0.0, 0.0],
        [k1 / l2, -rho2 / l2, 0.0, 0.0],
        [0.0, k2 / l3, -rho3 / l3, 0.0],
        [0.0, 0.0, k3 / l4, -rho4 / l4],
    ])


def amplidyne_input(t: float) -> float:
    """Known input voltage ``e0(t)``."""
    return 1.0


def _amplidyne_forcing(t):
    return np.array([amplidyne_input(t) / AMP_L1, 0.0, 0.0, 0.0])


def amplidyne_parameters() -> list:
    return [(l2, l3, l4) for l2 in AMP_L2 for l3 in AMP_L3 for l4 in AMP_L4]


def amplidyne_scenario(
    sigma_bar=(10.0, 0.5, 10.0),
    *,
    num_intervals: int = DEFAULT_INTERVALS,
) -> ScenarioBundle:
    """Two connected amplidynes with uncertain inductances ``(L2, L3, L4)``."""
    params = amplidyne_parameters()
    true_index = _lookup(params, sigma_bar, "inductances")
    gamma = SpdMatrix(np.diag(AMP_GAMMA))
    r_cov, q_cov = SpdMatrix(AMP_R), SpdMatrix(AMP_Q)
    space = build_parameter_space(
        [amplidyne_matrix(*p) for p in params], [gamma], [r_cov], [q_cov],
        labels=[params, None, None, None],
    )
    shared = SharedModel(
        b=[[1.0 / AMP_L1], [0.0], [0.0], [0.0]],
        c=[[0.0, 0.0, 0.0, AMP_K[3]]],
        x0=AMP_X0,
        horizon=AMP_HORIZON,
        forcing=_amplidyne_forcing,
    )
    probes = tuple(space.find(p) for p in AMP_PROBES)
    return ScenarioBundle(
        "amplidyne", space, shared, TimeGrid(AMP_HORIZON, num_intervals), true_index,
        (gamma, r_cov, q_cov), probes, AMP_INTEGRATOR,
    )


INLINE_KEYS = frozenset(
    {"a", "gamma", "r", "q", "b", "c", "x0", "horizon", "forcing", "labels", "probes", "weights"}
)


def _constant(vector):
    def forcing(t):
        return vector
    return forcing


def check_uniform_weights(weights) -> None:
    """Accept only the uniform distribution over the parameter set."""
    if weights is None:
        return
    w = np.asarray(weights, dtype=float).reshape(-1)
    if w.size == 0 or not np.all(np.isfinite(w)) or np.any(w <= 0) or np.ptp(w) > 1e-12 * np.max(w):
        raise ConfigurationError("only uniform weights over the parameter set are supported")


def inline_scenario(
    definition: dict,
    sigma_bar=0,
    *,
    num_intervals: int = DEFAULT_INTERVALS,
) -> ScenarioBundle:
    """Scenario from a plain mapping, as read from a configuration file.

    ``a``, ``gamma``, ``r`` and ``q`` are lists of candidate matrices whose
    product forms the parameter set. ``b``, ``c``, ``x0`` and ``horizon`` are
    shared; ``forcing`` is an optional constant vector. ``sigma_bar`` and
    the optional ``probes`` are 0-based member indices. Without ``labels``
    (one entry per ``A`` candidate) members are labelled by their index. Data are generated
    with the covariances of the ``sigma_bar`` member.
    """
    if not isinstance(definition, dict):
        raise ConfigurationError("inline scenario must be a mapping")
    unknown = set(definition) - INLINE_KEYS
    if unknown:
        raise ConfigurationError(f"unknown inline scenario keys: {sorted(unknown)}")
    missing = [k for k in ("a", "gamma", "r", "q", "b", "c", "x0", "horizon") if k not in definition]
    if missing:
        raise ConfigurationError(f"inline scenario is missing {missing}")
    for key in ("a", "gamma", "r", "q"):
        if not isinstance(definition[key], (list, tuple)):
            raise ConfigurationError(f"inline scenario field {key!r} must be a list of candidates")
    check_uniform_weights(definition.get("weights"))
    labels = definition.get("labels")
    space = build_parameter_space(
        definition["a"], definition["gamma"], definition["r"], definition["q"],
        labels=None if labels is None else [labels, None, None, None],
    )
    if labels is None:
        # unlabelled members are named by their 0-based index
        space = ParameterSpace(
            space.members, tuple(np.array([float(k)]) for k in range(len(space))), space.factor_sizes
        )
    forcing = definition.get("forcing")
    shared = SharedModel(
        b=definition["b"], c=definition["c"], x0=definition["x0"],
        horizon=definition["horizon"],
        forcing=None if forcing is None else _constant(np.array(forcing, dtype=float).reshape(-1)),
    )
    indices = [sigma_bar] + list(definition.get("probes") or [])
    for k in indices:
        if isinstance(k, bool) or not isinstance(k, (int, np.integer)) or not 0 <= k < len(space):
            raise ConfigurationError(f"member index {k!r} outside 0..{len(space) - 1}")
    for member in space.members:
        member.check_against(shared)
    true_system = space.members[sigma_bar]
    return ScenarioBundle(
        "inline", space, shared, TimeGrid(shared.horizon, num_intervals), int(sigma_bar),
        (true_system.gamma, true_system.r, true_system.q),
        tuple(int(k) for k in definition.get("probes") or ()),
    )


SCENARIOS = {
    "oscillator": (oscillator_scenario, "harmonic oscillator, 101 damping values in [0.1, 3]"),
    "amplidyne": (amplidyne_scenario, "two connected amplidynes, 125 inductance triples"),
}


def build_scenario(name: str, sigma_bar=None, **kwargs) -> ScenarioBundle:
    try:
        builder = SCENARIOS[name][0]
    except KeyError:
        raise ConfigurationError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}") from None
    return builder(**kwargs) if sigma_bar is None else builder(sigma_bar, **kwargs)
