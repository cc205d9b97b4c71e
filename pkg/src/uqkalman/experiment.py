"""Experiment configuration, orchestration and CSV/JSON emission.

A configuration is a YAML mapping::

    scenario: oscillator          # or amplidyne, or an inline mapping
    sigma_bar: 3.0
    seed: 42
    grid_intervals: 1000
    integrator: {rel_tol: 1.0e-8, abs_tol: 1.0e-10}
    estimators: [expected_matrices, expected_filter, energy_min, expected_gain]
    outputs: out
    emit: [trajectories, diagnostics, precisions, config_echo]

Omitted keys take their defaults; an omitted integrator section uses the
scenario's recommended tolerances. ``config_echo.json`` holds the fully
resolved mapping and can be fed back as a configuration.
"""
from __future__ import annotations

import copy
import json
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import yaml

from .diagnostics import (
    diag_dominance_series,
    expected_energy_series,
    generalized_precision_series,
    weighted_error_series,
)
from .ensemble import EnsembleResult, run_ensemble
from .errors import ConfigurationError
from .estimators import KINDS, compute_estimators, energy_min_estimator
from .model import Trajectory
from .odeint import IntegratorConfig
from .scenarios import (
    SCENARIOS,
    ScenarioBundle,
    build_scenario,
    check_uniform_weights,
    format_label,
    inline_scenario,
)
from .synth import (
    DisturbanceRealization,
    generate_measurement,
    sample_disturbances,
    write_realization_csv,
)

EMIT_KINDS = ("trajectories", "diagnostics", "precisions", "config_echo")
MAX_SEED = 2 ** 64 - 1
FLOAT_FORMAT = "%.17g"

TRAJECTORIES_CSV = "trajectories.csv"
DIAGNOSTICS_CSV = "diagnostics.csv"
PRECISIONS_CSV = "precisions.csv"
REALIZATION_CSV = "realization.csv"
CONFIG_ECHO = "config_echo.json"

DEFAULTS = {
    "scenario": "oscillator",
    "sigma_bar": None,
    "seed": 0,
    "grid_intervals": 1000,
    "integrator": None,
    "estimators": list(KINDS),
    "outputs": "out",
    "emit": list(EMIT_KINDS),
    "jobs": 1,
    "scenario_options": {},
    "probes": None,
    "precisions_all": False,
    "weights": None,
}


def _integer(value, name, low, high=None):
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        if isinstance(value, str):
            try:
                value = int(value)
            except ValueError:
                raise ConfigurationError(f"{name} must be an integer, got {value!r}") from None
        else:
            raise ConfigurationError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if value < low or (high is not None and value > high):
        raise ConfigurationError(f"{name} must lie in [{low}, {high if high is not None else 'inf'}]")
    return value


def _number(value, name):
    # YAML 1.1 reads "1e-9" as a string
    if isinstance(value, bool):
        raise ConfigurationError(f"{name} must be a number, got {value!r}")
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigurationError(f"{name} must be a number, got {value!r}") from None


def _subset(value, allowed, name):
    if isinstance(value, str):
        value = [value]
    if not isinstance(value, (list, tuple)):
        raise ConfigurationError(f"{name} must be a list")
    unknown = [v for v in value if v not in allowed]
    if unknown:
        raise ConfigurationError(f"{name} has unknown entries {unknown}; choose from {list(allowed)}")
    return tuple(v for v in allowed if v in value)


def _integrator(section) -> Optional[IntegratorConfig]:
    if section is None:
        return None
    if not isinstance(section, dict):
        raise ConfigurationError("integrator must be a mapping")
    unknown = set(section) - {"rel_tol", "abs_tol", "max_steps", "initial_step"}
    if unknown:
        raise ConfigurationError(f"unknown integrator keys: {sorted(unknown)}")
    kwargs = {}
    for key in ("rel_tol", "abs_tol", "initial_step"):
        if section.get(key) is not None:
            kwargs[key] = _number(section[key], f"integrator.{key}")
    if section.get("max_steps") is not None:
        kwargs["max_steps"] = _integer(section["max_steps"], "integrator.max_steps", 1)
    return IntegratorConfig(**kwargs)


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """Validated experiment configuration; build with :meth:`from_mapping`."""

    scenario: object = "oscillator"
    sigma_bar: object = None
    seed: int = 0
    grid_intervals: int = 1000
    integrator: Optional[IntegratorConfig] = None
    estimators: tuple = KINDS
    outputs: str = "out"
    emit: tuple = EMIT_KINDS
    jobs: int = 1
    scenario_options: dict = field(default_factory=dict)
    probes: Optional[list] = None
    precisions_all: bool = False

    @classmethod
    def from_mapping(cls, mapping: dict) -> "ExperimentConfig":
        if mapping is None:
            mapping = {}
        if not isinstance(mapping, dict):
            raise ConfigurationError("configuration must be a mapping")
        unknown = set(mapping) - set(DEFAULTS)
        if unknown:
            raise ConfigurationError(f"unknown configuration keys: {sorted(unknown)}")
        merged = {**copy.deepcopy(DEFAULTS), **mapping}

        scenario = merged["scenario"]
        if isinstance(scenario, str):
            if scenario not in SCENARIOS:
                raise ConfigurationError(
                    f"unknown scenario {scenario!r}; choose from {sorted(SCENARIOS)} or give a mapping"
                )
        elif not isinstance(scenario, dict):
            raise ConfigurationError("scenario must be a name or an inline mapping")
        check_uniform_weights(merged["weights"])

        estimators = merged["estimators"]
        if estimators is None or (isinstance(estimators, (list, tuple)) and len(estimators) == 0):
            raise ConfigurationError(
                f"estimators is empty; name at least one of {list(KINDS)}"
            )
        options = merged["scenario_options"] or {}
        if not isinstance(options, dict):
            raise ConfigurationError("scenario_options must be a mapping")
        outputs = merged["outputs"]
        if not isinstance(outputs, str) or not outputs:
            raise ConfigurationError("outputs must be a directory path")
        if not isinstance(merged["precisions_all"], bool):
            raise ConfigurationError("precisions_all must be true or false")
        probes = merged["probes"]
        if probes is not None and not isinstance(probes, (list, tuple)):
            raise ConfigurationError("probes must be a list")
        return cls(
            scenario=scenario,
            sigma_bar=merged["sigma_bar"],
            seed=_integer(merged["seed"], "seed", 0, MAX_SEED),
            grid_intervals=_integer(merged["grid_intervals"], "grid_intervals", 1),
            integrator=_integrator(merged["integrator"]),
            estimators=_subset(estimators, KINDS, "estimators"),
            outputs=outputs,
            emit=_subset(merged["emit"], EMIT_KINDS, "emit"),
            jobs=_integer(merged["jobs"], "jobs", 1),
            scenario_options=dict(options),
            probes=None if probes is None else list(probes),
            precisions_all=merged["precisions_all"],
        )

    def build_scenario(self) -> ScenarioBundle:
        kwargs = {"num_intervals": self.grid_intervals, **self.scenario_options}
        try:
            if isinstance(self.scenario, dict):
                return inline_scenario(
                    self.scenario, 0 if self.sigma_bar is None else self.sigma_bar, **kwargs
                )
            return build_scenario(self.scenario, self.sigma_bar, **kwargs)
        except TypeError as exc:
            raise ConfigurationError(f"bad scenario options: {exc}") from None

    def resolved(self, bundle: Optional[ScenarioBundle] = None) -> dict:
        """Fully resolved mapping, defaults included."""
        bundle = bundle or self.build_scenario()
        integrator = self.integrator or bundle.integrator
        sigma = bundle.true_index if bundle.name == "inline" else _plain(bundle.sigma_bar)
        if isinstance(sigma, list) and len(sigma) == 1:
            sigma = sigma[0]
        return {
            "scenario": copy.deepcopy(self.scenario),
            "sigma_bar": sigma,
            "seed": self.seed,
            "grid_intervals": self.grid_intervals,
            "integrator": integrator.as_dict(),
            "estimators": list(self.estimators),
            "outputs": self.outputs,
            "emit": list(self.emit),
            "jobs": self.jobs,
            "scenario_options": copy.deepcopy(self.scenario_options),
            "probes": self.probes,
            "precisions_all": self.precisions_all,
            "weights": None,
        }


def _plain(value):
    arr = np.asarray(value, dtype=float)
    return [float(v) for v in arr.reshape(-1)]


def _set_dotted(mapping: dict, key: str, value) -> None:
    parts = key.split(".")
    if not all(parts):
        raise ConfigurationError(f"bad override key {key!r}")
    node = mapping
    for part in parts[:-1]:
        child = node.get(part)
        if child is None:
            child = node[part] = {}
        elif not isinstance(child, dict):
            raise ConfigurationError(f"override {key!r} descends into non-mapping {part!r}")
        node = child
    node[parts[-1]] = value


def parse_override(text: str):
    """Split ``key=value``; the value is parsed as YAML."""
    if "=" not in text:
        raise ConfigurationError(f"override {text!r} is not of the form key=value")
    key, raw = text.split("=", 1)
    try:
        value = yaml.safe_load(raw) if raw.strip() else None
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"cannot parse override {text!r}: {exc}") from None
    return key.strip(), value


def load_mapping(path=None, overrides=()) -> dict:
    """Read a YAML configuration (optional) and apply ``key=value`` overrides."""
    mapping = {}
    if path is not None:
        with open(path) as fh:
            text = fh.read()
        if str(path).endswith(".json"):
            try:
                mapping = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ConfigurationError(f"cannot parse {path}: {exc}") from None
        else:
            try:
                mapping = yaml.safe_load(text)
            except yaml.YAMLError as exc:
                raise ConfigurationError(f"cannot parse {path}: {exc}") from None
        if mapping is None:
            mapping = {}
        if not isinstance(mapping, dict):
            raise ConfigurationError(f"{path} does not hold a mapping")
    for item in overrides:
        key, value = parse_override(item)
        _set_dotted(mapping, key, value)
    return mapping


def load_config(path=None, overrides=()) -> ExperimentConfig:
    return ExperimentConfig.from_mapping(load_mapping(path, overrides))


# --------------------------------------------------------------------- pipeline


@dataclass(frozen=True, eq=False)
class ExperimentReport:
    config: dict
    bundle: ScenarioBundle
    realization: DisturbanceRealization
    ensemble: EnsembleResult
    estimates: dict
    errors: dict
    files: tuple

    def summary(self) -> str:
        lines = [f"scenario {self.bundle.name}, sigma_bar {format_label(self.bundle.sigma_bar)}, "
                 f"seed {self.config['seed']}, {len(self.ensemble)} members"]
        for kind, (sup, mean) in self.errors.items():
            lines.append(f"  {kind:<18} sup {sup:.6g}  mean {mean:.6g}")
        for path in self.files:
            lines.append(f"  wrote {path}")
        return "\n".join(lines)


def probe_indices(config: ExperimentConfig, bundle: ScenarioBundle) -> tuple:
    if config.probes is None:
        return bundle.probes
    if bundle.name == "inline":
        out = []
        for k in config.probes:
            out.append(_integer(k, "probes entry", 0, len(bundle.space) - 1))
        return tuple(out)
    return tuple(bundle.space.find(p) for p in config.probes)


def simulate(config: ExperimentConfig, bundle: Optional[ScenarioBundle] = None) -> DisturbanceRealization:
    bundle = bundle or config.build_scenario()
    integrator = config.integrator or bundle.integrator
    disturbances = sample_disturbances(bundle.shared, *bundle.covariances, bundle.grid, config.seed)
    return generate_measurement(bundle.true_system, bundle.shared, disturbances, bundle.grid, integrator)


def diagnostic_columns(
    bundle: ScenarioBundle,
    ensemble: EnsembleResult,
    estimates: dict,
    probes: tuple,
) -> dict:
    """Columns of ``diagnostics.csv`` keyed by header, in output order."""
    grid = bundle.grid
    reference = ensemble.runs[bundle.true_index]
    cols = {"t": grid.nodes}
    for kind, est in estimates.items():
        cols[f"err_{kind}"] = weighted_error_series(est, reference).values
    x_e = energy_min_estimator(ensemble).estimate
    cols["E_at_est"] = expected_energy_series(ensemble, x_e).values
    for k in probes:
        precision = ensemble.runs[k].riccati.precision.values
        label = bundle.label_of(k)
        cols[f"genprec_{label}"] = generalized_precision_series(precision, grid).values
        cols[f"diagdom_{label}"] = diag_dominance_series(precision, grid).values
    return cols


def _precision_columns(bundle, ensemble, members) -> dict:
    cols = {"t": bundle.grid.nodes}
    n = bundle.shared.n
    for k in members:
        label = bundle.label_of(k)
        p = ensemble.runs[k].riccati.precision.values
        for i in range(n):
            for j in range(n):
                cols[f"P_{label}_{i + 1}{j + 1}"] = p[:, i, j]
    return cols


def write_columns(path, cols: dict) -> None:
    data = np.column_stack([np.asarray(v, dtype=float) for v in cols.values()])
    np.savetxt(path, data, fmt=FLOAT_FORMAT, delimiter=",", header=",".join(cols), comments="")


def write_json(path, mapping: dict) -> None:
    with open(path, "w") as fh:
        json.dump(mapping, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _trajectory_columns(bundle, realization, estimates, reference) -> dict:
    cols = {"t": bundle.grid.nodes}
    for i in range(realization.truth.dim):
        cols[f"truth_{i + 1}"] = realization.truth.values[:, i]
    for i in range(realization.measurement.dim):
        cols[f"y_{i + 1}"] = realization.measurement.values[:, i]
    for kind, est in estimates.items():
        for i in range(est.dim):
            cols[f"est_{kind}_{i + 1}"] = est.values[:, i]
    for i in range(reference.dim):
        cols[f"ref_{i + 1}"] = reference.values[:, i]
    return cols


def run_experiment(config: ExperimentConfig, *, backend=None) -> ExperimentReport:
    """Build, simulate, filter, estimate, diagnose and write outputs."""
    bundle = config.build_scenario()
    integrator = config.integrator or bundle.integrator
    probes = probe_indices(config, bundle)
    realization = simulate(config, bundle)
    measurement = realization.measurement
    ensemble = run_ensemble(
        bundle.space, bundle.shared, measurement, bundle.grid, integrator,
        jobs=config.jobs, backend=backend,
    )
    outputs = compute_estimators(
        config.estimators, bundle.space, ensemble, bundle.shared, measurement, bundle.grid,
        integrator, backend=backend,
    )
    estimates = {kind: out.estimate for kind, out in outputs.items()}
    reference = ensemble.runs[bundle.true_index]
    errors = {}
    for kind, est in estimates.items():
        series = weighted_error_series(est, reference).values
        errors[kind] = (float(series.max()), float(series.mean()))

    tables = {}
    if "trajectories" in config.emit:
        tables[TRAJECTORIES_CSV] = _trajectory_columns(bundle, realization, estimates, reference.estimate)
    if "diagnostics" in config.emit:
        tables[DIAGNOSTICS_CSV] = diagnostic_columns(bundle, ensemble, estimates, probes)
    if "precisions" in config.emit:
        members = range(len(bundle.space)) if config.precisions_all else probes
        tables[PRECISIONS_CSV] = _precision_columns(bundle, ensemble, members)
    resolved = config.resolved(bundle)

    # single writer, after all computation
    os.makedirs(config.outputs, exist_ok=True)
    files = []
    for name, cols in tables.items():
        path = os.path.join(config.outputs, name)
        write_columns(path, cols)
        files.append(path)
    if "config_echo" in config.emit:
        path = os.path.join(config.outputs, CONFIG_ECHO)
        write_json(path, resolved)
        files.append(path)
    return ExperimentReport(resolved, bundle, realization, ensemble, outputs, errors, tuple(files))


def run_simulation(config: ExperimentConfig) -> tuple:
    """Data generation only: ``realization.csv`` plus the configuration echo."""
    bundle = config.build_scenario()
    realization = simulate(config, bundle)
    resolved = config.resolved(bundle)
    os.makedirs(config.outputs, exist_ok=True)
    files = [os.path.join(config.outputs, REALIZATION_CSV)]
    write_realization_csv(realization, files[0])
    if "config_echo" in config.emit:
        files.append(os.path.join(config.outputs, CONFIG_ECHO))
        write_json(files[-1], resolved)
    return realization, tuple(files)


def read_columns(path) -> dict:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != len(header):
        raise ConfigurationError(f"{path}: header has {len(header)} columns, rows have {data.shape[1]}")
    return {h: data[:, i] for i, h in enumerate(header)}


def _stacked(cols, prefix, grid):
    keys = [k for k in cols if k.startswith(prefix)]
    if not keys:
        return None
    return Trajectory(grid, np.column_stack([cols[k] for k in keys]))


def run_diagnose(source_dir, out_dir=None, *, jobs=None, backend=None) -> tuple:
    """Recompute diagnostics from a finished ``estimate`` output directory.

    The ensemble is rerun on the stored measurement; estimates are read back
    from ``trajectories.csv`` (17 significant digits round-trip exactly).
    """
    mapping = load_mapping(os.path.join(source_dir, CONFIG_ECHO))
    if jobs is not None:
        mapping["jobs"] = jobs
    config = ExperimentConfig.from_mapping(mapping)
    bundle = config.build_scenario()
    integrator = config.integrator or bundle.integrator
    grid = bundle.grid
    cols = read_columns(os.path.join(source_dir, TRAJECTORIES_CSV))
    if cols["t"].shape[0] != grid.size or np.any(cols["t"] != grid.nodes):
        raise ConfigurationError("stored time column does not match the configured grid")
    measurement = _stacked(cols, "y_", grid)
    estimates = {}
    for kind in config.estimators:
        est = _stacked(cols, f"est_{kind}_", grid)
        if est is None:
            raise ConfigurationError(f"{TRAJECTORIES_CSV} has no columns for estimator {kind}")
        estimates[kind] = est
    ensemble = run_ensemble(
        bundle.space, bundle.shared, measurement, grid, integrator, jobs=config.jobs, backend=backend
    )
    out_dir = out_dir or source_dir
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, DIAGNOSTICS_CSV)
    write_columns(path, diagnostic_columns(bundle, ensemble, estimates, probe_indices(config, bundle)))
    return ensemble, (path,)
