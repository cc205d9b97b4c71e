"""Command-line interface: ``uqkalman {simulate,estimate,diagnose,scenarios}``.

Exit codes: 0 success, 1 configuration error, 2 numerical failure, 3 I/O failure.
"""
from __future__ import annotations

import argparse
import sys

from . import __version__
from ._backend import BACKEND
from .errors import ConfigurationError, KalmanError
from .experiment import ExperimentConfig, load_mapping, run_diagnose, run_experiment, run_simulation
from .scenarios import SCENARIOS

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_IO = 3


def _common(parser):
    parser.add_argument("--config", metavar="PATH", help="YAML (or JSON) configuration file")
    parser.add_argument("--seed", type=int, metavar="U64", help="random seed (overrides the config)")
    parser.add_argument("--out", metavar="DIR", help="output directory (overrides the config)")
    parser.add_argument(
        "--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
        help="override a configuration entry, e.g. integrator.rel_tol=1.0e-9 (repeatable)",
    )
    parser.add_argument("--jobs", type=int, metavar="N", help="worker threads for the ensemble")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uqkalman",
        description="Kalman-Bucy filtering for linear systems with uncertain parameters.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__} ({BACKEND} kernels)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate truth and measurement only")
    _common(p)
    p = sub.add_parser("estimate", help="run the full estimation pipeline")
    _common(p)
    p = sub.add_parser("diagnose", help="recompute diagnostics from an estimate output directory")
    p.add_argument("--from", dest="source", required=True, metavar="DIR",
                   help="directory written by 'estimate'")
    p.add_argument("--out", metavar="DIR", help="where to write diagnostics.csv (default: --from)")
    p.add_argument("--jobs", type=int, metavar="N", help="worker threads for the ensemble")

    p = sub.add_parser("scenarios", help="built-in scenarios")
    p.add_argument("action", choices=["list"])
    return parser


def _config(args) -> ExperimentConfig:
    mapping = load_mapping(args.config, args.overrides)
    # explicit flags win over both the file and --set
    if args.seed is not None:
        mapping["seed"] = args.seed
    if args.out is not None:
        mapping["outputs"] = args.out
    if args.jobs is not None:
        mapping["jobs"] = args.jobs
    return ExperimentConfig.from_mapping(mapping)


def _dispatch(args) -> None:
    if args.command == "scenarios":
        for name, (_, description) in SCENARIOS.items():
            print(f"{name:<12} {description}")
        return
    if args.command == "diagnose":
        if args.jobs is not None and args.jobs < 1:
            raise ConfigurationError("jobs must be at least 1")
        _, files = run_diagnose(args.source, args.out, jobs=args.jobs)
        for path in files:
            print(f"wrote {path}")
        return
    config = _config(args)
    if args.command == "simulate":
        _, files = run_simulation(config)
        for path in files:
            print(f"wrote {path}")
        return
    print(run_experiment(config).summary())


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _dispatch(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except KalmanError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
