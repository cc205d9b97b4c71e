"""Compare the compiled and pure-Python integration kernels.

Runs the Riccati pair and the member filters for a slice of a built-in
scenario with each available backend, reports wall time and the largest
difference between the backends' outputs.

    python benchmarks/bench_kernels.py --scenario oscillator --members 10
"""
import argparse
import time

import numpy as np

from uqkalman import generate_measurement, make_solution, run_filter, sample_disturbances
from uqkalman._backend import available_backends
from uqkalman.scenarios import build_scenario


def bench(bundle, members, backend, repeat):
    config = bundle.integrator
    dist = sample_disturbances(bundle.shared, *bundle.covariances, bundle.grid, 0)
    y = generate_measurement(bundle.true_system, bundle.shared, dist, bundle.grid, config).measurement
    best_ric = best_filt = np.inf
    for _ in range(repeat):
        start = time.perf_counter()
        sols = [make_solution(s, bundle.shared, bundle.grid, config, backend=backend) for s in members]
        mid = time.perf_counter()
        runs = [
            run_filter(s, bundle.shared, y, sol, bundle.grid, config, backend=backend)
            for s, sol in zip(members, sols)
        ]
        end = time.perf_counter()
        best_ric, best_filt = min(best_ric, mid - start), min(best_filt, end - mid)
    precisions = np.stack([sol.precision.values for sol in sols])
    estimates = np.stack([run.estimate.values for run in runs])
    return best_ric, best_filt, precisions, estimates


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--scenario", default="oscillator", choices=["oscillator", "amplidyne"])
    parser.add_argument("--members", type=int, default=10, help="number of ensemble members to run")
    parser.add_argument("--intervals", type=int, default=1000)
    parser.add_argument("--repeat", type=int, default=1)
    args = parser.parse_args(argv)

    bundle = build_scenario(args.scenario, num_intervals=args.intervals)
    members = bundle.space.members[: args.members]
    results = {}
    print(f"{args.scenario}: {len(members)} members, {bundle.grid.size} nodes")
    print(f"{'backend':<8} {'riccati [s]':>12} {'filters [s]':>12}")
    for name in available_backends():
        ric, filt, prec, est = bench(bundle, members, name, args.repeat)
        results[name] = (ric, filt, prec, est)
        print(f"{name:<8} {ric:>12.4f} {filt:>12.4f}")
    if len(results) == 2:
        py, cy = results["python"], results["cython"]
        speedup = (py[0] + py[1]) / (cy[0] + cy[1])
        rel_p = np.max(np.abs(py[2] - cy[2]) / (1 + np.abs(py[2])))
        rel_x = np.max(np.abs(py[3] - cy[3]) / (1 + np.abs(py[3])))
        print(f"speedup {speedup:.1f}x; max rel difference: precision {rel_p:.1e}, estimate {rel_x:.1e}")


if __name__ == "__main__":
    main()
