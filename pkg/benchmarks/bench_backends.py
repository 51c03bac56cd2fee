"""Timing comparison of the compiled and pure-numpy kernel backends.

The backend is frozen at import time from COUPLEWELFARE_BACKEND, so this
script re-executes itself in a subprocess per backend and compares the
hot kernels on identical inputs:

* bracket_tax          - piecewise-linear tax over a bracket schedule
* eitc_credit_array    - trapezoid credit schedule
* ordered_sum          - compensated deterministic reduction

Usage:  python benchmarks/bench_backends.py [--size 2000000] [--repeat 7]
"""

import argparse
import json
import os
import subprocess
import sys
import time


def run_one_backend(size: int, repeat: int) -> dict:
    import numpy as np

    from couplewelfare import _kernels
    from couplewelfare._backend import BACKEND

    rng = np.random.default_rng(0)
    income = rng.uniform(0.0, 250000.0, size)
    lowers = np.array([0.0, 19050.0, 77400.0, 165000.0, 315000.0])
    rates = np.array([0.10, 0.12, 0.22, 0.24, 0.32])
    values = rng.uniform(0.5, 1.5, size)

    def best_of(fn, *args):
        fn(*args)  # warm-up (includes JIT compilation on the numba backend)
        times = []
        for _ in range(repeat):
            t0 = time.perf_counter()
            fn(*args)
            times.append(time.perf_counter() - t0)
        return min(times)

    return {
        "backend": BACKEND,
        "size": size,
        "bracket_tax": best_of(_kernels.bracket_tax, income, lowers, rates),
        "eitc_credit_array": best_of(
            _kernels.eitc_credit_array, income, 0.34, 10000.0, 18000.0, 0.16
        ),
        "ordered_sum": best_of(_kernels.ordered_sum, values),
    }


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--size", type=int, default=2_000_000)
    parser.add_argument("--repeat", type=int, default=7)
    parser.add_argument("--worker", choices=("numba", "numpy"))
    args = parser.parse_args()

    if args.worker:
        os.environ["COUPLEWELFARE_BACKEND"] = args.worker
        print(json.dumps(run_one_backend(args.size, args.repeat)))
        return 0

    results = {}
    for backend in ("numba", "numpy"):
        env = dict(os.environ, COUPLEWELFARE_BACKEND=backend)
        out = subprocess.run(
            [sys.executable, __file__, "--worker", backend,
             "--size", str(args.size), "--repeat", str(args.repeat)],
            env=env, capture_output=True, text=True, check=True,
        )
        results[backend] = json.loads(out.stdout.strip().splitlines()[-1])

    print(f"kernel timings, best of {args.repeat}, n = {args.size:,}\n")
    print(f"{'kernel':<20}{'numba (s)':>12}{'numpy (s)':>12}{'speedup':>10}")
    for kernel in ("bracket_tax", "eitc_credit_array", "ordered_sum"):
        nb = results["numba"][kernel]
        np_ = results["numpy"][kernel]
        print(f"{kernel:<20}{nb:>12.4f}{np_:>12.4f}{np_ / nb:>9.2f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
