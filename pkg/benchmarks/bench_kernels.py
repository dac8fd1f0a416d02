"""Compare the numba-compiled kernels with the pure-numpy fallback.

The fallback is chosen at import time from CTAB_DISABLE_NUMBA, so each path
runs in its own interpreter.  Usage:

    python benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def _best(fn, repeat):
    fn()  # warm-up; pays the compile/cache-load cost for the jitted path
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def _workloads():
    from ctab import _kernels, polytope, simulate
    from ctab.lp import solve_many

    rng = np.random.default_rng(0)
    big = rng.dirichlet(np.ones(40 * 40)).reshape(40, 40)
    cdf = np.cumsum(rng.dirichlet(np.ones(27)))
    cdf[-1] = 1.0
    u = rng.random(1_000_000)

    fr = np.zeros((4, 4, 4))
    rows = json.load(open(os.path.join(os.path.dirname(__file__), "..", "tests", "data", "fienberg_rinaldo.json")))
    fr[...] = np.asarray(rows["cells"], dtype=float).reshape(4, 4, 4)
    cs = polytope.constraints_from_table(fr, exact=False)
    A, b = np.asarray(cs.A, float), np.asarray(cs.rhs, float)
    C = np.vstack([np.eye(64), -np.eye(64)])

    one_way = [[1 / 3] * 3] * 3
    return {
        "concordance 40x40": lambda: _kernels.concordance(big),
        "concordance_grad 40x40": lambda: _kernels.concordance_grad(big),
        "inversion sampling 1e6 draws": lambda: _kernels.inversion_counts(cdf, u),
        "simplex 128 objectives (4x4x4)": lambda: solve_many(C, A, b),
        "fixed cells 4x4x4 (float)": lambda: polytope.fixed_cells(fr, exact=False),
        "pearson bounds 3x3x3": lambda: simulate.pearson_bounds(one_way, {(1, 2): 1}),
    }


def child(repeat):
    from ctab import _kernels

    out = {"numba": _kernels.NUMBA_ENABLED, "times": {}}
    for name, fn in _workloads().items():
        out["times"][name] = _best(fn, repeat)
    json.dump(out, sys.stdout)


def run_path(disable, repeat):
    env = dict(os.environ, CTAB_DISABLE_NUMBA="1" if disable else "0")
    proc = subprocess.run(
        [sys.executable, __file__, "--child", "--repeat", str(repeat)],
        env=env, capture_output=True, text=True, check=True,
    )
    return json.loads(proc.stdout)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()
    if args.child:
        child(args.repeat)
        return
    fast = run_path(False, args.repeat)
    slow = run_path(True, args.repeat)
    if not fast["numba"]:
        print("numba is not importable; both columns use the fallback")
    width = max(len(k) for k in fast["times"])
    print(f"{'workload':<{width}}  {'numba [ms]':>11}  {'numpy [ms]':>11}  {'speed-up':>8}")
    for name, t in fast["times"].items():
        s = slow["times"][name]
        print(f"{name:<{width}}  {t * 1e3:11.3f}  {s * 1e3:11.3f}  {s / t:7.1f}x")


if __name__ == "__main__":
    main()
