"""Timing comparison: compiled kernels vs the NumPy fallback.

Runs a fixed set of workloads against whichever backend the current process
imported, then re-runs itself in a subprocess with ROUGHKIT_PURE_PYTHON=1 and
prints a side-by-side table.  Usage:

    python3 benchmarks/bench_kernels.py [--repeat 3] [--json]
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

from roughkit import KERNEL_IMPLEMENTATION, paths, rough_core, signatures
from roughkit._kernels import chen_max_residual, sig_trajectory_batch


def _pvar_workload():
    rng = np.random.default_rng(7)
    values = np.cumsum(rng.normal(size=(1500, 1)), axis=0)
    path = paths.SampledPath(np.linspace(0.0, 1.0, 1500), values)
    return lambda: paths.p_variation(path, 2.5)


def _signature_workload():
    rng = np.random.default_rng(8)
    values = np.cumsum(rng.normal(size=(4096, 3)), axis=0)
    path = paths.SampledPath(np.linspace(0.0, 1.0, 4096), values)
    return lambda: signatures.signature(path, 5)


def _batch_signature_workload():
    rng = np.random.default_rng(9)
    inc = rng.normal(size=(256, 128, 2))
    return lambda: sig_trajectory_batch(inc, 4)


def _chen_workload():
    # all-pairs check is O(n^2 d^2); keep n modest so the fallback finishes
    rp = rough_core.brownian_rough_path(10, 256, dim=2)
    z1, z2 = rp.z1, rp.z2
    return lambda: chen_max_residual(z1, z2)


WORKLOADS = {
    "p-variation n=1500": _pvar_workload,
    "signature d=3 N=5 n=4096": _signature_workload,
    "batch signatures 256x128": _batch_signature_workload,
    "chen residual n=256": _chen_workload,
}


def run_all(repeat):
    results = {}
    for name, make in WORKLOADS.items():
        fn = make()
        fn()  # warm up caches and one-time allocations
        best = min(_timed(fn) for _ in range(repeat))
        results[name] = best
    return results


def _timed(fn):
    t0 = time.perf_counter()
    fn()
    return time.perf_counter() - t0


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", action="store_true",
                    help="print raw timings as JSON and skip the subprocess")
    args = ap.parse_args()

    mine = run_all(args.repeat)
    if args.json:
        print(json.dumps({"implementation": KERNEL_IMPLEMENTATION, "timings": mine}))
        return

    env = dict(os.environ, ROUGHKIT_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, os.path.abspath(__file__), "--repeat", str(args.repeat), "--json"],
        env=env, capture_output=True, text=True, check=True)
    other = json.loads(out.stdout)

    print("backend here: %s, subprocess: %s" % (KERNEL_IMPLEMENTATION,
                                                other["implementation"]))
    print("%-28s %12s %12s %9s" % ("workload", KERNEL_IMPLEMENTATION,
                                   other["implementation"], "speedup"))
    for name in WORKLOADS:
        a, b = mine[name], other["timings"][name]
        print("%-28s %10.2f ms %10.2f ms %8.1fx" % (name, 1e3 * a, 1e3 * b, b / a))


if __name__ == "__main__":
    main()
