#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-numpy fallback.

Times greedy herding selection and the primal hinge solver on synthetic
workloads shaped like real incremental states (pooled new-class rows for
herding; one-vs-all binary problems for the solver).

    python benchmarks/bench_kernels.py [--quick]
"""

import argparse
import time

import numpy as np

from fetril import _kernels_py

try:
    from fetril import _kernels
except ImportError:
    _kernels = None


def time_call(fn, *args, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_herding(rows, dim, s, repeats):
    rng = np.random.default_rng(0)
    pool = rng.normal(size=(rows, dim))
    target = rng.normal(size=dim)
    out = {"python": time_call(_kernels_py.herd_select, pool, target, s,
                               repeats=repeats)}
    if _kernels is not None:
        out["c"] = time_call(_kernels.herd_select, pool, target, s,
                             repeats=repeats)
    return out


def bench_svm(rows, dim, repeats):
    rng = np.random.default_rng(1)
    X = rng.normal(size=(rows, dim))
    X[: rows // 4] += 1.5
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    xa = np.hstack([X, np.ones((rows, 1))])
    y = np.where(np.arange(rows) < rows // 4, 1.0, -1.0)
    out = {"python": time_call(_kernels_py.svm_primal, xa, y, 1.0, 1e-4, 1000,
                               repeats=repeats)}
    if _kernels is not None:
        out["c"] = time_call(_kernels.svm_primal, xa, y, 1.0, 1e-4, 1000,
                             repeats=repeats)
    return out


def report(name, timings):
    py = timings["python"]
    if "c" in timings:
        c = timings["c"]
        print(f"{name:<38} c={c * 1e3:9.2f} ms  python={py * 1e3:9.2f} ms  "
              f"speedup={py / c:5.2f}x")
    else:
        print(f"{name:<38} c=  (not built)  python={py * 1e3:9.2f} ms")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--quick", action="store_true",
                        help="smaller workloads, single repeat")
    args = parser.parse_args()
    repeats = 1 if args.quick else 3
    scale = 0.25 if args.quick else 1.0

    if _kernels is None:
        print("note: compiled kernels unavailable, timing fallback only")
    print(f"{'workload':<38} {'timings':>20}")
    for rows, dim, s in ((500, 64, 100), (2000, 64, 500), (5000, 512, 500)):
        rows = max(16, int(rows * scale))
        s = max(4, int(s * scale))
        report(f"herding  pool={rows:<5} d={dim:<4} s={s}",
               bench_herding(rows, dim, s, repeats))
    for rows, dim in ((500, 64), (2000, 64), (5000, 512)):
        rows = max(16, int(rows * scale))
        report(f"svm      rows={rows:<5} d={dim}", bench_svm(rows, dim, repeats))


if __name__ == "__main__":
    main()
