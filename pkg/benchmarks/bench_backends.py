#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-Python fallback.

Times the two hot paths (batch path-gain and CART split search) on both
backends, checks that outputs agree exactly, and prints the speedups.

    python benchmarks/bench_backends.py [--drops 400] [--rows 4000] [--repeat 3]
"""
import argparse
import math
import time

import numpy as np

from landsense._kernels import pyref

try:
    from landsense._kernels import _speedups as compiled
except ImportError:
    compiled = None


def timeit(fn, repeat):
    best = math.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_gain(args):
    rng = np.random.default_rng(0)
    grid = np.ascontiguousarray(
        rng.choice(np.array([0, 4, 7, 11, 15], dtype=np.int16), (200, 200)))
    K = 54
    exp_l = np.zeros(16)
    exp_l[[0, 4]] = 2.0
    exp_l[7], exp_l[11], exp_l[15] = 3.0, 2.6, 3.2
    exc_l = np.zeros(16)
    exc_l[15], exc_l[7] = 0.4, 0.15
    sx, sy = rng.uniform(0, 1000, K), rng.uniform(0, 1000, K)
    sz = np.full(K, 25.0)
    s_az = np.where(rng.random(K) < 0.5, rng.uniform(0, 360, K), math.nan)
    fspl = np.full(K, 46.4)
    ux, uy = rng.uniform(0, 1000, args.drops), rng.uniform(0, 1000, args.drops)
    shadow = rng.normal(0, 4, (args.drops, K))
    call = (grid, 5.0, exp_l, exc_l, sx, sy, sz, s_az, fspl, ux, uy,
            1.5, 1.0, -200.0, shadow)
    return {name: timeit(lambda m=mod: m.gain_matrix(*call), args.repeat)
            for name, mod in backends()}


def bench_split(args):
    rng = np.random.default_rng(1)
    X = np.ascontiguousarray(rng.normal(-90, 10, (args.rows, 7)))
    y = rng.integers(0, 2, args.rows).astype(np.int32)
    return {name: timeit(lambda m=mod: m.best_split(X, y, 2), args.repeat)
            for name, mod in backends()}


def backends():
    yield "python", pyref
    if compiled is not None:
        yield "compiled", compiled


def report(title, results):
    print(f"\n{title}")
    base = results["python"][0]
    for name, (secs, _) in results.items():
        speedup = base / secs if secs else float("inf")
        print(f"  {name:<9} {secs * 1e3:9.2f} ms   ({speedup:5.1f}x)")
    if len(results) == 2:
        a, b = (results["python"][1], results["compiled"][1])
        if isinstance(a, tuple):
            match = all(np.array_equal(x, y) for x, y in zip(a, b))
        else:
            match = np.array_equal(a, b)
        print(f"  outputs bit-identical: {match}")
        if not match:
            raise SystemExit("backend outputs diverged")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--drops", type=int, default=400,
                        help="UE drops for the gain-matrix benchmark")
    parser.add_argument("--rows", type=int, default=4000,
                        help="rows for the split-search benchmark")
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    if compiled is None:
        print("compiled backend not available; timing pure Python only")
    report(f"gain_matrix: {args.drops} drops x 54 stations on a 200x200 grid",
           bench_gain(args))
    report(f"best_split: {args.rows} rows x 7 features, 2 classes",
           bench_split(args))


if __name__ == "__main__":
    main()
