"""Timing comparison of the compiled MSC kernels against the NumPy reference.

Both implementations are imported directly (the COMMOPT_PURE switch only
affects which one the package re-exports), timed on the shapes the shipped
experiments actually use, and checked for bitwise agreement first.

Usage: python3 benchmarks/bench_kernels.py [--reps N]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from commopt._kernels import reference

try:
    from commopt._kernels import _fastkern
except ImportError:
    _fastkern = None

CASES = [
    # (label, n, d, k, R): comparison experiments, the wide sweep, and headroom
    ("comparison", 30, 10, 2, 5),
    ("sweep", 30, 50, 2, 10),
    ("wide", 30, 1000, 20, 5),
]


def _inputs(n, d, k, R, seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    idx = np.sort(
        np.stack([[rng.choice(d, size=k, replace=False) for _ in range(R)] for _ in range(n)]),
        axis=2,
    ).astype(np.int64)
    return X, idx


def _run(impl, kernel, X, idx, k, R):
    V = np.zeros_like(X)
    if kernel == "msc_topk":
        counts = impl.msc_topk(X, V, k, R)
    elif kernel == "msc_randk":
        counts = impl.msc_randk(X, V, idx)
    else:
        d = X.shape[1]
        counts = impl.msc_urandk(X, V, idx, d / k, k / d)
    return V, counts


def _time(impl, kernel, X, idx, k, R, reps):
    best = float("inf")
    for _ in range(3):
        t0 = time.perf_counter()
        for _ in range(reps):
            _run(impl, kernel, X, idx, k, R)
        best = min(best, (time.perf_counter() - t0) / reps)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--reps", type=int, default=200, help="timed calls per measurement")
    args = parser.parse_args()

    if _fastkern is None:
        print("compiled extension not built; only the reference timings follow")

    header = f"{'kernel':10} {'case':12} {'shape':>14} {'reference':>12} {'compiled':>12} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for label, n, d, k, R in CASES:
        X, idx = _inputs(n, d, k, R, seed=42)
        for kernel in ("msc_topk", "msc_randk", "msc_urandk"):
            ref_V, ref_counts = _run(reference, kernel, X, idx, k, R)
            cols = f"{kernel:10} {label:12} {f'{n}x{d} R={R}':>14}"
            t_ref = _time(reference, kernel, X, idx, k, R, args.reps)
            if _fastkern is None:
                print(f"{cols} {t_ref * 1e6:>10.1f}us {'-':>12} {'-':>8}")
                continue
            fast_V, fast_counts = _run(_fastkern, kernel, X, idx, k, R)
            if not (
                np.array_equal(ref_V.view(np.uint64), fast_V.view(np.uint64))
                and np.array_equal(ref_counts, fast_counts)
            ):
                raise SystemExit(f"bitwise mismatch in {kernel} ({label})")
            t_fast = _time(_fastkern, kernel, X, idx, k, R, args.reps)
            print(f"{cols} {t_ref * 1e6:>10.1f}us {t_fast * 1e6:>10.1f}us {t_ref / t_fast:>7.1f}x")
    if _fastkern is not None:
        print("all kernels bitwise-identical between implementations")


if __name__ == "__main__":
    main()
