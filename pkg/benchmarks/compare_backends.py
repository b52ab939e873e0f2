"""Benchmark the jitted kernels against their pure-numpy fallbacks.

Runs the two hot kernels (hue-shift round trip, query x prototype distance
matrix) on realistic sizes and prints per-variant timings. The jitted
variants are warmed up first so compile time is reported separately.

Usage: python benchmarks/compare_backends.py [--repeats N]
"""

import argparse
import time

import numpy as np

from leafkit.accel import numba_enabled
from leafkit.kernels import (
    _distance_matrix_jit,
    _distance_matrix_vectorized,
    _hue_shift_jit,
    _hue_shift_vectorized,
)


def timeit(fn, *args, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(0)

    # one 224x224 image worth of pixels, the augmentation working size
    pixels = rng.random((224 * 224, 3))
    # a full query batch against a handful of class prototypes
    queries = rng.normal(size=(1296, 1920))
    protos = rng.normal(size=(3, 1920))

    rows = []
    if numba_enabled():
        t0 = time.perf_counter()
        _hue_shift_jit(pixels[:8], 20.0)
        _distance_matrix_jit(queries[:2], protos)
        warmup = time.perf_counter() - t0
        rows.append(("jit warmup (compile or cache load)", warmup))
        rows.append((
            "hue shift 224x224      numba",
            timeit(_hue_shift_jit, pixels, 20.0, repeats=args.repeats),
        ))
        rows.append((
            "distance 1296x3 @1920  numba",
            timeit(_distance_matrix_jit, queries, protos, repeats=args.repeats),
        ))
    else:
        print("numba unavailable or disabled (LEAFKIT_BACKEND=numpy); "
              "timing the fallback only")

    rows.append((
        "hue shift 224x224      numpy",
        timeit(_hue_shift_vectorized, pixels, 20.0, repeats=args.repeats),
    ))
    rows.append((
        "distance 1296x3 @1920  numpy",
        timeit(_distance_matrix_vectorized, queries, protos, repeats=args.repeats),
    ))

    width = max(len(name) for name, _ in rows)
    print(f"{'kernel':<{width}}  best of {args.repeats}")
    for name, seconds in rows:
        print(f"{name:<{width}}  {seconds * 1e3:8.2f} ms")

    if numba_enabled():
        a = _hue_shift_jit(pixels, 20.0)
        b = _hue_shift_vectorized(pixels, 20.0)
        print(f"hue outputs bit-identical across variants: {np.array_equal(a, b)}")


if __name__ == "__main__":
    main()
