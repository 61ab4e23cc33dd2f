#!/usr/bin/env python3
"""Benchmark the compiled warp kernel against the NumPy fallback.

The per-frame hot path warps 600 candidate patches out of the current
frame; this script times that workload for both kernels and checks they
agree. Run after an editable install:

    python benchmarks/bench_warp.py [--particles N] [--repeats N]
"""

import argparse
import time

import numpy as np

from collabtrack import _warp
from collabtrack.imagery import AffineState, _warp_coeffs

try:
    from collabtrack import _warp_fast
except ImportError:
    _warp_fast = None


def make_workload(particles, rng):
    frame = rng.random((480, 640))
    states = [
        AffineState(
            cx=rng.uniform(100, 540),
            cy=rng.uniform(100, 380),
            scale=rng.uniform(0.5, 2.0),
            rotation=rng.uniform(-0.3, 0.3),
            aspect=rng.uniform(0.7, 1.4),
            skew=rng.uniform(-0.1, 0.1),
        )
        for _ in range(particles)
    ]
    coeffs = np.array([_warp_coeffs(s, 64, 48) for s in states])
    return frame, coeffs


def time_kernel(kernel, frame, coeffs, repeats):
    kernel.warp_batch(frame, coeffs, 32)  # warm up
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        kernel.warp_batch(frame, coeffs, 32)
        best = min(best, time.perf_counter() - start)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--particles", type=int, default=600)
    parser.add_argument("--repeats", type=int, default=50)
    args = parser.parse_args()

    frame, coeffs = make_workload(args.particles, np.random.default_rng(0))
    numpy_time = time_kernel(_warp, frame, coeffs, args.repeats)
    print(f"numpy fallback : {numpy_time * 1e3:8.3f} ms / {args.particles} patches")

    if _warp_fast is None:
        print("compiled kernel: not built (pip install -e . --no-build-isolation)")
        return

    fast_time = time_kernel(_warp_fast, frame, coeffs, args.repeats)
    print(f"compiled kernel: {fast_time * 1e3:8.3f} ms / {args.particles} patches")
    print(f"speedup        : {numpy_time / fast_time:8.2f}x")

    a = _warp.warp_batch(frame, coeffs, 32)
    b = _warp_fast.warp_batch(frame, coeffs, 32)
    print(f"max |difference|: {np.abs(a - b).max():.3e}")


if __name__ == "__main__":
    main()
