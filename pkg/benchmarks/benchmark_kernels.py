#!/usr/bin/env python3
"""Compare the numba-compiled kernels against the pure-numpy fallback.

Run from the repository root:

    python3 benchmarks/benchmark_kernels.py

The same comparison is available as `maxidspatial benchmark`.
"""
from maxidspatial.benchmark import run_benchmark

if __name__ == "__main__":
    run_benchmark()
