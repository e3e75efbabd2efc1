"""Timing comparison of the numba-compiled and pure-numpy kernel backends
on representative hot-path workloads."""
from __future__ import annotations

import time

import numpy as np

__all__ = ["run_benchmark"]


def _workloads(rng: np.random.Generator):
    logk = np.log(rng.dirichlet(np.ones(6), size=30))
    n_cells = 600
    sidx = rng.integers(0, 30, n_cells)
    w = np.exp(rng.normal(size=n_cells))
    t0 = np.full(n_cells, np.nan)
    log_a = rng.normal(size=(20, 6))
    x_ps = np.exp(rng.normal(scale=3.0, size=240))
    vals = rng.normal(size=n_cells)
    mu = np.zeros(n_cells)
    sg = np.ones(n_cells)
    return [
        ("ps_logpdf (240 pts)", "ps_logpdf", (x_ps, 0.3)),
        (
            "invert_cells (600 cells, tilted)",
            "invert_cells",
            (w, sidx, logk, 0.3, 0.1, t0),
        ),
        (
            "marginal_nlog_cdf (600 cells)",
            "marginal_nlog_cdf_cells",
            (rng.normal(size=n_cells), sidx, logk, 0.3, 0.1),
        ),
        ("log_mix_scale (20x30x6)", "log_mix_scale", (log_a, logk, 0.3)),
        ("gev_logpdf (600 cells)", "gev_logpdf_cells", (vals, mu, sg, 0.1)),
        (
            "joint_nlog_cdf (200 x D=5)",
            "joint_nlog_cdf_many",
            (rng.normal(size=(200, 5)), np.log(rng.dirichlet(np.ones(6), size=5)), 0.3, 0.1),
        ),
    ]


def _time(fn, args, repeats: int = 30) -> float:
    fn(*args)  # warm-up / compile
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def run_benchmark(repeats: int = 30) -> list[dict]:
    """Time each kernel under both backends; prints a table, returns rows."""
    from .kernels import _numpy_impl

    try:
        from .kernels import _numba_impl
    except ImportError:
        _numba_impl = None

    rng = np.random.default_rng(0)
    rows = []
    print(f"{'workload':40s} {'numpy':>12s} {'numba':>12s} {'speedup':>9s}")
    for label, name, args in _workloads(rng):
        t_np = _time(getattr(_numpy_impl, name), args, repeats)
        if _numba_impl is not None:
            t_nb = _time(getattr(_numba_impl, name), args, repeats)
            ratio = t_np / t_nb
            print(f"{label:40s} {t_np*1e3:9.3f} ms {t_nb*1e3:9.3f} ms {ratio:8.1f}x")
        else:
            t_nb, ratio = np.nan, np.nan
            print(f"{label:40s} {t_np*1e3:9.3f} ms {'n/a':>12s}")
        rows.append(
            {"workload": label, "numpy_s": t_np, "numba_s": t_nb, "speedup": ratio}
        )
    return rows
