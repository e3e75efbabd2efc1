"""Numeric kernels with a selectable backend.

The hot inner loops (stable-density quadrature, marginal quantile
inversion, likelihood cells) exist twice: a numba-compiled version and a
pure-numpy fallback. The environment variable ``MAXIDSPATIAL_BACKEND``
selects between them:

    MAXIDSPATIAL_BACKEND=numba   force the compiled path (error if absent)
    MAXIDSPATIAL_BACKEND=numpy   force the vectorized fallback
    (unset)                      numba when importable, else numpy

``benchmarks/benchmark_kernels.py`` times the two implementations against
each other on representative workloads.
"""
import os

BACKEND_ENV_VAR = "MAXIDSPATIAL_BACKEND"

_KERNEL_NAMES = [
    "log_kanter_a",
    "log_a_table",
    "ps_logpdf",
    "ps_logpdf_tab",
    "kanter_log_transform",
    "marginal_nlog_cdf_cells",
    "marginal_logpdf_cells",
    "marginal_quantile_cells",
    "invert_cells",
    "joint_nlog_cdf_many",
    "log_mix_scale",
    "gev_nlog_cdf_cells",
    "gev_logpdf_cells",
    "gev_quantile_from_nlog_cells",
    "frechet_logpdf_cells",
]


def _select_backend() -> str:
    choice = os.environ.get(BACKEND_ENV_VAR, "").strip().lower()
    if choice not in ("", "numba", "numpy"):
        raise ValueError(
            f"{BACKEND_ENV_VAR} must be 'numba' or 'numpy', got {choice!r}"
        )
    if choice == "numpy":
        return "numpy"
    if choice == "numba":
        import numba  # noqa: F401  (fail loudly if requested but missing)

        return "numba"
    try:
        import numba  # noqa: F401

        return "numba"
    except ImportError:
        return "numpy"


BACKEND = _select_backend()

if BACKEND == "numba":
    from . import _numba_impl as _impl
else:
    from . import _numpy_impl as _impl

for _name in _KERNEL_NAMES:
    globals()[_name] = getattr(_impl, _name)

__all__ = ["BACKEND", "BACKEND_ENV_VAR"] + _KERNEL_NAMES
