"""Positive-stable, exponentially tilted stable, Frechet, and GEV families.

The positive-stable density has no closed form; it is evaluated through a
panelled quadrature of its integral representation (see ``kernels``). The
tilted-stable density normalizes the tilted positive-stable density through
its closed-form Laplace transform, which also serves as the Monte Carlo
oracle for every sampler here.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DomainError, NumericalError

__all__ = [
    "StableParams",
    "HougaardParams",
    "GevParams",
    "ps_density",
    "ps_logpdf",
    "ps_sample",
    "hougaard_density",
    "hougaard_logpdf",
    "hougaard_sample",
    "hougaard_sample_info",
    "laplace_hougaard",
    "gev_cdf",
    "gev_quantile",
    "gev_density",
    "gev_logpdf",
    "frechet_cdf",
    "frechet_logpdf",
]


@dataclass(frozen=True)
class StableParams:
    """Index of a positive-stable law with Laplace transform exp(-s^alpha)."""

    alpha: float

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise DomainError(f"alpha must lie strictly in (0,1), got {self.alpha}")


@dataclass(frozen=True)
class HougaardParams:
    """Exponentially tilted positive-stable law H(alpha, delta, theta).

    theta = 0 recovers PS(alpha) exactly. delta is fixed to alpha throughout
    this package (a pure scale choice that does not affect dependence).
    """

    alpha: float
    theta: float = 0.0
    delta: float | None = None

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise DomainError(f"alpha must lie strictly in (0,1), got {self.alpha}")
        if self.theta < 0.0:
            raise DomainError(f"theta must be nonnegative, got {self.theta}")
        if self.delta is None:
            object.__setattr__(self, "delta", self.alpha)
        elif self.delta != self.alpha:
            raise DomainError("delta is fixed to alpha in this model")


@dataclass(frozen=True)
class GevParams:
    """Location/scale/shape triple of a generalized extreme-value law."""

    mu: float
    sigma: float
    xi: float

    def __post_init__(self):
        if not self.sigma > 0.0:
            raise DomainError(f"sigma must be positive, got {self.sigma}")


def _as_positive_array(x, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if np.any(arr <= 0.0) or np.any(~np.isfinite(arr)):
        raise DomainError(f"{name} must be strictly positive and finite")
    return arr


def _restore_shape(out: np.ndarray, x):
    if np.ndim(x) == 0:
        return float(out[0])
    return out.reshape(np.shape(x))


# ---------------------------------------------------------------------------
# positive stable
# ---------------------------------------------------------------------------

def ps_logpdf(x, p: StableParams):
    """Log density of PS(alpha) at x > 0."""
    arr = _as_positive_array(x, "x")
    out = kernels.ps_logpdf(arr.ravel(), p.alpha)
    if np.any(np.isnan(out)):
        raise NumericalError("positive-stable quadrature produced NaN")
    return _restore_shape(out, x)


def ps_density(x, p: StableParams):
    """Density of PS(alpha) at x > 0 via adaptive panel quadrature."""
    return np.exp(ps_logpdf(x, p)) if np.ndim(x) else float(np.exp(ps_logpdf(x, p)))


def _ps_sample_log(alpha: float, size: int, rng: np.random.Generator) -> np.ndarray:
    u = rng.uniform(size=size)
    e = rng.exponential(size=size)
    return kernels.kanter_log_transform(u, e, alpha)


def ps_sample(p: StableParams, size: int, rng: np.random.Generator) -> np.ndarray:
    """Draw from PS(alpha) via the exact product representation.

    A draw is {a(pi*U)/W}^{(1-alpha)/alpha} with U uniform and W unit
    exponential, sharing the same a(.) as the density quadrature.
    Deterministic given the generator state.
    """
    return np.exp(_ps_sample_log(p.alpha, size, rng))


# ---------------------------------------------------------------------------
# exponentially tilted stable
# ---------------------------------------------------------------------------

def hougaard_logpdf(x, p: HougaardParams):
    """Log density of H(alpha, alpha, theta) at x > 0."""
    if p.theta == 0.0:
        return ps_logpdf(x, StableParams(p.alpha))
    arr = _as_positive_array(x, "x")
    base = kernels.ps_logpdf(arr.ravel(), p.alpha)
    out = base - p.theta * arr.ravel() + p.theta**p.alpha
    return _restore_shape(out, x)


def hougaard_density(x, p: HougaardParams):
    """Density of H(alpha, alpha, theta): the PS(alpha) density tilted by
    exp(-theta*x) and renormalized through the Laplace transform."""
    out = np.exp(hougaard_logpdf(x, p))
    return out if np.ndim(x) else float(out)


def laplace_hougaard(s, p: HougaardParams):
    """Closed-form Laplace transform E exp(-s X) of H(alpha, delta, theta)."""
    s_arr = np.asarray(s, dtype=np.float64)
    if np.any(s_arr < 0.0):
        raise DomainError("s must be nonnegative")
    out = np.exp(
        -(p.delta / p.alpha) * ((p.theta + s_arr) ** p.alpha - p.theta**p.alpha)
    )
    return float(out) if np.ndim(s) == 0 else out


def hougaard_sample_info(
    p: HougaardParams,
    size: int,
    rng: np.random.Generator,
    max_draws: int = 1_000_000,
) -> tuple[np.ndarray, int]:
    """Rejection draws from H(alpha, alpha, theta) plus total proposals used.

    Accepts a PS(alpha) proposal X with probability exp(-theta X); the
    expected proposals per draw equal exp(theta^alpha). The count lets
    callers judge when a uniformly fast sampler would pay off.
    """
    if p.theta == 0.0:
        return np.exp(_ps_sample_log(p.alpha, size, rng)), size
    out = np.empty(size)
    filled = 0
    consumed = 0
    accept_rate = float(laplace_hougaard(p.theta, HougaardParams(p.alpha, 0.0)))
    while filled < size:
        batch = int(min(max(64, 1.3 * (size - filled) / accept_rate), 4_000_000))
        if consumed + batch > max_draws * max(size, 1):
            raise NumericalError(
                "tilted-stable rejection sampler exceeded its iteration cap; "
                "theta is too large for simple rejection (consider the "
                "double-rejection method)"
            )
        logx = _ps_sample_log(p.alpha, batch, rng)
        logu = np.log(rng.uniform(size=batch))
        with np.errstate(over="ignore"):
            keep = logu <= -p.theta * np.exp(np.minimum(logx, 700.0))
        kept_pos = np.nonzero(keep)[0]
        n_new = min(kept_pos.shape[0], size - filled)
        if n_new == size - filled:
            # count proposals only up to the one that fills the quota, so the
            # total matches the sequential repeat-until algorithm exactly
            consumed += int(kept_pos[n_new - 1]) + 1
        else:
            consumed += batch
        out[filled : filled + n_new] = np.exp(logx[kept_pos[:n_new]])
        filled += n_new
    return out, consumed


def hougaard_sample(
    p: HougaardParams, size: int, rng: np.random.Generator
) -> np.ndarray:
    """Draw from H(alpha, alpha, theta) by simple rejection against PS(alpha)."""
    return hougaard_sample_info(p, size, rng)[0]


# ---------------------------------------------------------------------------
# GEV
# ---------------------------------------------------------------------------

def _gev_args(z, p: GevParams):
    arr = np.atleast_1d(np.asarray(z, dtype=np.float64)).ravel()
    mu = np.full(arr.shape, p.mu)
    sigma = np.full(arr.shape, p.sigma)
    return arr, mu, sigma


def gev_cdf(z, p: GevParams):
    """GEV distribution function with a continuous Gumbel limit at xi = 0."""
    arr, mu, sigma = _gev_args(z, p)
    out = np.exp(-kernels.gev_nlog_cdf_cells(arr, mu, sigma, p.xi))
    return _restore_shape(out, z)


def gev_quantile(u, p: GevParams):
    """GEV quantile function for u in (0,1)."""
    u_arr = np.atleast_1d(np.asarray(u, dtype=np.float64)).ravel()
    if np.any(u_arr <= 0.0) or np.any(u_arr >= 1.0):
        raise DomainError("u must lie strictly in (0,1)")
    w = -np.log(u_arr)
    mu = np.full(w.shape, p.mu)
    sigma = np.full(w.shape, p.sigma)
    out = kernels.gev_quantile_from_nlog_cells(w, mu, sigma, p.xi)
    return _restore_shape(out, u)


def gev_logpdf(z, p: GevParams):
    """GEV log density; -inf outside the support when xi != 0."""
    arr, mu, sigma = _gev_args(z, p)
    out = kernels.gev_logpdf_cells(arr, mu, sigma, p.xi)
    return _restore_shape(out, z)


def gev_density(z, p: GevParams):
    """GEV density; zero outside the support when xi != 0."""
    out = np.exp(gev_logpdf(z, p))
    return out if np.ndim(z) else float(out)


# ---------------------------------------------------------------------------
# Frechet
# ---------------------------------------------------------------------------

def frechet_cdf(z, scale, shape):
    """Two-parameter Frechet distribution function exp{-(z/scale)^-shape}."""
    z_arr = np.atleast_1d(np.asarray(z, dtype=np.float64)).ravel()
    out = np.zeros(z_arr.shape)
    pos = z_arr > 0.0
    out[pos] = np.exp(-((z_arr[pos] / scale) ** (-shape)))
    return _restore_shape(out, z)


def frechet_logpdf(z, scale, shape):
    """Two-parameter Frechet log density; -inf for z <= 0."""
    z_arr = np.atleast_1d(np.asarray(z, dtype=np.float64)).ravel()
    out = np.full(z_arr.shape, -np.inf)
    pos = z_arr > 0.0
    out[pos] = kernels.frechet_logpdf_cells(
        np.log(z_arr[pos]), np.full(pos.sum(), np.log(scale)), 1.0 / shape
    )
    return _restore_shape(out, z)
