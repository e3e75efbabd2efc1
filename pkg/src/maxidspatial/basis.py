"""Spatial basis functions: fixed Gaussian-density kernels and log-Gaussian
process draws, plus the whitening transforms the block samplers rely on.

All weight matrices satisfy the row sum-to-one constraint; weights are
computed in log space so extreme latent values round to ~1e-300 instead of
exact zero.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cholesky, solve_triangular
from scipy.spatial.distance import cdist

from .errors import DomainError, NumericalError

__all__ = [
    "Site",
    "GaussianDensityBasisSpec",
    "ExpCovParams",
    "BasisField",
    "eval_gaussian_basis",
    "exp_cov_matrix",
    "chol_with_jitter",
    "sample_log_gp_basis",
    "weights_from_latent",
    "latent_from_weights",
    "whiten",
    "unwhiten",
]


@dataclass(frozen=True)
class Site:
    """A named observation location with planar coordinates."""

    id: str
    coords: tuple[float, float]

    def __post_init__(self):
        if not all(np.isfinite(self.coords)):
            raise DomainError(f"site {self.id} has non-finite coordinates")


@dataclass(frozen=True)
class GaussianDensityBasisSpec:
    """Fixed radial basis: Gaussian kernels centered at knots, bandwidth tau."""

    knots: np.ndarray  # (L, 2)
    tau: float

    def __post_init__(self):
        knots = np.atleast_2d(np.asarray(self.knots, dtype=np.float64))
        object.__setattr__(self, "knots", knots)
        if knots.shape[0] < 1:
            raise DomainError("at least one knot is required")
        if not self.tau > 0.0:
            raise DomainError(f"tau must be positive, got {self.tau}")


@dataclass(frozen=True)
class ExpCovParams:
    """Exponential covariance C(h) = variance * exp(-h / range)."""

    variance: float
    range_: float

    def __post_init__(self):
        if not (self.variance > 0.0 and self.range_ > 0.0):
            raise DomainError("variance and range must be strictly positive")


@dataclass
class BasisField:
    """Evaluated basis weights at a set of sites.

    weights rows sum to one; latent holds the Gaussian-process scale values
    (last basis pinned to zero) for the log-GP family and is None for the
    fixed Gaussian-density family.
    """

    coords: np.ndarray            # (D, 2)
    weights: np.ndarray           # (D, L)
    log_weights: np.ndarray       # (D, L)
    latent: np.ndarray | None = None  # (D, L-1)
    site_ids: list[str] = field(default_factory=list)

    @property
    def n_sites(self) -> int:
        return self.weights.shape[0]

    @property
    def n_basis(self) -> int:
        return self.weights.shape[1]


def _coords_array(sites) -> tuple[np.ndarray, list[str]]:
    if isinstance(sites, np.ndarray):
        return np.atleast_2d(np.asarray(sites, dtype=np.float64)), []
    coords = np.array([s.coords for s in sites], dtype=np.float64)
    return coords, [s.id for s in sites]


def _log_softmax_rows(logits: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    m = logits.max(axis=1, keepdims=True)
    logw = logits - (m + np.log(np.exp(logits - m).sum(axis=1, keepdims=True)))
    return logw, np.exp(logw)


def eval_gaussian_basis(sites, spec: GaussianDensityBasisSpec) -> BasisField:
    """Row-normalized Gaussian kernels K_l(s) ~ exp(-|s - v_l|^2 / (2 tau^2))."""
    coords, ids = _coords_array(sites)
    if coords.shape[0] == 0:
        raise DomainError("at least one site is required")
    d2 = cdist(coords, spec.knots, metric="sqeuclidean")
    logw, w = _log_softmax_rows(-d2 / (2.0 * spec.tau**2))
    return BasisField(coords=coords, weights=w, log_weights=logw, site_ids=ids)


def exp_cov_matrix(sites_a, sites_b, p: ExpCovParams) -> np.ndarray:
    """Pairwise exponential covariance between two site collections."""
    ca, _ = _coords_array(sites_a)
    cb, _ = _coords_array(sites_b)
    return p.variance * np.exp(-cdist(ca, cb) / p.range_)


def chol_with_jitter(cov: np.ndarray, variance: float) -> np.ndarray:
    """Lower Cholesky factor, escalating a diagonal jitter from 1e-8 to
    1e-4 of the marginal variance before giving up."""
    jitter = 0.0
    for k in range(5):
        try:
            return cholesky(cov + jitter * np.eye(cov.shape[0]), lower=True)
        except np.linalg.LinAlgError:
            pass
        except Exception:
            pass
        jitter = 1e-8 * variance * 10.0**k
    raise NumericalError("covariance matrix is not positive definite after jitter")


def weights_from_latent(latent: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(log_weights, weights) from Gaussian-scale values; the implicit last
    basis is the zero function, which makes the map invertible."""
    latent = np.atleast_2d(latent)
    logits = np.concatenate([latent, np.zeros((latent.shape[0], 1))], axis=1)
    return _log_softmax_rows(logits)


def latent_from_weights(weights: np.ndarray) -> np.ndarray:
    """Inverse of ``weights_from_latent``: log(K_l / K_L) for l < L."""
    weights = np.atleast_2d(weights)
    return np.log(weights[:, :-1]) - np.log(weights[:, -1:])


def sample_log_gp_basis(
    sites, n_basis: int, p: ExpCovParams, rng: np.random.Generator
) -> BasisField:
    """Draw L-1 independent mean-zero Gaussian-process paths with exponential
    covariance, pin the L-th latent to zero, and normalize rowwise."""
    if n_basis < 2:
        raise DomainError("log-GP basis needs at least two basis functions")
    coords, ids = _coords_array(sites)
    cov = exp_cov_matrix(coords, coords, p)
    chol = chol_with_jitter(cov, p.variance)
    latent = chol @ rng.standard_normal((coords.shape[0], n_basis - 1))
    logw, w = weights_from_latent(latent)
    return BasisField(
        coords=coords, weights=w, log_weights=logw, latent=latent, site_ids=ids
    )


def whiten(values: np.ndarray, chol_factor: np.ndarray) -> np.ndarray:
    """Map correlated Gaussian values to the i.i.d. scale, y = L^{-1} x."""
    if not np.all(np.isfinite(np.diag(chol_factor))) or np.any(
        np.diag(chol_factor) <= 0.0
    ):
        raise NumericalError("Cholesky factor is singular")
    return solve_triangular(chol_factor, values, lower=True)


def unwhiten(values: np.ndarray, chol_factor: np.ndarray) -> np.ndarray:
    """Inverse of ``whiten``: x = L y."""
    return chol_factor @ values
