"""The generative model: constructive simulation, exact joint and marginal
distributions, quantile inversion, the data-scale transform, and the
hierarchical conditional likelihood.

The latent process at a site is Z(s) = eps(s) * Y(s) with an independent
Frechet(1, 1/alpha) nugget eps and Y(s) = {sum_l A_l K_l(s)^(1/alpha)}^alpha.
With tilted-stable coefficients A_l the joint distribution conditional on
the basis is available in closed form, and observations are remargined to
arbitrary GEV laws site by site.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .basis import BasisField, Site
from .distributions import GevParams, HougaardParams, hougaard_sample
from .errors import DomainError, NumericalError

__all__ = [
    "Dataset",
    "MaxIdModel",
    "simulate_Y",
    "simulate_latent_field",
    "simulate_field",
    "joint_cdf",
    "marginal_cdf",
    "marginal_pdf",
    "marginal_quantile",
    "to_data_scale",
    "from_data_scale",
    "conditional_loglik",
]


@dataclass
class Dataset:
    """Annual-maxima observations: sites, year labels, and a T x D value
    matrix with NaN marking missing cells."""

    sites: list[Site]
    years: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.years = np.asarray(self.years, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.years.shape[0], len(self.sites)):
            raise DomainError(
                f"value matrix {self.values.shape} does not match "
                f"{self.years.shape[0]} years x {len(self.sites)} sites"
            )
        if self.values.shape[0] and not np.all(np.any(np.isfinite(self.values), axis=1)):
            raise DomainError("every year needs at least one observed cell")

    @property
    def coords(self) -> np.ndarray:
        return np.array([s.coords for s in self.sites], dtype=np.float64)

    @property
    def observed(self) -> np.ndarray:
        return np.isfinite(self.values)

    @property
    def n_years(self) -> int:
        return self.values.shape[0]

    @property
    def n_sites(self) -> int:
        return self.values.shape[1]


@dataclass
class MaxIdModel:
    """Dependence parameters, evaluated basis, and per-site GEV margins."""

    dep: HougaardParams
    basis: BasisField
    mu: np.ndarray      # (D,)
    sigma: np.ndarray   # (D,)
    xi: np.ndarray      # (D,) spatially constant in fitting, stored per site

    def __post_init__(self):
        d = self.basis.n_sites
        self.mu = np.broadcast_to(np.asarray(self.mu, dtype=np.float64), (d,)).copy()
        self.sigma = np.broadcast_to(np.asarray(self.sigma, dtype=np.float64), (d,)).copy()
        self.xi = np.broadcast_to(np.asarray(self.xi, dtype=np.float64), (d,)).copy()
        if np.any(self.sigma <= 0.0):
            raise DomainError("GEV scale must be positive at every site")

    def margins(self, i: int) -> GevParams:
        return GevParams(float(self.mu[i]), float(self.sigma[i]), float(self.xi[i]))


def _weights_row_log(weights_row) -> np.ndarray:
    row = np.atleast_1d(np.asarray(weights_row, dtype=np.float64))
    if np.any(row < 0.0):
        raise DomainError("basis weights must be nonnegative")
    with np.errstate(divide="ignore"):
        return np.log(row)[None, :]


def simulate_Y(A, weights_row, alpha: float) -> float:
    """Y = {sum_l A_l K_l^(1/alpha)}^alpha, evaluated in log space."""
    a = np.atleast_1d(np.asarray(A, dtype=np.float64))
    if np.any(a <= 0.0):
        raise DomainError("coefficients A must be positive")
    logk = _weights_row_log(weights_row)
    return float(np.exp(kernels.log_mix_scale(np.log(a)[None, :], logk, alpha)[0, 0]))


def simulate_latent_field(
    dep: HougaardParams,
    log_weights: np.ndarray,
    n_years: int,
    rng: np.random.Generator,
    return_coefficients: bool = False,
):
    """Draw log Z for n_years independent replicates at all sites.

    Per year: coefficients A_l iid tilted stable, a site-independent
    Frechet(1, 1/alpha) nugget, and Z(s) = eps(s) * Y(s). Everything stays
    in log space so heavy-tailed draws cannot overflow.
    """
    d, L = log_weights.shape
    a = hougaard_sample(dep, n_years * L, rng).reshape(n_years, L)
    log_y = kernels.log_mix_scale(np.log(a), log_weights, dep.alpha)
    # Frechet(1, 1/alpha) nugget: eps = (-log U)^(-alpha)
    log_eps = -dep.alpha * np.log(rng.exponential(size=(n_years, d)))
    log_z = log_eps + log_y
    if return_coefficients:
        return log_z, a
    return log_z


def simulate_field(model: MaxIdModel, n_years: int, rng: np.random.Generator) -> Dataset:
    """Simulate a complete dataset on the data (GEV) scale."""
    log_z = simulate_latent_field(model.dep, model.basis.log_weights, n_years, rng)
    d = model.basis.n_sites
    values = np.empty((n_years, d))
    for i in range(d):
        w = kernels.marginal_nlog_cdf_cells(
            log_z[:, i],
            np.zeros(n_years, dtype=np.int64),
            model.basis.log_weights[i : i + 1],
            model.dep.alpha,
            model.dep.theta,
        )
        values[:, i] = kernels.gev_quantile_from_nlog_cells(
            w,
            np.full(n_years, model.mu[i]),
            np.full(n_years, model.sigma[i]),
            float(model.xi[i]),
        )
    sites = model.basis.site_ids or [f"s{i:04d}" for i in range(d)]
    site_objs = [
        Site(sid, (float(c[0]), float(c[1])))
        for sid, c in zip(sites, model.basis.coords)
    ]
    return Dataset(site_objs, np.arange(1, n_years + 1), values)


def joint_cdf(z, dep: HougaardParams, weights) -> float:
    """Exact joint CDF of (Z(s_1),...,Z(s_D)) conditional on the basis."""
    z_arr = np.atleast_1d(np.asarray(z, dtype=np.float64))
    if np.any(z_arr <= 0.0):
        return 0.0
    logk = np.log(np.atleast_2d(np.asarray(weights, dtype=np.float64)))
    w = kernels.joint_nlog_cdf_many(np.log(z_arr)[None, :], logk, dep.alpha, dep.theta)
    return float(np.exp(-w[0]))


def marginal_cdf(z, dep: HougaardParams, weights_row):
    """One-site latent CDF G_s(z); unit Frechet exactly when theta = 0."""
    z_arr = np.atleast_1d(np.asarray(z, dtype=np.float64)).ravel()
    logk = _weights_row_log(weights_row)
    out = np.zeros(z_arr.shape)
    pos = z_arr > 0.0
    w = kernels.marginal_nlog_cdf_cells(
        np.log(z_arr[pos]),
        np.zeros(int(pos.sum()), dtype=np.int64),
        logk,
        dep.alpha,
        dep.theta,
    )
    out[pos] = np.exp(-w)
    return float(out[0]) if np.ndim(z) == 0 else out.reshape(np.shape(z))


def marginal_pdf(z, dep: HougaardParams, weights_row):
    """Exact derivative of ``marginal_cdf``; zero for z <= 0."""
    z_arr = np.atleast_1d(np.asarray(z, dtype=np.float64)).ravel()
    logk = _weights_row_log(weights_row)
    out = np.zeros(z_arr.shape)
    pos = z_arr > 0.0
    out[pos] = np.exp(
        kernels.marginal_logpdf_cells(
            np.log(z_arr[pos]),
            np.zeros(int(pos.sum()), dtype=np.int64),
            logk,
            dep.alpha,
            dep.theta,
        )
    )
    return float(out[0]) if np.ndim(z) == 0 else out.reshape(np.shape(z))


def marginal_quantile(u, dep: HougaardParams, weights_row):
    """Invert the one-site latent CDF; closed form when theta = 0, otherwise
    a bracketed Newton iteration verified to |G(z) - u| < 1e-10."""
    u_arr = np.atleast_1d(np.asarray(u, dtype=np.float64)).ravel()
    if np.any(u_arr <= 0.0) or np.any(u_arr >= 1.0):
        raise DomainError("u must lie strictly in (0,1)")
    logk = _weights_row_log(weights_row)
    sidx = np.zeros(u_arr.shape[0], dtype=np.int64)
    w = -np.log(u_arr)
    logz = kernels.marginal_quantile_cells(w, sidx, logk, dep.alpha, dep.theta)
    w_back = kernels.marginal_nlog_cdf_cells(logz, sidx, logk, dep.alpha, dep.theta)
    if np.any(np.abs(np.exp(-w_back) - u_arr) > 1e-10):
        raise NumericalError("marginal quantile inversion did not converge")
    out = np.exp(logz)
    return float(out[0]) if np.ndim(u) == 0 else out.reshape(np.shape(u))


def to_data_scale(z, margins: GevParams, dep: HougaardParams, weights_row):
    """Map a latent value through GEV^{-1}(G_s(z)): strictly increasing."""
    z_arr = np.atleast_1d(np.asarray(z, dtype=np.float64)).ravel()
    if np.any(z_arr <= 0.0):
        raise DomainError("latent values must be positive")
    logk = _weights_row_log(weights_row)
    w = kernels.marginal_nlog_cdf_cells(
        np.log(z_arr),
        np.zeros(z_arr.shape[0], dtype=np.int64),
        logk,
        dep.alpha,
        dep.theta,
    )
    out = kernels.gev_quantile_from_nlog_cells(
        w,
        np.full(z_arr.shape, margins.mu),
        np.full(z_arr.shape, margins.sigma),
        margins.xi,
    )
    return float(out[0]) if np.ndim(z) == 0 else out.reshape(np.shape(z))


def from_data_scale(z_tilde, margins: GevParams, dep: HougaardParams, weights_row):
    """Inverse of ``to_data_scale``: GEV CDF then latent quantile."""
    arr = np.atleast_1d(np.asarray(z_tilde, dtype=np.float64)).ravel()
    w = kernels.gev_nlog_cdf_cells(
        arr,
        np.full(arr.shape, margins.mu),
        np.full(arr.shape, margins.sigma),
        margins.xi,
    )
    if np.any(~np.isfinite(w)) or np.any(w <= 0.0):
        raise DomainError("value outside the GEV support")
    logk = _weights_row_log(weights_row)
    sidx = np.zeros(arr.shape[0], dtype=np.int64)
    logz = kernels.marginal_quantile_cells(w, sidx, logk, dep.alpha, dep.theta)
    out = np.exp(logz)
    return float(out[0]) if np.ndim(z_tilde) == 0 else out.reshape(np.shape(z_tilde))


def loglik_cells(
    values: np.ndarray,
    observed: np.ndarray,
    log_a: np.ndarray,
    log_weights: np.ndarray,
    alpha: float,
    theta: float,
    mu: np.ndarray,
    sigma: np.ndarray,
    xi: float,
) -> np.ndarray:
    """Per-cell conditional log likelihood on the data scale (array core).

    Each observed cell contributes the Frechet log density of the latent
    value given Y plus the log Jacobian of the GEV remargining (GEV density
    over latent marginal density). Missing cells are NaN.
    """
    t_n, d = values.shape
    logy = kernels.log_mix_scale(log_a, log_weights, alpha)
    flat_obs = observed.ravel()
    site_idx = np.tile(np.arange(d, dtype=np.int64), t_n)[flat_obs]
    vals = values.ravel()[flat_obs]
    gev_ll = kernels.gev_logpdf_cells(vals, mu[site_idx], sigma[site_idx], xi)
    cell_vals = np.full(vals.shape, -np.inf)
    ok = np.isfinite(gev_ll)
    if np.any(ok):
        w_data = kernels.gev_nlog_cdf_cells(
            vals[ok], mu[site_idx[ok]], sigma[site_idx[ok]], xi
        )
        logz = kernels.marginal_quantile_cells(
            w_data, site_idx[ok], log_weights, alpha, theta
        )
        marg_ll = kernels.marginal_logpdf_cells(
            logz, site_idx[ok], log_weights, alpha, theta
        )
        fre_ll = kernels.frechet_logpdf_cells(logz, logy.ravel()[flat_obs][ok], alpha)
        cell_vals[ok] = fre_ll + gev_ll[ok] - marg_ll
    out = np.full(flat_obs.shape, np.nan)
    out[flat_obs] = cell_vals
    return out.reshape(t_n, d)


def conditional_loglik(data: Dataset, A: np.ndarray, model: MaxIdModel) -> float:
    """Joint conditional log likelihood of the data given coefficients A.

    A has shape (T, L) with all entries positive; missing cells contribute
    nothing. Raises if any observed cell produces a non-finite term.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.shape != (data.n_years, model.basis.n_basis):
        raise DomainError(
            f"A has shape {A.shape}, expected {(data.n_years, model.basis.n_basis)}"
        )
    if np.any(A <= 0.0):
        raise DomainError("coefficients A must be positive")
    xi = float(model.xi[0])
    if not np.allclose(model.xi, xi):
        raise DomainError("conditional_loglik expects a spatially constant shape")
    cells = loglik_cells(
        data.values,
        data.observed,
        np.log(A),
        model.basis.log_weights,
        model.dep.alpha,
        model.dep.theta,
        model.mu,
        model.sigma,
        xi,
    )
    obs = data.observed
    bad = obs & ~np.isfinite(cells)
    if np.any(bad):
        t, i = np.argwhere(bad)[0]
        raise NumericalError(
            f"non-finite likelihood at year {data.years[t]}, "
            f"site {data.sites[i].id}"
        )
    return float(np.sum(cells[obs]))
