"""Tail-dependence measures: analytic conditional-exceedance curves, their
Monte Carlo counterparts under a random basis, extremal coefficients, and
empirical estimators for model checking.

chi_u is the conditional probability that one site exceeds its marginal
u-quantile given the other does; for the tilted model it decays to zero as
u -> 1, while the untilted model keeps it level-invariant.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.spatial.distance import pdist, squareform

from . import kernels
from .basis import ExpCovParams, sample_log_gp_basis
from .distributions import HougaardParams
from .errors import DomainError
from .process import simulate_latent_field

__all__ = [
    "ChiCurve",
    "chi_u_analytic",
    "chibar_u_analytic",
    "chi_u_montecarlo",
    "extremal_coefficient",
    "empirical_chi",
]


@dataclass
class ChiCurve:
    """A tail-dependence curve over quantile levels or distance bins."""

    u: np.ndarray
    values: np.ndarray
    label: str = ""
    se: np.ndarray | None = None
    lo95: np.ndarray | None = None
    hi95: np.ndarray | None = None

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=np.float64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.u.shape != self.values.shape:
            raise DomainError("quantile grid and values must align")
        if self.u.size > 1 and np.any(np.diff(self.u) <= 0.0):
            raise DomainError("quantile grid must be strictly increasing")


def _check_u(u: float) -> float:
    u = float(u)
    if not 0.0 < u < 1.0:
        raise DomainError("u must lie strictly in (0,1)")
    if 1.0 - u < 1e-12:
        raise DomainError("u is too close to 1 for a stable evaluation")
    return u


def _pair_quantiles_log(u: float, logk: np.ndarray, dep: HougaardParams) -> np.ndarray:
    w = np.full(2, -np.log(u))
    return kernels.marginal_quantile_cells(
        w, np.arange(2, dtype=np.int64), logk, dep.alpha, dep.theta
    )


def _pair_survival(u: float, logk: np.ndarray, dep: HougaardParams) -> float:
    """P(both sites exceed their marginal u-quantile), evaluated without
    cancellation: 1 - 2u + C(u,u) = expm1(log C) + 2(1-u)."""
    logq = _pair_quantiles_log(u, logk, dep)
    w_joint = kernels.joint_nlog_cdf_many(logq[None, :], logk, dep.alpha, dep.theta)[0]
    return float(np.expm1(-w_joint) + 2.0 * (1.0 - u))


def chi_u_analytic(
    u: float, pair_weights, dep: HougaardParams, form: str = "exceedance"
) -> float:
    """chi_u for a site pair conditional on its two basis weight rows.

    form "exceedance" is the conditional exceedance probability
    (1 - 2u + C(u,u)) / (1 - u). form "level" is the equivalent-limit
    functional 2 - log C(u,u) / log u, which is exactly level-invariant for
    the untilted (max-stable) model; both converge to the same chi as
    u -> 1 and both vanish there under tilting.
    """
    u = _check_u(u)
    logk = np.log(np.atleast_2d(np.asarray(pair_weights, dtype=np.float64)))
    if form == "exceedance":
        return _pair_survival(u, logk, dep) / (1.0 - u)
    if form == "level":
        logq = _pair_quantiles_log(u, logk, dep)
        w_joint = kernels.joint_nlog_cdf_many(
            logq[None, :], logk, dep.alpha, dep.theta
        )[0]
        return float(2.0 - w_joint / (-np.log(u)))
    raise DomainError(f"unknown chi form {form!r}")


def chibar_u_analytic(u: float, pair_weights, dep: HougaardParams) -> float:
    """chibar_u = 2 log P(exceed) / log P(joint exceed) - 1, in [-1, 1]."""
    u = _check_u(u)
    logk = np.log(np.atleast_2d(np.asarray(pair_weights, dtype=np.float64)))
    surv = _pair_survival(u, logk, dep)
    val = 2.0 * np.log1p(-u) / np.log(surv) - 1.0
    return float(np.clip(val, -1.0, 1.0))


def chi_u_montecarlo(
    u: float,
    pair_coords,
    dep: HougaardParams,
    basis_prior: ExpCovParams,
    n_basis: int,
    n_draws: int,
    rng: np.random.Generator,
    method: str = "basis",
    n_field_reps: int = 50_000,
) -> tuple[float, float]:
    """chi_u marginalized over the random log-GP basis; returns (value, SE).

    method "basis" averages the analytic conditional survival over basis
    draws, calibrating marginal quantiles against the pooled (unconditional)
    margin. method "field" estimates the same quantity from full latent
    field simulation, which also averages over the coefficients.
    """
    u = _check_u(u)
    if n_draws < 100:
        raise DomainError("need at least 100 Monte Carlo draws")
    coords = np.atleast_2d(np.asarray(pair_coords, dtype=np.float64))

    if method == "field":
        per = max(1, n_field_reps // n_draws)
        samples = []
        for _ in range(n_draws):
            field = sample_log_gp_basis(coords, n_basis, basis_prior, rng)
            samples.append(simulate_latent_field(dep, field.log_weights, per, rng))
        log_z = np.concatenate(samples, axis=0)
        q = np.quantile(log_z, u, axis=0)
        both = (log_z[:, 0] > q[0]) & (log_z[:, 1] > q[1])
        second = log_z[:, 1] > q[1]
        p = both.sum() / max(second.sum(), 1)
        se = float(np.sqrt(p * (1.0 - p) / max(second.sum(), 1)))
        return float(p), se

    if method != "basis":
        raise DomainError(f"unknown Monte Carlo method {method!r}")

    fields = [
        sample_log_gp_basis(coords, n_basis, basis_prior, rng)
        for _ in range(n_draws)
    ]
    # pooled margin: average of conditional CDFs, inverted per site
    def pooled_cdf(logz: float, site: int) -> float:
        ws = np.array(
            [
                kernels.marginal_nlog_cdf_cells(
                    np.array([logz]),
                    np.zeros(1, dtype=np.int64),
                    f.log_weights[site : site + 1],
                    dep.alpha,
                    dep.theta,
                )[0]
                for f in fields
            ]
        )
        return float(np.mean(np.exp(-ws)))

    logq = np.empty(2)
    for site in range(2):
        lo, hi = -40.0, 40.0
        while pooled_cdf(lo, site) > u:
            lo -= 20.0
        while pooled_cdf(hi, site) < u:
            hi += 20.0
        logq[site] = brentq(lambda t: pooled_cdf(t, site) - u, lo, hi, xtol=1e-12)

    survs = np.empty(n_draws)
    for m, f in enumerate(fields):
        w_joint = kernels.joint_nlog_cdf_many(
            logq[None, :], f.log_weights, dep.alpha, dep.theta
        )[0]
        w_m = kernels.marginal_nlog_cdf_cells(
            logq, np.arange(2, dtype=np.int64), f.log_weights, dep.alpha, dep.theta
        )
        survs[m] = np.exp(-w_joint) - np.exp(-w_m[0]) - np.exp(-w_m[1]) + 1.0
    chi = float(np.mean(survs) / (1.0 - u))
    se = float(np.std(survs, ddof=1) / np.sqrt(n_draws) / (1.0 - u))
    return chi, se


def extremal_coefficient(weights, alpha: float) -> float:
    """Effective number of independent sites among D for the untilted
    (max-stable) model: sum_l (sum_j K_l(s_j)^(1/alpha))^alpha, in [1, D]."""
    logk = np.log(np.atleast_2d(np.asarray(weights, dtype=np.float64)))
    # theta_D = -log G(1,...,1) since the margins are unit Frechet
    w = kernels.joint_nlog_cdf_many(
        np.zeros((1, logk.shape[0])), logk, alpha, 0.0
    )
    return float(w[0])


def empirical_chi(
    values_uniform: np.ndarray,
    coords: np.ndarray,
    u: float,
    n_bins: int = 12,
    n_boot: int = 200,
    rng: np.random.Generator | None = None,
    min_pairs_per_bin: int = 20,
) -> ChiCurve:
    """Binned empirical chi_u from uniform-transformed observations.

    Pairs are pooled into equal-count distance bins; the estimate is the
    ratio of joint to single exceedances (strict inequalities), with
    bootstrap-over-years standard errors. Bins with too few joint
    observations come back as NaN.
    """
    u = _check_u(u)
    x = np.asarray(values_uniform, dtype=np.float64)
    coords = np.atleast_2d(np.asarray(coords, dtype=np.float64))
    t_n, d = x.shape
    if coords.shape[0] != d:
        raise DomainError("coordinate rows must match value columns")
    rng = rng or np.random.default_rng(0)

    dist = squareform(pdist(coords))
    ii, jj = np.triu_indices(d, k=1)
    pair_d = dist[ii, jj]
    edges = np.quantile(pair_d, np.linspace(0.0, 1.0, n_bins + 1))
    edges[-1] += 1e-9
    bin_of = np.clip(np.searchsorted(edges, pair_d, side="right") - 1, 0, n_bins - 1)

    exceed = x > u  # NaN-safe: NaN > u is False
    obs = np.isfinite(x)

    def estimate(year_idx: np.ndarray) -> np.ndarray:
        e = exceed[year_idx]
        o = obs[year_idx]
        both = (e[:, ii] & e[:, jj]).sum(axis=0).astype(np.float64)
        pair_obs = o[:, ii] & o[:, jj]
        denom = (e[:, jj] & o[:, ii]).sum(axis=0) + (e[:, ii] & o[:, jj]).sum(axis=0)
        num = 2.0 * both
        vals = np.full(n_bins, np.nan)
        for b in range(n_bins):
            sel = bin_of == b
            n_joint = pair_obs[:, sel].sum()
            den_b = denom[sel].sum()
            if n_joint >= min_pairs_per_bin and den_b > 0:
                vals[b] = num[sel].sum() / den_b
        return vals

    point = estimate(np.arange(t_n))
    boots = np.empty((n_boot, n_bins))
    for b in range(n_boot):
        boots[b] = estimate(rng.integers(0, t_n, size=t_n))
    se = np.nanstd(boots, axis=0, ddof=1)
    lo = np.nanpercentile(boots, 2.5, axis=0)
    hi = np.nanpercentile(boots, 97.5, axis=0)
    centers = 0.5 * (edges[:-1] + edges[1:])
    return ChiCurve(centers, point, label=f"u={u}", se=se, lo95=lo, hi95=hi)
