"""Adaptive Metropolis-Hastings sampler for the hierarchical model.

One sweep updates, in order: the dependence scalars (logit/log random
walks), the basis coefficients A (log-scale walks, years vectorized since
they factorize), the GEV margin fields per spatial cluster (whitened block
walks), the basis latents per cluster (joint whitened walks under the
sum-to-one constraint), the covariance hyperparameters, and finally the
missing-cell imputation. Proposal scales adapt toward target acceptance
rates during burn-in only, so the post-burn-in kernel is fixed.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import solve_triangular

from . import kernels
from .basis import (
    BasisField,
    ExpCovParams,
    GaussianDensityBasisSpec,
    chol_with_jitter,
    eval_gaussian_basis,
    exp_cov_matrix,
    weights_from_latent,
)
from .clusters import knn_cluster
from .distributions import HougaardParams
from .errors import ConfigError, NumericalError
from .ess import effective_sample_size
from .process import Dataset, MaxIdModel, loglik_cells

__all__ = [
    "Priors",
    "ModelSpec",
    "McmcConfig",
    "ChainState",
    "ChainOutput",
    "Sampler",
    "run_chain",
    "log_posterior",
]

_LOG_2PI = np.log(2.0 * np.pi)


def _normal_logpdf(x: float, var: float) -> float:
    return -0.5 * (_LOG_2PI + np.log(var)) - 0.5 * x * x / var


def _halfnormal_logpdf(x: float, var: float) -> float:
    if x < 0.0:
        return -np.inf
    return 0.5 * np.log(2.0 / (np.pi * var)) - 0.5 * x * x / var


@dataclass(frozen=True)
class Priors:
    """Prior hyperparameters; range-type scales default to the squared
    maximum pairwise site distance when left unset."""

    theta_sd: float = 10.0
    coef_var: float = 100.0
    scale_var: float = 100.0
    range_var: float | None = None
    tau_var: float | None = None

    def resolve(self, coords: np.ndarray) -> "Priors":
        from scipy.spatial.distance import pdist

        max_d2 = float(np.max(pdist(coords)) ** 2) if coords.shape[0] > 1 else 1.0
        return replace(
            self,
            range_var=self.range_var if self.range_var is not None else max_d2,
            tau_var=self.tau_var if self.tau_var is not None else max_d2,
        )


@dataclass(frozen=True)
class ModelSpec:
    """Which of the four model families to fit, and how margins are modeled."""

    basis_family: str = "log-gp"     # "log-gp" | "gaussian-density"
    n_basis: int = 6
    tilt: str = "free"               # "free" (theta >= 0) | "zero" (pinned)
    margins: str = "constant"        # "constant" | "gp"
    knots: np.ndarray | None = None  # required for the gaussian-density family

    def __post_init__(self):
        if self.basis_family not in ("log-gp", "gaussian-density"):
            raise ConfigError(f"unknown basis family {self.basis_family!r}")
        if self.tilt not in ("free", "zero"):
            raise ConfigError(f"unknown tilt mode {self.tilt!r}")
        if self.margins not in ("constant", "gp"):
            raise ConfigError(f"unknown margin mode {self.margins!r}")
        if self.basis_family == "gaussian-density":
            if self.knots is None:
                raise ConfigError("gaussian-density basis requires knots")
            knots = np.atleast_2d(np.asarray(self.knots, dtype=np.float64))
            object.__setattr__(self, "knots", knots)
            object.__setattr__(self, "n_basis", knots.shape[0])
        elif self.n_basis < 2:
            raise ConfigError("log-gp basis needs at least 2 basis functions")


@dataclass(frozen=True)
class McmcConfig:
    n_iter: int = 4000
    burn_in: int = 1000
    thin: int = 1
    n_clusters: int = 20
    seed: int = 0
    target_accept_scalar: float = 0.41
    target_accept_block: float = 0.23
    adapt: bool = True
    n_chains: int = 1
    basis_joint_accept: bool = False
    n_inner_updates: int = 2

    def __post_init__(self):
        if not self.burn_in < self.n_iter:
            raise ConfigError("burn_in must be smaller than n_iter")
        if self.n_clusters < 1:
            raise ConfigError("need at least one cluster")
        if self.thin < 1:
            raise ConfigError("thin must be >= 1")


@dataclass
class ChainState:
    """A complete snapshot of every latent variable and hyperparameter."""

    alpha: float
    theta: float
    log_a: np.ndarray            # (T, L)
    latent: np.ndarray | None    # (D, L-1) for the log-GP family
    tau: float | None            # bandwidth for the gaussian-density family
    mu: np.ndarray               # (D,)
    gamma: np.ndarray            # (D,)  log GEV scale
    xi: float
    beta_mu: float
    beta_gamma: float
    d2_mu: float
    rho_mu: float
    d2_gamma: float
    rho_gamma: float
    d2_k: float
    rho_k: float
    values: np.ndarray           # (T, D) data with imputed cells filled
    proposal_log_scales: dict = field(default_factory=dict)


@dataclass
class ChainOutput:
    """Thinned posterior draws plus run diagnostics."""

    spec: ModelSpec
    config: McmcConfig
    scalars: dict
    a_draws: np.ndarray                  # (n_kept, T, L)
    latent_draws: np.ndarray | None      # (n_kept, D, L-1)
    mu_draws: np.ndarray                 # (n_kept, D)
    gamma_draws: np.ndarray              # (n_kept, D)
    imputed_draws: np.ndarray            # (n_kept, n_missing)
    missing_cells: np.ndarray            # (n_missing, 2) of (year_idx, site_idx)
    acceptance: dict
    ess: dict
    wallclock_s: float
    final_state: ChainState
    coords: np.ndarray
    site_ids: list
    years: np.ndarray

    @property
    def n_kept(self) -> int:
        return self.a_draws.shape[0]


class _Adaptive:
    __slots__ = ("log_scale", "n", "acc")

    def __init__(self, scale: float):
        self.log_scale = float(np.log(scale))
        self.n = 0
        self.acc = 0.0

    @property
    def scale(self) -> float:
        return float(np.exp(self.log_scale))

    def rate(self) -> float:
        return self.acc / self.n if self.n else 0.0


def _gp_logpdf(x: np.ndarray, mean: float, chol: np.ndarray) -> float:
    v = solve_triangular(chol, x - mean, lower=True, check_finite=False)
    return float(
        -0.5 * v @ v - np.sum(np.log(np.diag(chol))) - 0.5 * x.shape[0] * _LOG_2PI
    )


class _GpQuadForm:
    """Cached inverse Cholesky factor for fast Gaussian log densities."""

    __slots__ = ("inv", "half_logdet", "const")

    def __init__(self, chol: np.ndarray):
        d = chol.shape[0]
        self.inv = solve_triangular(chol, np.eye(d), lower=True, check_finite=False)
        self.half_logdet = float(np.sum(np.log(np.diag(chol))))
        self.const = -self.half_logdet - 0.5 * d * _LOG_2PI

    def logpdf(self, x: np.ndarray, mean: float) -> float:
        v = self.inv @ (x - mean)
        return float(-0.5 * v @ v + self.const)

    def logpdf_cols(self, x: np.ndarray, mean=0.0) -> float:
        """Sum of logpdfs over the columns of x (shared mean)."""
        v = self.inv @ (x - mean)
        return float(-0.5 * np.sum(v * v) + x.shape[1] * self.const)


class Sampler:
    """Holds the chain state, cached likelihood cells, and update kernels.

    The per-cell caches (latent values, marginal and Frechet terms) are
    invalidated selectively: dependence-parameter moves recompute all
    columns, cluster moves only their own columns, coefficient moves only
    the Frechet terms of their rows.
    """

    def __init__(
        self,
        data: Dataset,
        spec: ModelSpec,
        priors: Priors,
        config: McmcConfig,
        rng: np.random.Generator,
        use_likelihood: bool = True,
    ):
        self.data = data
        self.spec = spec
        self.config = config
        self.rng = rng
        self.use_likelihood = use_likelihood
        self.coords = data.coords
        self.priors = priors.resolve(self.coords)
        self.T = data.n_years
        self.D = data.n_sites
        self.L = spec.n_basis
        self.obs = data.observed.copy()
        self.missing_cells = np.argwhere(~self.obs)
        self.adapting = config.adapt
        self.sweep_count = 0
        self.auto_rejects = 0

        n_clusters = min(config.n_clusters, self.D)
        self.clusters = knn_cluster(self.coords, n_clusters, seed=config.seed)

        self._init_state()
        self._init_caches()
        self._init_scales()

    # -- initialization -----------------------------------------------------

    def _init_state(self):
        data, spec = self.data, self.spec
        self.values = data.values.copy()
        col_med = np.nanmedian(self.values, axis=0)
        col_med = np.where(np.isfinite(col_med), col_med, np.nanmedian(self.values))
        miss = ~self.obs
        self.values[miss] = np.broadcast_to(col_med, self.values.shape)[miss]

        # Gumbel moment estimates for the margins
        if spec.margins == "gp":
            m = np.nanmean(data.values, axis=0)
            s = np.nanstd(data.values, axis=0)
            s = np.where((s > 0) & np.isfinite(s), s, np.nanstd(data.values))
        else:
            m = np.full(self.D, np.nanmean(data.values))
            s = np.full(self.D, max(np.nanstd(data.values), 1e-6))
        sigma0 = np.maximum(s, 1e-6) * np.sqrt(6.0) / np.pi
        self.mu = m - 0.57721566 * sigma0
        self.gamma = np.log(sigma0)
        self.xi = 0.0
        self.beta_mu = float(np.mean(self.mu))
        self.beta_gamma = float(np.mean(self.gamma))
        self.d2_mu = max(float(np.var(self.mu)), 0.01)
        self.d2_gamma = max(float(np.var(self.gamma)), 0.01)
        from scipy.spatial.distance import pdist

        max_d = float(np.max(pdist(self.coords))) if self.D > 1 else 1.0
        self.rho_mu = 0.3 * max_d
        self.rho_gamma = 0.3 * max_d
        self.d2_k = 4.0
        self.rho_k = 0.3 * max_d

        self.alpha = 0.5
        self.theta = 0.01 if spec.tilt == "free" else 0.0
        self.log_a = np.zeros((self.T, self.L))

        if spec.basis_family == "log-gp":
            self.latent = np.zeros((self.D, self.L - 1))
            self.tau = None
            self.log_weights = weights_from_latent(self.latent)[0]
        else:
            self.latent = None
            self.tau = 0.5 * max_d / max(np.sqrt(self.L), 1.0)
            self.log_weights = eval_gaussian_basis(
                self.coords, GaussianDensityBasisSpec(spec.knots, self.tau)
            ).log_weights

    def _init_caches(self):
        self._refresh_gp_factors("mu")
        self._refresh_gp_factors("gamma")
        self._refresh_gp_factors("k")
        self._ps_table = kernels.log_a_table(self.alpha)
        self.ps_ll = kernels.ps_logpdf_tab(
            np.exp(self.log_a).ravel(), self.alpha, *self._ps_table
        ).reshape(self.T, self.L)
        self._refresh_all_cells()

    def _init_scales(self):
        self.scales: dict[str, _Adaptive] = {}
        for name, s0 in (
            ("alpha", 0.15),
            ("theta", 0.05),
            ("theta_log", 0.4),
            ("tau", 0.2),
            ("xi", 0.05),
            ("mu", 0.1),
            ("gamma", 0.1),
            ("beta_mu", 0.1),
            ("beta_gamma", 0.1),
            ("d2_mu", 0.5),
            ("rho_mu", 0.5),
            ("d2_gamma", 0.5),
            ("rho_gamma", 0.5),
            ("d2_k", 0.5),
            ("rho_k", 0.5),
        ):
            self.scales[name] = _Adaptive(s0)
        for l in range(self.L):
            self.scales[f"A_{l}"] = _Adaptive(1.0)
        self.scales["k_rescale"] = _Adaptive(0.5)
        self.scales["alpha_joint"] = _Adaptive(0.3)
        for j in range(len(self.clusters)):
            self.scales[f"mu_block_{j}"] = _Adaptive(0.3)
            self.scales[f"gamma_block_{j}"] = _Adaptive(0.3)
            self.scales[f"basis_block_{j}"] = _Adaptive(0.3)

    # -- covariance factor caches -------------------------------------------

    def _refresh_gp_factors(self, which: str):
        if which == "mu":
            p = ExpCovParams(self.d2_mu, self.rho_mu)
        elif which == "gamma":
            p = ExpCovParams(self.d2_gamma, self.rho_gamma)
        else:
            p = ExpCovParams(self.d2_k, self.rho_k)
        cov = exp_cov_matrix(self.coords, self.coords, p)
        full = chol_with_jitter(cov, p.variance)
        blocks = [
            chol_with_jitter(cov[np.ix_(c, c)], p.variance) for c in self.clusters
        ]
        setattr(self, f"_chol_{which}_full", full)
        setattr(self, f"_chol_{which}_blocks", blocks)
        setattr(self, f"_quad_{which}", _GpQuadForm(full))

    # -- likelihood cell cache ----------------------------------------------

    def _cells_for(self, cols, log_weights, alpha, theta, mu, gamma, xi):
        """Candidate per-cell likelihood terms for the given columns.

        Returns (ok, total, w_data, gev, logz, marg, fre) with (T, C) dense
        blocks (NaN at missing cells), or ok=False when an observed cell
        falls outside the GEV support.
        """
        t_n = self.T
        cols = np.asarray(cols, dtype=np.int64)
        c_n = cols.shape[0]
        obs = self.obs[:, cols]
        flat = obs.ravel()
        nan_block = np.full((t_n, c_n), np.nan)
        if not self.use_likelihood or not np.any(flat):
            z = nan_block
            return True, 0.0, z, z, z, z, z
        vals = self.values[:, cols].ravel()[flat]
        sidx = np.tile(cols, (t_n, 1)).ravel()[flat]
        sigma = np.exp(gamma)
        gev_ll = kernels.gev_logpdf_cells(vals, mu[sidx], sigma[sidx], xi)
        if np.any(~np.isfinite(gev_ll)):
            return False, -np.inf, None, None, None, None, None
        w_data = kernels.gev_nlog_cdf_cells(vals, mu[sidx], sigma[sidx], xi)
        # warm-start the inversion from the cached latent values
        t0 = self.cell_logz[:, cols].ravel()[flat] if hasattr(self, "cell_logz") else np.full(vals.shape, np.nan)
        logz, marg = kernels.invert_cells(w_data, sidx, log_weights, alpha, theta, t0)
        logy = kernels.log_mix_scale(self.log_a, log_weights[cols], alpha)
        fre = kernels.frechet_logpdf_cells(logz, logy.ravel()[flat], alpha)

        def dense(v):
            out = nan_block.copy()
            out[obs] = v
            return out

        total = float(np.sum(fre + gev_ll - marg))
        if not np.isfinite(total):
            return False, -np.inf, None, None, None, None, None
        return True, total, dense(w_data), dense(gev_ll), dense(logz), dense(marg), dense(fre)

    def _refresh_all_cells(self):
        cols = np.arange(self.D, dtype=np.int64)
        ok, total, w, g, z, m, f = self._cells_for(
            cols, self.log_weights, self.alpha, self.theta, self.mu, self.gamma, self.xi
        )
        if not ok:
            raise NumericalError("initial state has zero likelihood")
        self.cell_w, self.cell_gev, self.cell_logz = w, g, z
        self.cell_marg, self.cell_fre = m, f

    def _col_loglik(self, cols) -> float:
        if not self.use_likelihood:
            return 0.0
        sl = (
            self.cell_fre[:, cols] + self.cell_gev[:, cols] - self.cell_marg[:, cols]
        )
        return float(np.nansum(sl))

    def loglik(self) -> float:
        return self._col_loglik(np.arange(self.D))

    def _store_cells(self, cols, parts):
        w, g, z, m, f = parts
        self.cell_w[:, cols] = w
        self.cell_gev[:, cols] = g
        self.cell_logz[:, cols] = z
        self.cell_marg[:, cols] = m
        self.cell_fre[:, cols] = f

    # -- prior pieces ---------------------------------------------------------

    def _a_prior_tilt(self, theta: float, alpha: float) -> float:
        # sum over (l,t) of the tilting part of log f_H: -theta*A + theta^alpha
        if theta == 0.0:
            return 0.0
        return float(
            -theta * np.sum(np.exp(self.log_a)) + self.T * self.L * theta**alpha
        )

    def _margin_prior(self) -> float:
        pri = self.priors
        if self.spec.margins == "constant":
            return (
                _normal_logpdf(self.mu[0], pri.coef_var)
                + _normal_logpdf(self.gamma[0], pri.coef_var)
            )
        return (
            self._quad_mu.logpdf(self.mu, self.beta_mu)
            + self._quad_gamma.logpdf(self.gamma, self.beta_gamma)
            + _normal_logpdf(self.beta_mu, pri.coef_var)
            + _normal_logpdf(self.beta_gamma, pri.coef_var)
            + _halfnormal_logpdf(self.d2_mu, pri.scale_var)
            + _halfnormal_logpdf(self.d2_gamma, pri.scale_var)
            + _halfnormal_logpdf(self.rho_mu, pri.range_var)
            + _halfnormal_logpdf(self.rho_gamma, pri.range_var)
        )

    def _basis_prior(self) -> float:
        pri = self.priors
        if self.spec.basis_family == "gaussian-density":
            return _halfnormal_logpdf(self.tau, pri.tau_var)
        return (
            self._quad_k.logpdf_cols(self.latent)
            + _halfnormal_logpdf(self.d2_k, pri.scale_var)
            + _halfnormal_logpdf(self.rho_k, pri.range_var)
        )

    def log_posterior(self) -> float:
        """Full log posterior density of the current state (up to the fixed
        normalizing constant of the data)."""
        lp = self.loglik()
        lp += float(np.sum(self.ps_ll)) + self._a_prior_tilt(self.theta, self.alpha)
        lp += self._margin_prior() + self._basis_prior()
        lp += _normal_logpdf(self.xi, self.priors.coef_var)
        if self.spec.tilt == "free":
            lp += _halfnormal_logpdf(self.theta, self.priors.theta_sd**2)
        return lp

    # -- MH plumbing ----------------------------------------------------------

    def _decide(self, name: str, log_ratio: float, target: float) -> bool:
        if np.isfinite(log_ratio):
            p_acc = float(min(1.0, np.exp(min(log_ratio, 0.0))))
        else:
            p_acc = 0.0
            self.auto_rejects += 1
        rec = self.scales[name]
        rec.n += 1
        rec.acc += p_acc
        if self.adapting:
            rec.log_scale += (p_acc - target) / max(rec.n, 10) ** 0.6
        return self.rng.uniform() < p_acc

    # -- scalar updates -------------------------------------------------------

    def update_alpha(self):
        rec = self.scales["alpha"]
        cur = self.alpha
        logit = np.log(cur) - np.log1p(-cur)
        prop_logit = logit + rec.scale * self.rng.standard_normal()
        prop = 1.0 / (1.0 + np.exp(-prop_logit))
        if not 0.0 < prop < 1.0:
            self._decide("alpha", -np.inf, self.config.target_accept_scalar)
            return
        table = kernels.log_a_table(prop)
        ps_prop = kernels.ps_logpdf_tab(
            np.exp(self.log_a).ravel(), prop, *table
        ).reshape(self.T, self.L)
        cols = np.arange(self.D, dtype=np.int64)
        ok, total, *parts = self._cells_for(
            cols, self.log_weights, prop, self.theta, self.mu, self.gamma, self.xi
        )
        if not ok or not np.all(np.isfinite(ps_prop)):
            self._decide("alpha", -np.inf, self.config.target_accept_scalar)
            return
        log_ratio = (
            total
            - self._col_loglik(cols)
            + float(np.sum(ps_prop) - np.sum(self.ps_ll))
            + self._a_prior_tilt(self.theta, prop)
            - self._a_prior_tilt(self.theta, cur)
            + np.log(prop * (1.0 - prop))
            - np.log(cur * (1.0 - cur))
        )
        if self._decide("alpha", log_ratio, self.config.target_accept_scalar):
            self.alpha = float(prop)
            self.ps_ll = ps_prop
            self._ps_table = table
            self._store_cells(cols, parts)

    def update_alpha_coupled(self):
        """Joint move of alpha and the coefficient field.

        Mapping A -> A^(alpha/alpha') sends each mixture term A K^(1/alpha)
        to its alpha/alpha' power exactly, so Y is nearly preserved whenever
        one basis dominates a site. The likelihood then barely objects and
        alpha can take much larger steps than the coordinatewise walk allows.
        """
        rec = self.scales["alpha_joint"]
        cur = self.alpha
        logit = np.log(cur) - np.log1p(-cur)
        prop = 1.0 / (1.0 + np.exp(-(logit + rec.scale * self.rng.standard_normal())))
        if not 0.0 < prop < 1.0:
            self._decide("alpha_joint", -np.inf, self.config.target_accept_block)
            return
        r = cur / prop
        cand_log_a = r * self.log_a
        table = kernels.log_a_table(prop)
        ps_prop = kernels.ps_logpdf_tab(
            np.exp(cand_log_a).ravel(), prop, *table
        ).reshape(self.T, self.L)
        if not np.all(np.isfinite(ps_prop)):
            self._decide("alpha_joint", -np.inf, self.config.target_accept_block)
            return
        # evaluate the likelihood under (alpha', A')
        saved_log_a = self.log_a
        self.log_a = cand_log_a
        cols = np.arange(self.D, dtype=np.int64)
        ok, total, *parts = self._cells_for(
            cols, self.log_weights, prop, self.theta, self.mu, self.gamma, self.xi
        )
        self.log_a = saved_log_a
        if not ok:
            self._decide("alpha_joint", -np.inf, self.config.target_accept_block)
            return
        a_cur = np.exp(self.log_a)
        a_prop = np.exp(cand_log_a)
        tilt = 0.0
        if self.theta > 0.0:
            tilt = -self.theta * float(np.sum(a_prop) - np.sum(a_cur)) + self.T * self.L * (
                self.theta**prop - self.theta**cur
            )
        n_coef = self.T * self.L
        log_jac = n_coef * np.log(r) + (r - 1.0) * float(np.sum(self.log_a))
        log_ratio = (
            total
            - self._col_loglik(cols)
            + float(np.sum(ps_prop) - np.sum(self.ps_ll))
            + tilt
            + np.log(prop * (1.0 - prop))
            - np.log(cur * (1.0 - cur))
            + log_jac
        )
        if self._decide("alpha_joint", log_ratio, self.config.target_accept_block):
            self.alpha = float(prop)
            self.log_a = cand_log_a
            self.ps_ll = ps_prop
            self._ps_table = table
            self._store_cells(cols, parts)

    def _try_theta(self, name: str, prop: float, extra_jac: float):
        cur = self.theta
        cols = np.arange(self.D, dtype=np.int64)
        ok, total, *parts = self._cells_for(
            cols, self.log_weights, self.alpha, prop, self.mu, self.gamma, self.xi
        )
        if not ok:
            self._decide(name, -np.inf, self.config.target_accept_scalar)
            return
        log_ratio = (
            total
            - self._col_loglik(cols)
            + self._a_prior_tilt(prop, self.alpha)
            - self._a_prior_tilt(cur, self.alpha)
            + _halfnormal_logpdf(prop, self.priors.theta_sd**2)
            - _halfnormal_logpdf(cur, self.priors.theta_sd**2)
            + extra_jac
        )
        if self._decide(name, log_ratio, self.config.target_accept_scalar):
            self.theta = prop
            self._store_cells(cols, parts)

    def update_theta(self):
        """Two complementary walks on the tilt: a reflected linear-scale step
        that crosses the near-zero region in one move, and a log-scale step
        for relative exploration away from zero."""
        if self.spec.tilt != "free":
            return
        prop = abs(self.theta + self.scales["theta"].scale * self.rng.standard_normal())
        self._try_theta("theta", prop, 0.0)
        rec = self.scales["theta_log"]
        prop = float(np.exp(np.log(self.theta) + rec.scale * self.rng.standard_normal()))
        self._try_theta("theta_log", prop, np.log(prop) - np.log(self.theta))

    def update_tau(self):
        if self.spec.basis_family != "gaussian-density":
            return
        rec = self.scales["tau"]
        cur = self.tau
        prop = float(np.exp(np.log(cur) + rec.scale * self.rng.standard_normal()))
        logw = eval_gaussian_basis(
            self.coords, GaussianDensityBasisSpec(self.spec.knots, prop)
        ).log_weights
        cols = np.arange(self.D, dtype=np.int64)
        ok, total, *parts = self._cells_for(
            cols, logw, self.alpha, self.theta, self.mu, self.gamma, self.xi
        )
        if not ok:
            self._decide("tau", -np.inf, self.config.target_accept_scalar)
            return
        log_ratio = (
            total
            - self._col_loglik(cols)
            + _halfnormal_logpdf(prop, self.priors.tau_var)
            - _halfnormal_logpdf(cur, self.priors.tau_var)
            + np.log(prop)
            - np.log(cur)
        )
        if self._decide("tau", log_ratio, self.config.target_accept_scalar):
            self.tau = prop
            self.log_weights = logw
            self._store_cells(cols, parts)

    def _update_margin_like_scalar(self, name: str, mu, gamma, xi, extra_prior: float):
        """Shared accept path for xi and the constant-margin location/scale."""
        cols = np.arange(self.D, dtype=np.int64)
        ok, total, *parts = self._cells_for(
            cols, self.log_weights, self.alpha, self.theta, mu, gamma, xi
        )
        if not ok:
            self._decide(name, -np.inf, self.config.target_accept_scalar)
            return False
        log_ratio = total - self._col_loglik(cols) + extra_prior
        if self._decide(name, log_ratio, self.config.target_accept_scalar):
            self.mu, self.gamma, self.xi = mu, gamma, xi
            self._store_cells(cols, parts)
            return True
        return False

    def update_xi(self):
        prop = self.xi + self.scales["xi"].scale * self.rng.standard_normal()
        dp = _normal_logpdf(prop, self.priors.coef_var) - _normal_logpdf(
            self.xi, self.priors.coef_var
        )
        self._update_margin_like_scalar("xi", self.mu, self.gamma, float(prop), dp)

    def update_const_margin(self, which: str):
        if self.spec.margins != "constant":
            return
        rec = self.scales[which]
        step = rec.scale * self.rng.standard_normal()
        if which == "mu":
            mu = self.mu + step
            gamma = self.gamma
            dp = _normal_logpdf(mu[0], self.priors.coef_var) - _normal_logpdf(
                self.mu[0], self.priors.coef_var
            )
        else:
            mu = self.mu
            gamma = self.gamma + step
            dp = _normal_logpdf(gamma[0], self.priors.coef_var) - _normal_logpdf(
                self.gamma[0], self.priors.coef_var
            )
        self._update_margin_like_scalar(which, mu, gamma, self.xi, dp)

    # -- basis coefficients ----------------------------------------------------

    def update_A(self):
        """Log-scale walks on A, vectorized over years (their targets
        factorize, so the joint update equals independent per-year ones)."""
        target = self.config.target_accept_scalar
        u_tab, dla_tab = self._ps_table
        for l in range(self.L):
            rec = self.scales[f"A_{l}"]
            prop_log = self.log_a[:, l] + rec.scale * self.rng.standard_normal(self.T)
            cand_log_a = self.log_a.copy()
            cand_log_a[:, l] = prop_log
            ps_prop = kernels.ps_logpdf_tab(
                np.exp(prop_log), self.alpha, u_tab, dla_tab
            )
            d_prior = (
                ps_prop
                - self.ps_ll[:, l]
                - self.theta * (np.exp(prop_log) - np.exp(self.log_a[:, l]))
                + (prop_log - self.log_a[:, l])
            )
            if self.use_likelihood:
                logy = kernels.log_mix_scale(cand_log_a, self.log_weights, self.alpha)
                fre = np.full((self.T, self.D), np.nan)
                flat = self.obs.ravel()
                fre.ravel()[flat] = kernels.frechet_logpdf_cells(
                    self.cell_logz.ravel()[flat], logy.ravel()[flat], self.alpha
                )
                d_lik = np.nansum(fre - self.cell_fre, axis=1)
            else:
                fre = None
                d_lik = np.zeros(self.T)
            log_ratio = d_prior + d_lik
            with np.errstate(over="ignore"):
                p_acc = np.where(
                    np.isfinite(log_ratio), np.minimum(1.0, np.exp(log_ratio)), 0.0
                )
            accept = self.rng.uniform(size=self.T) < p_acc
            rec.n += 1
            rec.acc += float(np.mean(p_acc))
            if self.adapting:
                rec.log_scale += (float(np.mean(p_acc)) - target) / max(rec.n, 10) ** 0.6
            if np.any(accept):
                self.log_a[accept, l] = prop_log[accept]
                self.ps_ll[accept, l] = ps_prop[accept]
                if fre is not None:
                    self.cell_fre[accept] = fre[accept]

    # -- whitened cluster blocks -----------------------------------------------

    def update_margin_field_block(self, which: str, j: int):
        if self.spec.margins != "gp":
            return
        cols = self.clusters[j]
        name = f"{which}_block_{j}"
        rec = self.scales[name]
        chol_blocks = getattr(self, f"_chol_{which}_blocks")
        step = rec.scale * (chol_blocks[j] @ self.rng.standard_normal(cols.shape[0]))
        mu, gamma = self.mu, self.gamma
        if which == "mu":
            mu = self.mu.copy()
            mu[cols] += step
            d_prior = self._quad_mu.logpdf(mu, self.beta_mu) - self._quad_mu.logpdf(
                self.mu, self.beta_mu
            )
        else:
            gamma = self.gamma.copy()
            gamma[cols] += step
            d_prior = self._quad_gamma.logpdf(
                gamma, self.beta_gamma
            ) - self._quad_gamma.logpdf(self.gamma, self.beta_gamma)
        ok, total, *parts = self._cells_for(
            cols, self.log_weights, self.alpha, self.theta, mu, gamma, self.xi
        )
        if not ok:
            self._decide(name, -np.inf, self.config.target_accept_block)
            return
        log_ratio = total - self._col_loglik(cols) + d_prior
        if self._decide(name, log_ratio, self.config.target_accept_block):
            self.mu, self.gamma = mu, gamma
            self._store_cells(cols, parts)

    def update_basis_block(self, j: int, joint: bool | None = None):
        """Whitened block update of the basis latents on cluster j.

        Proposes every latent column on the cluster's whitened scale and
        renormalizes the weights. By default each of the L-1 columns gets
        its own accept/reject (configurable to a single joint decision,
        which mixes distinctly worse through the sum-to-one coupling).
        """
        if self.spec.basis_family != "log-gp":
            return
        cols = self.clusters[j]
        name = f"basis_block_{j}"
        rec = self.scales[name]
        chol_j = self._chol_k_blocks[j]
        joint = self.config.basis_joint_accept if joint is None else joint
        blocks = [np.arange(self.L - 1)] if joint else [np.array([l]) for l in range(self.L - 1)]
        p_accs = []
        for ls in blocks:
            eps = self.rng.standard_normal((cols.shape[0], ls.shape[0]))
            cand_latent = self.latent.copy()
            cand_latent[np.ix_(cols, ls)] += rec.scale * (chol_j @ eps)
            logw = self.log_weights.copy()
            logw[cols] = weights_from_latent(cand_latent[cols])[0]
            d_prior = self._quad_k.logpdf_cols(
                cand_latent[:, ls]
            ) - self._quad_k.logpdf_cols(self.latent[:, ls])
            ok, total, *parts = self._cells_for(
                cols, logw, self.alpha, self.theta, self.mu, self.gamma, self.xi
            )
            if not ok:
                p_accs.append(0.0)
                self.auto_rejects += 1
                continue
            log_ratio = total - self._col_loglik(cols) + d_prior
            p_acc = float(min(1.0, np.exp(min(log_ratio, 0.0)))) if np.isfinite(log_ratio) else 0.0
            p_accs.append(p_acc)
            if self.rng.uniform() < p_acc:
                self.latent = cand_latent
                self.log_weights = logw
                self._store_cells(cols, parts)
        rec.n += 1
        rec.acc += float(np.mean(p_accs))
        if self.adapting:
            rec.log_scale += (
                float(np.mean(p_accs)) - self.config.target_accept_block
            ) / max(rec.n, 10) ** 0.6

    def update_basis_rescale(self):
        """Joint log-scale move of (d2_k, latent amplitude).

        Scaling the covariance by e^s and the latents by e^(s/2) leaves the
        whitened coordinates (and hence the Gaussian quadratic form) fixed,
        so the move hops along the variance-amplitude ridge that
        coordinatewise walks traverse slowly. The prior determinant terms
        cancel against the transform Jacobian except for the log-scale
        factor e^s.
        """
        if self.spec.basis_family != "log-gp":
            return
        rec = self.scales["k_rescale"]
        s = rec.scale * self.rng.standard_normal()
        d2_prop = self.d2_k * np.exp(s)
        cand_latent = self.latent * np.exp(0.5 * s)
        logw = weights_from_latent(cand_latent)[0]
        cols = np.arange(self.D, dtype=np.int64)
        ok, total, *parts = self._cells_for(
            cols, logw, self.alpha, self.theta, self.mu, self.gamma, self.xi
        )
        if not ok:
            self._decide("k_rescale", -np.inf, self.config.target_accept_scalar)
            return
        log_ratio = (
            total
            - self._col_loglik(cols)
            + _halfnormal_logpdf(d2_prop, self.priors.scale_var)
            - _halfnormal_logpdf(self.d2_k, self.priors.scale_var)
            + s
        )
        if self._decide("k_rescale", log_ratio, self.config.target_accept_scalar):
            self.d2_k = float(d2_prop)
            self.latent = cand_latent
            self.log_weights = logw
            self._store_cells(cols, parts)
            self._refresh_gp_factors("k")

    # -- hyperparameters ---------------------------------------------------------

    def update_beta(self, which: str):
        if self.spec.margins != "gp":
            return
        name = f"beta_{which}"
        rec = self.scales[name]
        cur = getattr(self, name)
        prop = cur + rec.scale * self.rng.standard_normal()
        fieldvals = self.mu if which == "mu" else self.gamma
        quad = getattr(self, f"_quad_{which}")
        log_ratio = (
            quad.logpdf(fieldvals, prop)
            - quad.logpdf(fieldvals, cur)
            + _normal_logpdf(prop, self.priors.coef_var)
            - _normal_logpdf(cur, self.priors.coef_var)
        )
        if self._decide(name, log_ratio, self.config.target_accept_scalar):
            setattr(self, name, float(prop))

    def update_cov_hyper(self, which: str, par: str):
        """Log-scale walk on a GP variance or range hyperparameter."""
        if which in ("mu", "gamma") and self.spec.margins != "gp":
            return
        if which == "k" and self.spec.basis_family != "log-gp":
            return
        name = f"{par}_{which}"
        rec = self.scales[name]
        cur = getattr(self, name)
        prop = float(np.exp(np.log(cur) + rec.scale * self.rng.standard_normal()))
        d2 = prop if par == "d2" else getattr(self, f"d2_{which}")
        rho = prop if par == "rho" else getattr(self, f"rho_{which}")
        try:
            cov = exp_cov_matrix(self.coords, self.coords, ExpCovParams(d2, rho))
            full = chol_with_jitter(cov, d2)
        except NumericalError:
            self._decide(name, -np.inf, self.config.target_accept_scalar)
            return
        cand_quad = _GpQuadForm(full)
        pri_var = self.priors.scale_var if par == "d2" else self.priors.range_var
        cur_quad = getattr(self, f"_quad_{which}")
        if which == "k":
            d_prior = cand_quad.logpdf_cols(self.latent) - cur_quad.logpdf_cols(
                self.latent
            )
        else:
            fieldvals = self.mu if which == "mu" else self.gamma
            beta = getattr(self, f"beta_{which}")
            d_prior = cand_quad.logpdf(fieldvals, beta) - cur_quad.logpdf(
                fieldvals, beta
            )
        log_ratio = (
            d_prior
            + _halfnormal_logpdf(prop, pri_var)
            - _halfnormal_logpdf(cur, pri_var)
            + np.log(prop)
            - np.log(cur)
        )
        if self._decide(name, log_ratio, self.config.target_accept_scalar):
            setattr(self, name, prop)
            self._refresh_gp_factors(which)

    # -- imputation ---------------------------------------------------------------

    def impute_missing(self):
        """Redraw every missing cell from its conditional law given the
        current state: nugget times Y, then the data-scale transform."""
        if self.missing_cells.shape[0] == 0:
            return
        t_idx = self.missing_cells[:, 0]
        s_idx = self.missing_cells[:, 1]
        logy = kernels.log_mix_scale(self.log_a, self.log_weights, self.alpha)
        log_eps = -self.alpha * np.log(
            self.rng.exponential(size=t_idx.shape[0])
        )
        logz = log_eps + logy[t_idx, s_idx]
        w = kernels.marginal_nlog_cdf_cells(
            logz, s_idx, self.log_weights, self.alpha, self.theta
        )
        self.values[t_idx, s_idx] = kernels.gev_quantile_from_nlog_cells(
            w, self.mu[s_idx], np.exp(self.gamma[s_idx]), self.xi
        )

    # -- sweep / run ----------------------------------------------------------------

    def sweep(self):
        self.sweep_count += 1
        self.update_alpha()
        self.update_alpha_coupled()
        self.update_theta()
        self.update_tau()
        self.update_const_margin("mu")
        self.update_const_margin("gamma")
        self.update_xi()
        for _ in range(self.config.n_inner_updates):
            self.update_A()
        for j in range(len(self.clusters)):
            self.update_margin_field_block("mu", j)
            self.update_margin_field_block("gamma", j)
        for _ in range(self.config.n_inner_updates):
            for j in range(len(self.clusters)):
                self.update_basis_block(j)
            self.update_basis_rescale()
        self.update_beta("mu")
        self.update_beta("gamma")
        for which in ("mu", "gamma", "k"):
            self.update_cov_hyper(which, "d2")
            self.update_cov_hyper(which, "rho")
        self.impute_missing()

    def snapshot(self) -> ChainState:
        return ChainState(
            alpha=self.alpha,
            theta=self.theta,
            log_a=self.log_a.copy(),
            latent=None if self.latent is None else self.latent.copy(),
            tau=self.tau,
            mu=self.mu.copy(),
            gamma=self.gamma.copy(),
            xi=self.xi,
            beta_mu=self.beta_mu,
            beta_gamma=self.beta_gamma,
            d2_mu=self.d2_mu,
            rho_mu=self.rho_mu,
            d2_gamma=self.d2_gamma,
            rho_gamma=self.rho_gamma,
            d2_k=self.d2_k,
            rho_k=self.rho_k,
            values=self.values.copy(),
            proposal_log_scales={k: v.log_scale for k, v in self.scales.items()},
        )

    def run(self) -> ChainOutput:
        cfg = self.config
        t0 = time.perf_counter()
        n_kept = (cfg.n_iter - cfg.burn_in) // cfg.thin
        scalars: dict[str, list] = {name: [] for name in self._scalar_names()}
        a_draws = np.empty((n_kept, self.T, self.L))
        latent_draws = (
            np.empty((n_kept, self.D, self.L - 1))
            if self.spec.basis_family == "log-gp"
            else None
        )
        mu_draws = np.empty((n_kept, self.D))
        gamma_draws = np.empty((n_kept, self.D))
        imputed = np.empty((n_kept, self.missing_cells.shape[0]))

        kept = 0
        for it in range(1, cfg.n_iter + 1):
            self.adapting = cfg.adapt and it <= cfg.burn_in
            self.sweep()
            if it > cfg.burn_in and (it - cfg.burn_in) % cfg.thin == 0 and kept < n_kept:
                for name, val in self._scalar_values().items():
                    scalars[name].append(val)
                a_draws[kept] = np.exp(self.log_a)
                if latent_draws is not None:
                    latent_draws[kept] = self.latent
                mu_draws[kept] = self.mu
                gamma_draws[kept] = self.gamma
                if self.missing_cells.shape[0]:
                    imputed[kept] = self.values[
                        self.missing_cells[:, 0], self.missing_cells[:, 1]
                    ]
                kept += 1

        scalars_np = {k: np.array(v) for k, v in scalars.items()}
        ess = {
            k: effective_sample_size(v)
            for k, v in scalars_np.items()
            if k != "log_post"
        }
        acceptance = {k: v.rate() for k, v in self.scales.items() if v.n > 0}
        return ChainOutput(
            spec=self.spec,
            config=cfg,
            scalars=scalars_np,
            a_draws=a_draws,
            latent_draws=latent_draws,
            mu_draws=mu_draws,
            gamma_draws=gamma_draws,
            imputed_draws=imputed,
            missing_cells=self.missing_cells.copy(),
            acceptance=acceptance,
            ess=ess,
            wallclock_s=time.perf_counter() - t0,
            final_state=self.snapshot(),
            coords=self.coords,
            site_ids=[s.id for s in self.data.sites],
            years=self.data.years.copy(),
        )

    def _scalar_names(self) -> list[str]:
        names = ["alpha"]
        if self.spec.tilt == "free":
            names.append("theta")
        if self.spec.basis_family == "gaussian-density":
            names.append("tau")
        else:
            names += ["d2_k", "rho_k"]
        names.append("xi")
        if self.spec.margins == "constant":
            names += ["mu", "gamma"]
        else:
            names += ["beta_mu", "beta_gamma", "d2_mu", "rho_mu", "d2_gamma", "rho_gamma"]
        names.append("log_post")
        return names

    def _scalar_values(self) -> dict[str, float]:
        out = {"alpha": self.alpha}
        if self.spec.tilt == "free":
            out["theta"] = self.theta
        if self.spec.basis_family == "gaussian-density":
            out["tau"] = self.tau
        else:
            out["d2_k"] = self.d2_k
            out["rho_k"] = self.rho_k
        out["xi"] = self.xi
        if self.spec.margins == "constant":
            out["mu"] = float(self.mu[0])
            out["gamma"] = float(self.gamma[0])
        else:
            out["beta_mu"] = self.beta_mu
            out["beta_gamma"] = self.beta_gamma
            out["d2_mu"] = self.d2_mu
            out["rho_mu"] = self.rho_mu
            out["d2_gamma"] = self.d2_gamma
            out["rho_gamma"] = self.rho_gamma
        out["log_post"] = self.log_posterior()
        return out


def run_chain(
    data: Dataset,
    spec: ModelSpec,
    priors: Priors | None = None,
    config: McmcConfig | None = None,
    use_likelihood: bool = True,
) -> ChainOutput:
    """Run one MCMC chain; deterministic given (seed, config, data)."""
    priors = priors or Priors()
    config = config or McmcConfig()
    rng = np.random.default_rng(config.seed)
    sampler = Sampler(data, spec, priors, config, rng, use_likelihood=use_likelihood)
    return sampler.run()


def run_chains(
    data: Dataset,
    spec: ModelSpec,
    priors: Priors | None = None,
    config: McmcConfig | None = None,
) -> list[ChainOutput]:
    """Run config.n_chains chains with seeds derived from the master seed."""
    config = config or McmcConfig()
    seeds = np.random.SeedSequence(config.seed).spawn(config.n_chains)
    outs = []
    for k, ss in enumerate(seeds):
        cfg = replace(config, seed=int(ss.generate_state(1)[0] % 2**31))
        outs.append(run_chain(data, spec, priors, cfg))
    return outs


def log_posterior(
    state: ChainState, data: Dataset, spec: ModelSpec, priors: Priors | None = None
) -> float:
    """Log posterior density of an arbitrary state snapshot.

    Recomputes everything from scratch (no caches); returns -inf for states
    outside the support.
    """
    priors = (priors or Priors()).resolve(data.coords)
    if not (0.0 < state.alpha < 1.0) or state.theta < 0.0:
        return -np.inf
    if spec.basis_family == "log-gp":
        log_weights = weights_from_latent(state.latent)[0]
    else:
        if not state.tau > 0.0:
            return -np.inf
        log_weights = eval_gaussian_basis(
            data.coords, GaussianDensityBasisSpec(spec.knots, state.tau)
        ).log_weights

    cells = loglik_cells(
        state.values,
        data.observed,
        state.log_a,
        log_weights,
        state.alpha,
        state.theta,
        state.mu,
        np.exp(state.gamma),
        state.xi,
    )
    obs = data.observed
    if np.any(obs & ~np.isfinite(cells)):
        return -np.inf
    lp = float(np.sum(cells[obs]))

    a_flat = np.exp(state.log_a).ravel()
    lp += float(np.sum(kernels.ps_logpdf(a_flat, state.alpha)))
    lp += -state.theta * float(np.sum(a_flat)) + a_flat.size * state.theta**state.alpha

    if spec.margins == "constant":
        lp += _normal_logpdf(state.mu[0], priors.coef_var)
        lp += _normal_logpdf(state.gamma[0], priors.coef_var)
    else:
        for fieldvals, beta, d2, rho in (
            (state.mu, state.beta_mu, state.d2_mu, state.rho_mu),
            (state.gamma, state.beta_gamma, state.d2_gamma, state.rho_gamma),
        ):
            cov = exp_cov_matrix(data.coords, data.coords, ExpCovParams(d2, rho))
            lp += _gp_logpdf(fieldvals, beta, chol_with_jitter(cov, d2))
            lp += _normal_logpdf(beta, priors.coef_var)
            lp += _halfnormal_logpdf(d2, priors.scale_var)
            lp += _halfnormal_logpdf(rho, priors.range_var)
    if spec.basis_family == "log-gp":
        cov = exp_cov_matrix(
            data.coords, data.coords, ExpCovParams(state.d2_k, state.rho_k)
        )
        chol = chol_with_jitter(cov, state.d2_k)
        for l in range(spec.n_basis - 1):
            lp += _gp_logpdf(state.latent[:, l], 0.0, chol)
        lp += _halfnormal_logpdf(state.d2_k, priors.scale_var)
        lp += _halfnormal_logpdf(state.rho_k, priors.range_var)
    else:
        lp += _halfnormal_logpdf(state.tau, priors.tau_var)
    lp += _normal_logpdf(state.xi, priors.coef_var)
    if spec.tilt == "free":
        lp += _halfnormal_logpdf(state.theta, priors.theta_sd**2)
    return lp


def model_from_state(state: ChainState, data: Dataset, spec: ModelSpec) -> MaxIdModel:
    """Assemble a generative model from a chain state (e.g. for simulation)."""
    if spec.basis_family == "log-gp":
        logw, w = weights_from_latent(state.latent)
        basis = BasisField(
            coords=data.coords,
            weights=w,
            log_weights=logw,
            latent=state.latent,
            site_ids=[s.id for s in data.sites],
        )
    else:
        basis = eval_gaussian_basis(
            data.coords, GaussianDensityBasisSpec(spec.knots, state.tau)
        )
        basis.site_ids = [s.id for s in data.sites]
    return MaxIdModel(
        dep=HougaardParams(state.alpha, state.theta),
        basis=basis,
        mu=state.mu,
        sigma=np.exp(state.gamma),
        xi=np.full(data.n_sites, state.xi),
    )
