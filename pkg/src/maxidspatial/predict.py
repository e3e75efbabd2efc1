"""Posterior predictive machinery: Gaussian conditioning of latent fields to
new sites, predictive field draws, return-level surfaces, holdout log
scores, and basis-factor ranking.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .basis import (
    ExpCovParams,
    GaussianDensityBasisSpec,
    chol_with_jitter,
    eval_gaussian_basis,
    exp_cov_matrix,
)
from .errors import ConfigError, DomainError
from .mcmc import ChainOutput
from .process import Dataset

__all__ = [
    "PredictiveDraw",
    "PredictiveField",
    "conditional_mvn",
    "predict_at",
    "return_level",
    "log_score",
    "rank_factors",
]


@dataclass(frozen=True)
class PredictiveDraw:
    """One posterior predictive value at a new site and year."""

    site_id: str
    year: int
    iteration: int
    y_latent: float
    z_latent: float
    z_data: float


@dataclass
class PredictiveField:
    """Posterior predictive draws at new sites, (n_draws, T, n_new)."""

    site_ids: list
    coords: np.ndarray
    years: np.ndarray
    y_latent: np.ndarray
    z_latent: np.ndarray
    z_data: np.ndarray

    def iter_draws(self):
        n_m, n_t, n_s = self.z_data.shape
        for m in range(n_m):
            for t in range(n_t):
                for i in range(n_s):
                    yield PredictiveDraw(
                        self.site_ids[i],
                        int(self.years[t]),
                        m,
                        float(self.y_latent[m, t, i]),
                        float(self.z_latent[m, t, i]),
                        float(self.z_data[m, t, i]),
                    )

    def summarize(self) -> dict:
        flat = self.z_data.reshape(-1, self.z_data.shape[2])
        return {
            "mean": flat.mean(axis=0),
            "sd": flat.std(axis=0, ddof=1),
            "q05": np.quantile(flat, 0.05, axis=0),
            "q95": np.quantile(flat, 0.95, axis=0),
        }


def conditional_mvn(mean1, mean2, s11, s12, s22, w2):
    """Gaussian conditioning: the law of block 1 given block 2 = w2.

    Returns (conditional mean, conditional covariance). s22 must be
    invertible after jitter.
    """
    mean1 = np.atleast_1d(np.asarray(mean1, dtype=np.float64))
    mean2 = np.atleast_1d(np.asarray(mean2, dtype=np.float64))
    s11 = np.atleast_2d(np.asarray(s11, dtype=np.float64))
    s12 = np.atleast_2d(np.asarray(s12, dtype=np.float64))
    s22 = np.atleast_2d(np.asarray(s22, dtype=np.float64))
    w2 = np.atleast_1d(np.asarray(w2, dtype=np.float64))
    chol = chol_with_jitter(s22, float(np.max(np.diag(s22))))
    from scipy.linalg import cho_solve

    solve = lambda b: cho_solve((chol, True), b)  # noqa: E731
    mean = mean1 + s12 @ solve(w2 - mean2)
    cov = s11 - s12 @ solve(s12.T)
    return mean, cov


def _krige_draw(train_vals, train_coords, new_coords, mean, cov_p, rng):
    """One conditional-simulation draw of a GP at new sites."""
    s22 = exp_cov_matrix(train_coords, train_coords, cov_p)
    s12 = exp_cov_matrix(new_coords, train_coords, cov_p)
    s11 = exp_cov_matrix(new_coords, new_coords, cov_p)
    m, c = conditional_mvn(
        np.full(new_coords.shape[0], mean),
        np.full(train_coords.shape[0], mean),
        s11,
        s12,
        s22,
        train_vals,
    )
    c = 0.5 * (c + c.T)
    eigval, eigvec = np.linalg.eigh(c)
    root = eigvec * np.sqrt(np.clip(eigval, 0.0, None))
    return m + root @ rng.standard_normal(new_coords.shape[0])


def _margins_at(chain: ChainOutput, m: int, new_coords, rng):
    """GEV margins at the new sites for posterior draw m."""
    sc = chain.scalars
    if chain.spec.margins == "constant":
        n = new_coords.shape[0]
        mu = np.full(n, sc["mu"][m])
        gamma = np.full(n, sc["gamma"][m])
    else:
        mu = _krige_draw(
            chain.mu_draws[m],
            chain.coords,
            new_coords,
            sc["beta_mu"][m],
            ExpCovParams(sc["d2_mu"][m], sc["rho_mu"][m]),
            rng,
        )
        gamma = _krige_draw(
            chain.gamma_draws[m],
            chain.coords,
            new_coords,
            sc["beta_gamma"][m],
            ExpCovParams(sc["d2_gamma"][m], sc["rho_gamma"][m]),
            rng,
        )
    return mu, gamma, float(sc["xi"][m])


def _basis_at(chain: ChainOutput, m: int, new_coords, rng):
    """Log basis weights at the new sites for posterior draw m.

    For the log-GP family each latent is conditionally simulated from its
    Gaussian law given the training-site latents; the pinned last basis
    stays at zero on the latent scale before the rowwise normalization.
    """
    sc = chain.scalars
    if chain.spec.basis_family == "gaussian-density":
        return eval_gaussian_basis(
            new_coords, GaussianDensityBasisSpec(chain.spec.knots, sc["tau"][m])
        ).log_weights
    cov_p = ExpCovParams(sc["d2_k"][m], sc["rho_k"][m])
    n = new_coords.shape[0]
    lat = np.empty((n, chain.spec.n_basis - 1))
    for l in range(chain.spec.n_basis - 1):
        lat[:, l] = _krige_draw(
            chain.latent_draws[m][:, l], chain.coords, new_coords, 0.0, cov_p, rng
        )
    logits = np.concatenate([lat, np.zeros((n, 1))], axis=1)
    mx = logits.max(axis=1, keepdims=True)
    return logits - (mx + np.log(np.exp(logits - mx).sum(axis=1, keepdims=True)))


def predict_at(
    new_sites,
    chain: ChainOutput,
    data: Dataset,
    rng: np.random.Generator,
    draw_stride: int = 1,
) -> PredictiveField:
    """Posterior predictive draws of the field at new sites, per year.

    For each retained iteration: extend the basis latents and GEV margins
    to the new sites by conditional simulation, form Y from that draw's
    coefficients, draw the latent value from its Frechet conditional, and
    remargin to the data scale.
    """
    new_coords, site_ids = _site_args(new_sites)
    if data.n_sites != chain.coords.shape[0] or not np.allclose(
        data.coords, chain.coords
    ):
        raise ConfigError("chain and data site geometries do not match")
    picks = np.arange(0, chain.n_kept, draw_stride)
    n_m = picks.shape[0]
    n_t = chain.years.shape[0]
    n_s = new_coords.shape[0]
    y_lat = np.empty((n_m, n_t, n_s))
    z_lat = np.empty((n_m, n_t, n_s))
    z_dat = np.empty((n_m, n_t, n_s))
    sc = chain.scalars
    for k, m in enumerate(picks):
        alpha = float(sc["alpha"][m])
        theta = float(sc["theta"][m]) if "theta" in sc else 0.0
        logk = _basis_at(chain, m, new_coords, rng)
        mu, gamma, xi = _margins_at(chain, m, new_coords, rng)
        log_y = kernels.log_mix_scale(np.log(chain.a_draws[m]), logk, alpha)
        # latent value given Y is Frechet(Y, 1/alpha)
        log_eps = -alpha * np.log(rng.exponential(size=(n_t, n_s)))
        log_z = log_y + log_eps
        w = kernels.marginal_nlog_cdf_cells(
            log_z.ravel(),
            np.tile(np.arange(n_s, dtype=np.int64), n_t),
            logk,
            alpha,
            theta,
        )
        z_tilde = kernels.gev_quantile_from_nlog_cells(
            w,
            np.tile(mu, n_t),
            np.tile(np.exp(gamma), n_t),
            xi,
        ).reshape(n_t, n_s)
        y_lat[k] = np.exp(log_y)
        z_lat[k] = np.exp(log_z)
        z_dat[k] = z_tilde
    return PredictiveField(
        site_ids=site_ids,
        coords=new_coords,
        years=chain.years.copy(),
        y_latent=y_lat,
        z_latent=z_lat,
        z_data=z_dat,
    )


def return_level(
    chain: ChainOutput,
    new_sites,
    p: float,
    rng: np.random.Generator,
    draw_stride: int = 1,
):
    """Posterior mean and SD of the p-quantile of the annual maximum at each
    new site (e.g. p = 0.99 for the 100-year level)."""
    if not 0.0 < p < 1.0:
        raise DomainError("p must lie strictly in (0,1)")
    new_coords, site_ids = _site_args(new_sites)
    picks = np.arange(0, chain.n_kept, draw_stride)
    n_s = new_coords.shape[0]
    levels = np.empty((picks.shape[0], n_s))
    w = np.full(n_s, -np.log(p))
    for k, m in enumerate(picks):
        mu, gamma, xi = _margins_at(chain, m, new_coords, rng)
        levels[k] = kernels.gev_quantile_from_nlog_cells(w, mu, np.exp(gamma), xi)
    return {
        "site_ids": site_ids,
        "mean": levels.mean(axis=0),
        "sd": levels.std(axis=0, ddof=1) if picks.shape[0] > 1 else np.zeros(n_s),
        "draws": levels,
    }


def log_score(
    holdout: Dataset,
    chain: ChainOutput,
    rng: np.random.Generator,
    draw_stride: int = 1,
) -> tuple[float, float]:
    """Out-of-sample log score: log of the posterior-averaged joint density
    of the holdout data, one latent simulation per retained draw.

    Returns (score, Monte Carlo SE). The per-draw joint density conditions
    on that draw's coefficients and the latents kriged to the holdout
    sites, under which the holdout cells are independent.
    """
    new_coords = holdout.coords
    train_ids = {tuple(c) for c in np.round(chain.coords, 12).tolist()}
    if any(tuple(c) in train_ids for c in np.round(new_coords, 12).tolist()):
        raise ConfigError("holdout sites must be disjoint from training sites")
    picks = np.arange(0, chain.n_kept, draw_stride)
    obs = holdout.observed
    flat = obs.ravel()
    n_t, n_s = holdout.values.shape
    sidx = np.tile(np.arange(n_s, dtype=np.int64), n_t)[flat]
    vals = holdout.values.ravel()[flat]
    sc = chain.scalars
    lls = np.empty(picks.shape[0])
    for k, m in enumerate(picks):
        alpha = float(sc["alpha"][m])
        theta = float(sc["theta"][m]) if "theta" in sc else 0.0
        logk = _basis_at(chain, m, new_coords, rng)
        mu, gamma, xi = _margins_at(chain, m, new_coords, rng)
        gev_ll = kernels.gev_logpdf_cells(vals, mu[sidx], np.exp(gamma)[sidx], xi)
        if np.any(~np.isfinite(gev_ll)):
            lls[k] = -np.inf
            continue
        w = kernels.gev_nlog_cdf_cells(vals, mu[sidx], np.exp(gamma)[sidx], xi)
        logz, marg_ll = kernels.invert_cells(
            w, sidx, logk, alpha, theta, np.full(w.shape, np.nan)
        )
        logy = kernels.log_mix_scale(np.log(chain.a_draws[m]), logk, alpha)
        fre_ll = kernels.frechet_logpdf_cells(logz, logy.ravel()[flat], alpha)
        lls[k] = float(np.sum(fre_ll + gev_ll - marg_ll))
    mx = np.max(lls)
    if not np.isfinite(mx):
        return -np.inf, np.inf
    r = np.exp(lls - mx)
    score = float(mx + np.log(np.mean(r)))
    se = float(np.std(r, ddof=1) / (np.mean(r) * np.sqrt(r.shape[0])))
    return score, se


def rank_factors(chain: ChainOutput) -> list[tuple[int, float]]:
    """Rank basis functions by the posterior year-to-year variance of their
    coefficients; returns (basis index, variance share), shares sum to one."""
    if chain.spec.basis_family != "log-gp":
        raise ConfigError("factor ranking applies to the log-GP basis family")
    # variance across years, averaged over posterior draws
    v = chain.a_draws.var(axis=1, ddof=1).mean(axis=0)
    shares = v / v.sum()
    order = np.argsort(-shares)
    return [(int(l), float(shares[l])) for l in order]


def _site_args(sites):
    if isinstance(sites, np.ndarray):
        coords = np.atleast_2d(np.asarray(sites, dtype=np.float64))
        return coords, [f"new{i:04d}" for i in range(coords.shape[0])]
    coords = np.array([s.coords for s in sites], dtype=np.float64)
    return coords, [s.id for s in sites]
