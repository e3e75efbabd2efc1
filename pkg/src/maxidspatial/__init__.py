"""Hierarchical max-infinitely divisible spatial processes.

Simulation, exact distribution evaluation, Bayesian MCMC fitting, spatial
prediction, and tail-dependence diagnostics for annual-maxima fields built
from tilted-stable coefficients and spatial basis functions.
"""
from .basis import (
    BasisField,
    ExpCovParams,
    GaussianDensityBasisSpec,
    Site,
    eval_gaussian_basis,
    exp_cov_matrix,
    latent_from_weights,
    sample_log_gp_basis,
    unwhiten,
    weights_from_latent,
    whiten,
)
from .dependence import (
    ChiCurve,
    chi_u_analytic,
    chi_u_montecarlo,
    chibar_u_analytic,
    empirical_chi,
    extremal_coefficient,
)
from .distributions import (
    GevParams,
    HougaardParams,
    StableParams,
    frechet_cdf,
    frechet_logpdf,
    gev_cdf,
    gev_density,
    gev_quantile,
    hougaard_density,
    hougaard_sample,
    hougaard_sample_info,
    laplace_hougaard,
    ps_density,
    ps_sample,
)
from .errors import ConfigError, DomainError, NumericalError
from .kernels import BACKEND as KERNEL_BACKEND
from .mcmc import (
    ChainOutput,
    ChainState,
    McmcConfig,
    ModelSpec,
    Priors,
    Sampler,
    log_posterior,
    run_chain,
    run_chains,
)
from .process import (
    Dataset,
    MaxIdModel,
    conditional_loglik,
    from_data_scale,
    joint_cdf,
    marginal_cdf,
    marginal_pdf,
    marginal_quantile,
    simulate_field,
    simulate_latent_field,
    simulate_Y,
    to_data_scale,
)

__version__ = "0.1.0"
