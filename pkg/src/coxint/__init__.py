"""Exact Bayesian intensity inference for Poisson point processes.

The intensity at a finite set of points and its integral over the domain are
modelled jointly as one positivity-truncated Gaussian vector, so the Poisson
likelihood is evaluated exactly and sampled by MCMC without discretizing the
domain or augmenting the data.
"""

__version__ = "0.1.0"

from .gmrf import BmPrecisionBundle, build_bm_bundle, bundle_from_cov, quadratic_form
from .hyper import FitResult, MapConfig, PiecewiseGrid, fit_map, fit_oracle_mle, map_objective
from .kernels import (
    AugmentedCovariance,
    DomainError,
    IllConditionedCovarianceError,
    Interval,
    KernelSpec,
    Rectangle,
    bm,
    bs,
    build_augmented_covariance,
    kernel_double_integral,
    kernel_eval,
    kernel_single_integral,
    product_se,
    se,
)
from .metrics import EvalReport, summarize, write_quantiles_csv
from .model import (
    Dataset,
    GammaPrior,
    StateLayout,
    log_likelihood,
    log_posterior_and_gradient,
    log_prior,
    midpoint_grid,
    prior_bundle,
    prior_covariance,
)
from .samplers import (
    ChainConfig,
    PosteriorSamples,
    ess_step,
    gamma_posterior_params,
    gibbs_theta,
    initial_state,
    nuts_step,
    run_chain,
)
from .simulate import (
    IntensitySpec,
    benchmark_lambda1,
    benchmark_lambda2,
    bin_events,
    constant,
    eval_intensity,
    from_table,
    product2d,
    simulate_thinning,
    tail_bins,
)

__all__ = [name for name in dir() if not name.startswith("_")]
