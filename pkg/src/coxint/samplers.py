"""MCMC kernels and the alternating chain driver.

The latent state is updated by elliptical slice sampling (Murray, Adams &
MacKay, 2010) against the untruncated Gaussian prior, with the positivity
indicators folded into the likelihood, or by the No-U-Turn sampler (Hoffman &
Gelman, 2014) with dual-averaging step-size adaptation during burn-in.  For
Brownian kernels the precision hyperparameter is conjugate and drawn exactly
from a Gamma between state updates; squared-exponential kernels run with the
hyperparameters held fixed.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from . import gmrf, model
from .gmrf import BmPrecisionBundle
from .kernels import KernelSpec
from .model import Dataset, GammaPrior

logger = logging.getLogger(__name__)

_MAX_ENERGY_ERROR = 1000.0  # divergence threshold on the log scale


@dataclass
class ChainConfig:
    """Sampler settings; defaults follow the 10k burn-in / 50k retained
    convention for temporal data."""

    n_burnin: int = 10_000
    n_samples: int = 50_000
    thin: int = 1
    sampler: str = "ess"  # "ess" | "nuts"
    seed: int = 0
    init: object = "homogeneous"
    nuts_target_accept: float = 0.8
    nuts_max_depth: int = 10

    def __post_init__(self):
        if self.n_burnin < 0 or self.n_samples < 0:
            raise ValueError("iteration counts must be nonnegative")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if self.sampler not in ("ess", "nuts"):
            raise ValueError(f"unknown sampler {self.sampler!r}")
        if not 0.0 < self.nuts_target_accept < 1.0:
            raise ValueError("nuts_target_accept must be in (0, 1)")


@dataclass
class PosteriorSamples:
    """Retained draws plus layout and diagnostics."""

    lam_draws: np.ndarray
    theta_draws: np.ndarray | None
    layout: model.StateLayout
    seed: int
    diagnostics: dict = field(default_factory=dict)

    @property
    def n_draws(self) -> int:
        return self.lam_draws.shape[0]

    def values(self) -> np.ndarray:
        return self.lam_draws[:, : self.layout.n_values]

    def grid_values(self) -> np.ndarray:
        return self.lam_draws[:, self.layout.grid_slice]

    def integrals(self) -> np.ndarray:
        return self.lam_draws[:, self.layout.integral_slice]


# ---------------------------------------------------------------------------
# elliptical slice sampling
# ---------------------------------------------------------------------------


def ess_step(current, chol, loglik, rng, cur_loglik=None, scale=1.0):
    """One elliptical slice update against the ``N(0, scale^2 * chol chol')``
    prior.

    Returns ``(state, loglik, n_shrink)``.  Terminates with probability one
    by bracket shrinkage; the returned state satisfies the slice threshold.
    """
    current = np.asarray(current, dtype=float)
    if cur_loglik is None:
        cur_loglik = loglik(current)
    if not np.isfinite(cur_loglik):
        raise ValueError("elliptical slice sampling needs a finite starting log-likelihood")
    nu = chol @ rng.standard_normal(current.size)
    if scale != 1.0:
        nu = nu * scale
    logy = cur_loglik + math.log(rng.uniform())
    phi = rng.uniform(0.0, 2.0 * math.pi)
    lo, hi = phi - 2.0 * math.pi, phi
    shrinks = 0
    while True:
        prop = current * math.cos(phi) + nu * math.sin(phi)
        ll = loglik(prop)
        if ll > logy:
            return prop, ll, shrinks
        if phi < 0.0:
            lo = phi
        else:
            hi = phi
        phi = rng.uniform(lo, hi)
        shrinks += 1


# ---------------------------------------------------------------------------
# No-U-Turn sampler
# ---------------------------------------------------------------------------


def leapfrog(logp_and_grad, pos, mom, grad, eps):
    """One leapfrog step; returns ``(pos, mom, logp, grad)``."""
    mom = mom + 0.5 * eps * grad
    pos = pos + eps * mom
    lp, g = logp_and_grad(pos)
    if np.isfinite(lp):
        mom = mom + 0.5 * eps * g
    return pos, mom, lp, g


def find_reasonable_epsilon(logp_and_grad, pos, rng):
    """Coarse initial step size: double/halve until the one-step acceptance
    probability crosses 1/2."""
    eps = 1.0
    lp, grad = logp_and_grad(pos)
    mom = rng.standard_normal(pos.size)
    joint0 = lp - 0.5 * float(mom @ mom)
    _, mom1, lp1, _ = leapfrog(logp_and_grad, pos, mom, grad, eps)
    joint1 = lp1 - 0.5 * float(mom1 @ mom1) if np.isfinite(lp1) else -np.inf
    a = 1.0 if joint1 - joint0 > math.log(0.5) else -1.0
    for _ in range(64):
        if a * (joint1 - joint0) <= -a * math.log(2.0):
            break
        eps *= 2.0**a
        _, mom1, lp1, _ = leapfrog(logp_and_grad, pos, mom, grad, eps)
        joint1 = lp1 - 0.5 * float(mom1 @ mom1) if np.isfinite(lp1) else -np.inf
    return eps


class DualAveraging:
    """Step-size adaptation from NUTS, targeting a given acceptance rate."""

    def __init__(self, eps0, target=0.8, gamma=0.05, t0=10.0, kappa=0.75):
        self.mu = math.log(10.0 * eps0)
        self.target = target
        self.gamma = gamma
        self.t0 = t0
        self.kappa = kappa
        self.h_bar = 0.0
        self.log_eps_bar = 0.0
        self.m = 0
        self.eps = eps0

    def update(self, accept_ratio):
        self.m += 1
        w = 1.0 / (self.m + self.t0)
        self.h_bar = (1.0 - w) * self.h_bar + w * (self.target - accept_ratio)
        log_eps = self.mu - math.sqrt(self.m) / self.gamma * self.h_bar
        eta = self.m**-self.kappa
        self.log_eps_bar = (1.0 - eta) * self.log_eps_bar + eta * log_eps
        self.eps = math.exp(log_eps)
        return self.eps

    @property
    def adapted(self):
        return math.exp(self.log_eps_bar)


class _Tree:
    __slots__ = (
        "pos_m", "mom_m", "grad_m", "lp_m",
        "pos_p", "mom_p", "grad_p", "lp_p",
        "pos", "lp", "grad", "n", "stop", "alpha", "n_alpha", "divergent",
    )


def _build_tree(f, pos, mom, lp, grad, log_u, direction, depth, eps, joint0, rng):
    t = _Tree()
    if depth == 0:
        pos1, mom1, lp1, grad1 = leapfrog(f, pos, mom, grad, direction * eps)
        finite = np.isfinite(lp1)
        joint = lp1 - 0.5 * float(mom1 @ mom1) if finite else -np.inf
        t.pos_m = t.pos_p = t.pos = pos1
        t.mom_m = t.mom_p = mom1
        t.grad_m = t.grad_p = t.grad = grad1
        t.lp_m = t.lp_p = t.lp = lp1
        t.n = 1 if log_u <= joint else 0
        t.stop = not (joint > log_u - _MAX_ENERGY_ERROR)
        # a positivity-boundary exit stops the doubling but is not an
        # energy divergence
        t.divergent = t.stop and finite
        t.alpha = min(1.0, math.exp(min(joint - joint0, 0.0)))
        t.n_alpha = 1
        return t
    t1 = _build_tree(f, pos, mom, lp, grad, log_u, direction, depth - 1, eps, joint0, rng)
    if t1.stop:
        return t1
    if direction == -1:
        t2 = _build_tree(f, t1.pos_m, t1.mom_m, t1.lp_m, t1.grad_m, log_u, direction, depth - 1, eps, joint0, rng)
        t1.pos_m, t1.mom_m, t1.grad_m, t1.lp_m = t2.pos_m, t2.mom_m, t2.grad_m, t2.lp_m
    else:
        t2 = _build_tree(f, t1.pos_p, t1.mom_p, t1.lp_p, t1.grad_p, log_u, direction, depth - 1, eps, joint0, rng)
        t1.pos_p, t1.mom_p, t1.grad_p, t1.lp_p = t2.pos_p, t2.mom_p, t2.grad_p, t2.lp_p
    if t2.n > 0 and rng.uniform() < t2.n / max(t1.n + t2.n, 1):
        t1.pos, t1.lp, t1.grad = t2.pos, t2.lp, t2.grad
    span = t1.pos_p - t1.pos_m
    t1.stop = (
        t2.stop
        or float(span @ t1.mom_m) < 0.0
        or float(span @ t1.mom_p) < 0.0
    )
    t1.n += t2.n
    t1.alpha += t2.alpha
    t1.n_alpha += t2.n_alpha
    t1.divergent = t1.divergent or t2.divergent
    return t1


def nuts_step(current, logp_and_grad, step_size, rng, max_depth=10, cache=None):
    """One No-U-Turn transition with the standard doubling scheme.

    Returns ``(state, info)`` where ``info`` carries the new log-density and
    gradient plus acceptance statistics.  A divergent trajectory (energy
    error beyond 1000) is recorded and the transition falls back to the
    current state unless a valid proposal was already collected.
    """
    pos = np.asarray(current, dtype=float)
    if cache is None:
        lp, grad = logp_and_grad(pos)
    else:
        lp, grad = cache
    if not np.isfinite(lp):
        raise ValueError("NUTS needs a strictly positive (finite log-density) starting state")
    mom = rng.standard_normal(pos.size)
    joint0 = lp - 0.5 * float(mom @ mom)
    log_u = joint0 + math.log(rng.uniform())

    pos_m = pos_p = pos
    mom_m = mom_p = mom
    grad_m = grad_p = grad
    lp_m = lp_p = lp
    new_pos, new_lp, new_grad = pos, lp, grad
    n = 1
    depth = 0
    divergent = False
    alpha, n_alpha = 1.0, 1
    while depth < max_depth:
        direction = -1 if rng.uniform() < 0.5 else 1
        if direction == -1:
            t = _build_tree(logp_and_grad, pos_m, mom_m, lp_m, grad_m, log_u, direction, depth, step_size, joint0, rng)
            pos_m, mom_m, grad_m, lp_m = t.pos_m, t.mom_m, t.grad_m, t.lp_m
        else:
            t = _build_tree(logp_and_grad, pos_p, mom_p, lp_p, grad_p, log_u, direction, depth, step_size, joint0, rng)
            pos_p, mom_p, grad_p, lp_p = t.pos_p, t.mom_p, t.grad_p, t.lp_p
        alpha, n_alpha = t.alpha, t.n_alpha
        divergent = divergent or t.divergent
        if not t.stop and t.n > 0 and rng.uniform() < min(1.0, t.n / n):
            new_pos, new_lp, new_grad = t.pos, t.lp, t.grad
        n += t.n
        depth += 1
        span = pos_p - pos_m
        if t.stop or float(span @ mom_m) < 0.0 or float(span @ mom_p) < 0.0:
            break
    info = {
        "logp": new_lp,
        "grad": new_grad,
        "alpha": alpha,
        "n_alpha": n_alpha,
        "depth": depth,
        "divergent": divergent,
    }
    return new_pos, info


# ---------------------------------------------------------------------------
# conjugate precision update
# ---------------------------------------------------------------------------


def gamma_posterior_params(state, bundle: BmPrecisionBundle, prior: GammaPrior):
    """Shape and rate of the conditional Gamma law of the Brownian precision."""
    qf = gmrf.quadratic_form(bundle, state)
    return prior.alpha + 0.5 * bundle.dim, prior.beta + 0.5 * qf


def gibbs_theta(state, bundle: BmPrecisionBundle, prior: GammaPrior, rng) -> float:
    """Exact conjugate draw of the Brownian precision given the state."""
    shape, rate = gamma_posterior_params(state, bundle, prior)
    return float(rng.gamma(shape, 1.0 / rate))


# ---------------------------------------------------------------------------
# chain driver
# ---------------------------------------------------------------------------


def initial_state(data: Dataset) -> np.ndarray:
    """Homogeneous-rate start: values at ``N / |S|``, integral slots at
    ``rate * |region|``; always has a finite log-posterior."""
    lay = data.layout
    rate = max(data.total_count, 1.0) / data.domain.measure
    state = np.empty(lay.dim)
    state[: lay.n_values] = rate
    measures = [model._region_measure(r, data.domain.ndim) for r, _ in data.bins]
    if lay.has_rest:
        measures.append(data.rest_measure)
    state[lay.integral_slice] = rate * np.asarray(measures)
    return state


def run_chain(
    data: Dataset,
    kernel: KernelSpec,
    config: ChainConfig | None = None,
    *,
    epsilon: float = gmrf.DEFAULT_EPSILON,
    gamma_prior: GammaPrior | None = None,
) -> PosteriorSamples:
    """Posterior sampling of the augmented state (and the Brownian precision
    when the kernel family supports the conjugate update).

    Brownian families alternate one state update with one exact precision
    draw per sweep, using the boundary-corrected covariance ``C_tilde / theta``
    as the state prior.  Squared-exponential families keep the supplied
    hyperparameters fixed.  Fully reproducible under a fixed seed.
    """
    config = config if config is not None else ChainConfig()
    prior = gamma_prior if gamma_prior is not None else GammaPrior()
    rng = np.random.default_rng(config.seed)
    lay = data.layout

    if isinstance(config.init, str):
        if config.init != "homogeneous":
            raise ValueError(f"unknown init rule {config.init!r}")
        state = initial_state(data)
    else:
        state = np.asarray(config.init, dtype=float).copy()
        if state.shape != (lay.dim,):
            raise ValueError("initial state has the wrong dimension")

    def loglik(lam):
        return model.log_likelihood(lam, data)

    ll = loglik(state)
    if not np.isfinite(ll):
        raise RuntimeError(
            "could not find a positive starting state; pass an explicit init with"
            " strictly positive components"
        )

    sample_theta = kernel.family in ("bm", "bs")
    bundle = cov = None
    theta = None
    if sample_theta:
        bundle = model.prior_bundle(data, epsilon)
        theta = gibbs_theta(state, bundle, prior, rng)
    else:
        cov = model.prior_covariance(data, kernel)

    zero_grad = np.zeros(lay.dim)
    chol = bundle.C_tilde_chol if sample_theta else cov.chol
    scale = theta**-0.5 if sample_theta else 1.0

    # NUTS runs on the whitened variable z with lam = scale * (chol @ z), so
    # the prior is standard normal and the leapfrog is not throttled by the
    # prior's condition number; the chain law on lam is unchanged
    def logp_grad_white(z):
        lam = scale * (chol @ z)
        if lam.min() <= 0.0:
            return -np.inf, zero_grad
        val = -0.5 * float(z @ z) + model.log_likelihood(lam, data)
        g = model.likelihood_gradient(lam, data)
        return val, scale * (chol.T @ g) - z

    total = config.n_burnin + config.n_samples * config.thin
    draws = np.empty((config.n_samples, lay.dim))
    thetas = np.empty(config.n_samples) if sample_theta else None
    shrink_total = 0
    divergences = 0
    depths = np.zeros(config.nuts_max_depth + 1, dtype=int)
    accept_sum, accept_n = 0.0, 0

    use_nuts = config.sampler == "nuts"
    if use_nuts:
        z = solve_triangular(chol, state / scale, lower=True)
        da = DualAveraging(
            find_reasonable_epsilon(logp_grad_white, z, rng), target=config.nuts_target_accept
        )
        eps = da.eps
        nuts_cache = None

    kept = 0
    for sweep in range(total):
        if use_nuts:
            z, info = nuts_step(
                z, logp_grad_white, eps, rng, max_depth=config.nuts_max_depth, cache=nuts_cache
            )
            state = scale * (chol @ z)
            ratio = info["alpha"] / info["n_alpha"]
            accept_sum += ratio
            accept_n += 1
            divergences += int(info["divergent"])
            depths[min(info["depth"], depths.size - 1)] += 1
            if sweep < config.n_burnin:
                eps = da.update(ratio)
                if sweep == config.n_burnin - 1:
                    eps = da.adapted
            nuts_cache = (info["logp"], info["grad"])
        else:
            state, ll, k = ess_step(state, chol, loglik, rng, cur_loglik=ll, scale=scale)
            shrink_total += k
        if sample_theta:
            new_theta = gibbs_theta(state, bundle, prior, rng)
            new_scale = new_theta**-0.5
            if use_nuts:
                z = z * (scale / new_scale)  # same lam, rescaled whitened variable
                nuts_cache = None  # cached log-density is stale once theta moves
            theta, scale = new_theta, new_scale
        if sweep >= config.n_burnin and (sweep - config.n_burnin) % config.thin == 0:
            draws[kept] = state
            if sample_theta:
                thetas[kept] = theta
            kept += 1

    diagnostics = {
        "n_sweeps": total,
        "ess_shrinks": shrink_total,
        "nuts_divergences": divergences,
        "nuts_depths": depths.tolist(),
        "nuts_mean_accept": (accept_sum / accept_n) if accept_n else None,
        "nuts_step_size": eps if use_nuts else None,
        "epsilon": epsilon if sample_theta else None,
    }
    logger.debug("chain finished: %s", diagnostics)
    return PosteriorSamples(
        lam_draws=draws,
        theta_draws=thetas,
        layout=lay,
        seed=config.seed,
        diagnostics=diagnostics,
    )
