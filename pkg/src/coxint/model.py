"""Datasets, the augmented latent state and its exact log-densities.

The latent state is one flat vector laid out as

    [ values at grid points | values at observed points | region integrals ]

where the integral block holds one slot per count bin followed, when the bins
do not exhaust the domain, by a slot for the remaining region (the whole
domain in the pure-event case).  The Poisson log-likelihood is exact in this
parametrization:

    -sum(integral slots) + sum_n log lam(s_n) + sum_j c_j log Lam(B_j)

and evaluates to ``-inf`` whenever any component is nonpositive, which folds
the truncation indicators of the positive Gaussian prior into the likelihood.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import gmrf, kernels
from .gmrf import BmPrecisionBundle
from .kernels import AugmentedCovariance, DomainError, KernelSpec

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class GammaPrior:
    """Conjugate Gamma(shape ``alpha``, rate ``beta``) prior on a precision."""

    alpha: float = 0.1
    beta: float = 0.1

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError("Gamma prior parameters must be positive")


@dataclass(frozen=True)
class StateLayout:
    """Index map of the flat state vector."""

    n_grid: int
    n_obs: int
    n_bins: int
    has_rest: bool  # extra integral slot for the un-binned region

    @property
    def n_values(self) -> int:
        return self.n_grid + self.n_obs

    @property
    def n_integrals(self) -> int:
        return self.n_bins + (1 if self.has_rest else 0)

    @property
    def dim(self) -> int:
        return self.n_values + self.n_integrals

    @property
    def grid_slice(self) -> slice:
        return slice(0, self.n_grid)

    @property
    def obs_slice(self) -> slice:
        return slice(self.n_grid, self.n_values)

    @property
    def integral_slice(self) -> slice:
        return slice(self.n_values, self.dim)

    @property
    def bin_slice(self) -> slice:
        return slice(self.n_values, self.n_values + self.n_bins)

    def labels(self) -> list:
        out = ["grid"] * self.n_grid + ["obs"] * self.n_obs
        out += [f"integral:bin{j + 1}" for j in range(self.n_bins)]
        if self.has_rest:
            out.append("integral" if self.n_bins == 0 else "integral:rest")
        return out


def _region_measure(region, ndim):
    if ndim == 1:
        return float(region[1] - region[0])
    (a1, b1), (a2, b2) = region
    return float((b1 - a1) * (b2 - a2))


def _in_region(points, region, ndim):
    # bins are half-open: [a, b) per axis
    pts = np.asarray(points, dtype=float)
    if ndim == 1:
        a, b = region
        return (pts >= a) & (pts < b)
    (a1, b1), (a2, b2) = region
    pts = np.atleast_2d(pts)
    return (pts[:, 0] >= a1) & (pts[:, 0] < b1) & (pts[:, 1] >= a2) & (pts[:, 1] < b2)


def _regions_overlap(r1, r2, ndim):
    if ndim == 1:
        return r1[0] < r2[1] and r2[0] < r1[1]
    return (
        r1[0][0] < r2[0][1]
        and r2[0][0] < r1[0][1]
        and r1[1][0] < r2[1][1]
        and r2[1][0] < r1[1][1]
    )


@dataclass
class Dataset:
    """Observed events, optional count bins, prediction grid and the domain.

    ``bins`` is a sequence of ``(region, count)`` pairs with pairwise-disjoint
    regions inside the domain; events must avoid the binned regions.  Regions
    and points are in raw coordinates.
    """

    domain: object
    events: np.ndarray = field(default_factory=lambda: np.empty(0))
    bins: tuple = ()
    grid: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self):
        nd = self.domain.ndim
        shape = (0,) if nd == 1 else (0, 2)
        self.events = np.asarray(self.events, dtype=float).reshape(
            (-1,) if nd == 1 else (-1, 2)
        ) if np.size(self.events) else np.empty(shape)
        self.grid = np.asarray(self.grid, dtype=float).reshape(
            (-1,) if nd == 1 else (-1, 2)
        ) if np.size(self.grid) else np.empty(shape)

        if self.events.size and not np.all(self.domain.contains(self.events)):
            raise DomainError("events outside the domain")
        if self.grid.size and not np.all(self.domain.contains(self.grid)):
            raise DomainError("grid points outside the domain")

        regions = [b[0] for b in self.bins]
        counts = np.asarray([b[1] for b in self.bins], dtype=float)
        if np.any(counts < 0) or np.any(counts != np.round(counts)):
            raise ValueError("bin counts must be nonnegative integers")
        for i, ri in enumerate(regions):
            for rj in regions[i + 1 :]:
                if _regions_overlap(ri, rj, nd):
                    raise ValueError("bins must be pairwise disjoint")
            if self.n_events and np.any(_in_region(self.events, ri, nd)):
                raise ValueError("events must not lie inside count bins")
        self.bins = tuple((r, int(c)) for r, c in zip(regions, counts))
        self._counts = counts

        if self.n_events == 0 and len(self.bins) == 0:
            raise ValueError("dataset needs events or bins")

        binned = sum(_region_measure(r, nd) for r in regions)
        rest = self.domain.measure - binned
        if rest < -1e-9 * self.domain.measure:
            raise ValueError("bins exceed the domain measure")
        self._rest_measure = max(rest, 0.0)
        self._has_rest = self._rest_measure > 1e-12 * self.domain.measure
        if not self._has_rest and self.n_events:
            raise ValueError("bins cover the domain but events remain outside them")
        self._layout = StateLayout(
            n_grid=self.grid.shape[0],
            n_obs=self.n_events,
            n_bins=self.n_bins,
            has_rest=self._has_rest,
        )

    @property
    def n_events(self) -> int:
        return self.events.shape[0]

    @property
    def n_bins(self) -> int:
        return len(self.bins)

    @property
    def counts(self) -> np.ndarray:
        return self._counts

    @property
    def total_count(self) -> float:
        return float(self.n_events + self._counts.sum())

    @property
    def rest_measure(self) -> float:
        return self._rest_measure

    @property
    def layout(self) -> StateLayout:
        return self._layout

    @property
    def value_points(self) -> np.ndarray:
        """Grid points then observed points, raw coordinates."""
        if self.grid.size == 0:
            return self.events
        if self.n_events == 0:
            return self.grid
        return np.concatenate([self.grid, self.events], axis=0)

    def with_grid(self, grid) -> "Dataset":
        return Dataset(domain=self.domain, events=self.events, bins=self.bins, grid=grid)


def midpoint_grid(domain, n_per_axis: int) -> np.ndarray:
    """Equispaced interior midpoints: ``(i - 1/2) * T / n`` per axis."""
    if n_per_axis < 1:
        raise ValueError("grid size must be >= 1")
    if domain.ndim == 1:
        return (np.arange(n_per_axis) + 0.5) * domain.length / n_per_axis
    xs = domain.x_range[0] + (np.arange(n_per_axis) + 0.5) * (
        domain.x_range[1] - domain.x_range[0]
    ) / n_per_axis
    ys = domain.y_range[0] + (np.arange(n_per_axis) + 0.5) * (
        domain.y_range[1] - domain.y_range[0]
    ) / n_per_axis
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel()])


# ---------------------------------------------------------------------------
# priors aligned with the state layout
# ---------------------------------------------------------------------------


def _integral_transform(layout: StateLayout) -> np.ndarray:
    """Linear map from ``[values, bins, full-domain integral]`` to the state
    layout, expressing the rest-region slot as domain minus bins."""
    nv, J = layout.n_values, layout.n_bins
    big = nv + J + 1
    A = np.zeros((layout.dim, big))
    A[: nv + J, : nv + J] = np.eye(nv + J)
    if layout.has_rest:
        A[nv + J, nv + J] = 1.0
        A[nv + J, nv : nv + J] = -1.0
    return A


def _shifted_regions(data: Dataset):
    dom = data.domain
    return [dom.shift_region(r) for r, _ in data.bins] + [dom.region()]


def prior_covariance(data: Dataset, spec: KernelSpec) -> AugmentedCovariance:
    """Augmented prior covariance for the dataset's state layout."""
    if spec.ndim != data.domain.ndim:
        raise ValueError(f"kernel {spec.family} does not match a {data.domain.ndim}-d domain")
    lay = data.layout
    pts = data.domain.shift(data.value_points)
    big = kernels.build_augmented_covariance(spec, pts, _shifted_regions(data))
    A = _integral_transform(lay)
    V = A @ big.V @ A.T
    V = 0.5 * (V + V.T)
    L, jitter = kernels.chol_with_jitter(V)
    return AugmentedCovariance(V=V, chol=L, jitter=jitter, n_points=lay.n_values)


def prior_bundle(data: Dataset, epsilon: float = gmrf.DEFAULT_EPSILON) -> BmPrecisionBundle:
    """Unit-precision Brownian bundle for the dataset's state layout.

    Pure-event interval data with zero offset takes the tridiagonal fast
    path; everything else (sheet, offsets, count bins) goes through the dense
    construction.
    """
    lay = data.layout
    dom = data.domain
    pts = dom.shift(data.value_points)
    if dom.ndim == 1 and lay.n_bins == 0 and dom.offset == 0.0:
        return gmrf.build_bm_bundle(pts, dom.length, epsilon)
    family = kernels.bm(1.0) if dom.ndim == 1 else kernels.bs(1.0)
    big = kernels.build_augmented_covariance(family, pts, _shifted_regions(data))
    A = _integral_transform(lay)
    C = A @ big.V @ A.T
    C = 0.5 * (C + C.T)
    measures = [_region_measure(r, dom.ndim) for r, _ in data.bins]
    if lay.has_rest:
        measures.append(data.rest_measure)
    l = np.concatenate([np.ones(lay.n_values), np.asarray(measures)])
    return gmrf.bundle_from_cov(C, l, epsilon)


# ---------------------------------------------------------------------------
# exact log-densities
# ---------------------------------------------------------------------------


def log_likelihood(state: np.ndarray, data: Dataset) -> float:
    """Exact Poisson log-likelihood of the augmented state; ``-inf`` when any
    component is nonpositive."""
    lay = data.layout
    state = np.asarray(state, dtype=float)
    if state.shape != (lay.dim,):
        raise ValueError(f"state has shape {state.shape}, layout needs ({lay.dim},)")
    if state.min() <= 0.0:
        return -np.inf
    val = -state[lay.integral_slice].sum()
    if lay.n_obs:
        val += np.log(state[lay.obs_slice]).sum()
    if lay.n_bins:
        val += float(data.counts @ np.log(state[lay.bin_slice]))
    return float(val)


def log_prior(state: np.ndarray, cov, theta: float | None = None) -> float:
    """Gaussian log-density of the state under the untruncated prior.

    The positive-orthant normalizer is constant in the state and omitted; it
    only matters for precision updates, where it is handled analytically.
    ``cov`` is either an :class:`AugmentedCovariance` (fixed hyperparameters)
    or a :class:`BmPrecisionBundle` together with the precision ``theta``.
    """
    state = np.asarray(state, dtype=float)
    if isinstance(cov, BmPrecisionBundle):
        if theta is None:
            raise ValueError("theta is required with a precision bundle")
        d = cov.dim
        if state.shape != (d,):
            raise ValueError("state dimension mismatch")
        qf = gmrf.quadratic_form(cov, state)
        return float(
            -0.5 * theta * qf
            - 0.5 * d * _LOG_2PI
            + 0.5 * d * np.log(theta)
            + 0.5 * cov.logdet_precision()
        )
    d = cov.dim
    if state.shape != (d,):
        raise ValueError("state dimension mismatch")
    return float(-0.5 * state @ cov.solve(state) - 0.5 * d * _LOG_2PI - 0.5 * cov.logdet())


def likelihood_gradient(state: np.ndarray, data: Dataset) -> np.ndarray:
    """Gradient of :func:`log_likelihood` at a strictly positive state:
    zeros at grid slots, ``1 / lam(s_n)`` at observed slots,
    ``c_j / Lam(B_j) - 1`` at bin slots and ``-1`` at the remaining
    integral slot."""
    lay = data.layout
    grad = np.zeros(lay.dim)
    if lay.n_obs:
        grad[lay.obs_slice] = 1.0 / state[lay.obs_slice]
    grad[lay.integral_slice] = -1.0
    if lay.n_bins:
        grad[lay.bin_slice] += data.counts / state[lay.bin_slice]
    return grad


def log_posterior_and_gradient(state: np.ndarray, data: Dataset, cov, theta: float | None = None):
    """Unnormalized log-posterior of the state and its gradient.

    The gradient is :func:`likelihood_gradient` minus the prior precision
    applied to the state; defined only for strictly positive states.
    """
    lay = data.layout
    state = np.asarray(state, dtype=float)
    if state.shape != (lay.dim,):
        raise ValueError(f"state has shape {state.shape}, layout needs ({lay.dim},)")
    if state.min() <= 0.0:
        raise ValueError("gradient undefined at nonpositive states")

    value = log_prior(state, cov, theta) + log_likelihood(state, data)
    grad = likelihood_gradient(state, data)
    if isinstance(cov, BmPrecisionBundle):
        grad -= theta * (cov.qf_chol @ (cov.qf_chol.T @ state))
    else:
        grad -= cov.solve(state)
    return float(value), grad
