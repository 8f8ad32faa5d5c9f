"""Covariance kernels with closed-form integrals and the joint covariance of
Gaussian-process values together with region integrals.

For an integrable kernel ``k`` on a compact domain, a zero-mean GP ``f``
induces a Gaussian law on the augmented vector

    [f(x_1), ..., f(x_M), int_{B_1} f(t) dt, ..., int_{B_J} f(t) dt]

whose covariance is assembled from three quantities, all evaluated here in
closed form:

* ``kernel_eval(spec, x, y)``                 -- the kernel itself,
* ``kernel_single_integral(spec, s, B)``      -- ``int_B k(s, t) dt``,
* ``kernel_double_integral(spec, A, B)``      -- ``int_A int_B k(s, t) ds dt``.

Supported families:

``se``          squared exponential ``theta0 * exp(-theta1 * (x - y)^2 / 2)``
                on an interval; single integrals are erf differences, double
                integrals combine erf and Gaussian terms.
``bm``          Brownian motion ``min(x, y) / theta`` on an interval with
                strictly positive coordinates; integrals are exact piecewise
                polynomials.
``bs``          Brownian sheet ``min(x1, y1) * min(x2, y2) / theta`` on a
                rectangle; everything factors per axis.
``product_se``  product of per-axis squared exponentials on a rectangle.

All coordinates passed to kernel functions are the kernel's own; if the data
live elsewhere, translate first (see ``Interval.shift`` / ``Rectangle.shift``).
Regions are ``(a, b)`` tuples in one dimension and ``((a1, b1), (a2, b2))``
pairs in two.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve
from scipy.special import erf


class DomainError(ValueError):
    """A point or region is invalid for the kernel or domain at hand."""


class IllConditionedCovarianceError(np.linalg.LinAlgError):
    """Cholesky factorization failed even at the maximum allowed jitter."""

    def __init__(self, message: str, smallest_eigenvalue: float):
        super().__init__(message)
        self.smallest_eigenvalue = smallest_eigenvalue


# ---------------------------------------------------------------------------
# domains
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Interval:
    """One-dimensional domain ``[0, length]`` in raw (data) coordinates.

    ``offset`` translates raw coordinates before any kernel evaluation, so the
    kernel sees ``[offset, offset + length]``.  Brownian-motion kernels require
    the shifted coordinates to be strictly positive.
    """

    length: float
    offset: float = 0.0

    def __post_init__(self):
        if not self.length > 0:
            raise DomainError(f"interval length must be positive, got {self.length}")

    ndim = 1

    @property
    def measure(self) -> float:
        return float(self.length)

    def shift(self, points):
        return np.asarray(points, dtype=float) + self.offset

    def region(self):
        """Full domain as a region in kernel coordinates."""
        return (self.offset, self.offset + self.length)

    def shift_region(self, region):
        a, b = region
        return (a + self.offset, b + self.offset)

    def contains(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return (pts >= 0.0) & (pts <= self.length)


@dataclass(frozen=True)
class Rectangle:
    """Axis-aligned rectangular domain in raw coordinates."""

    x_range: tuple
    y_range: tuple
    offset: tuple = (0.0, 0.0)

    def __post_init__(self):
        for lo, hi in (self.x_range, self.y_range):
            if not hi > lo:
                raise DomainError(f"degenerate rectangle side ({lo}, {hi})")

    ndim = 2

    @property
    def measure(self) -> float:
        return float(
            (self.x_range[1] - self.x_range[0]) * (self.y_range[1] - self.y_range[0])
        )

    def shift(self, points):
        return np.asarray(points, dtype=float) + np.asarray(self.offset, dtype=float)

    def region(self):
        ox, oy = self.offset
        return (
            (self.x_range[0] + ox, self.x_range[1] + ox),
            (self.y_range[0] + oy, self.y_range[1] + oy),
        )

    def shift_region(self, region):
        (a1, b1), (a2, b2) = region
        ox, oy = self.offset
        return ((a1 + ox, b1 + ox), (a2 + oy, b2 + oy))

    def contains(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        ok_x = (pts[:, 0] >= self.x_range[0]) & (pts[:, 0] <= self.x_range[1])
        ok_y = (pts[:, 1] >= self.y_range[0]) & (pts[:, 1] <= self.y_range[1])
        return ok_x & ok_y


# ---------------------------------------------------------------------------
# kernel specifications
# ---------------------------------------------------------------------------

_N_PARAMS = {"se": 2, "bm": 1, "bs": 1, "product_se": 4}


@dataclass(frozen=True)
class KernelSpec:
    """A kernel family plus its hyperparameters (prior mean is fixed at zero)."""

    family: str
    params: tuple

    def __post_init__(self):
        if self.family not in _N_PARAMS:
            raise ValueError(f"unknown kernel family {self.family!r}")
        if len(self.params) != _N_PARAMS[self.family]:
            raise ValueError(
                f"{self.family} takes {_N_PARAMS[self.family]} parameters,"
                f" got {len(self.params)}"
            )
        if any(not (p > 0) for p in self.params):
            raise ValueError(f"kernel hyperparameters must be positive: {self.params}")

    @property
    def ndim(self) -> int:
        return 1 if self.family in ("se", "bm") else 2


def se(theta0: float, theta1: float) -> KernelSpec:
    """Squared exponential with amplitude ``theta0`` and inverse squared
    length scale ``theta1``."""
    return KernelSpec("se", (float(theta0), float(theta1)))


def bm(theta: float) -> KernelSpec:
    """Brownian motion with precision ``theta``: ``k = min(x, y) / theta``."""
    return KernelSpec("bm", (float(theta),))


def bs(theta: float) -> KernelSpec:
    """Two-dimensional Brownian sheet with precision ``theta``."""
    return KernelSpec("bs", (float(theta),))


def product_se(theta0_x, theta1_x, theta0_y, theta1_y) -> KernelSpec:
    """Product of per-axis squared exponentials on a rectangle."""
    return KernelSpec(
        "product_se",
        (float(theta0_x), float(theta1_x), float(theta0_y), float(theta1_y)),
    )


def make_kernel(family: str, params) -> KernelSpec:
    return KernelSpec(family, tuple(float(p) for p in np.atleast_1d(params)))


def n_params(family: str) -> int:
    return _N_PARAMS[family]


# ---------------------------------------------------------------------------
# scalar antiderivatives
# ---------------------------------------------------------------------------


def _bm_F(u, s):
    """``int_0^u min(s, t) dt`` for ``u, s >= 0``."""
    u = np.asarray(u, dtype=float)
    return np.where(u <= s, 0.5 * u * u, s * u - 0.5 * s * s)


def _bm_G(u, v):
    """``int_0^u int_0^v min(s, t) ds dt`` for ``u, v >= 0``."""
    lo = min(u, v)
    hi = max(u, v)
    return 0.5 * lo * lo * hi - lo**3 / 6.0


def _se_g(z, theta0, theta1):
    """Antiderivative of ``theta0 * exp(-theta1 * r^2 / 2)``."""
    return theta0 * math.sqrt(math.pi / (2.0 * theta1)) * erf(math.sqrt(theta1 / 2.0) * z)


def _se_Phi(z, theta0, theta1):
    """Second antiderivative of ``theta0 * exp(-theta1 * r^2 / 2)`` (even)."""
    a = math.sqrt(theta1 / 2.0)
    return (
        theta0
        * math.sqrt(math.pi / (2.0 * theta1))
        * (z * erf(a * z) + math.sqrt(2.0 / (math.pi * theta1)) * np.exp(-theta1 * z * z / 2.0))
    )


def _se_single(s, a, b, theta0, theta1):
    return _se_g(b - s, theta0, theta1) - _se_g(a - s, theta0, theta1)


def _se_double(a, b, c, d, theta0, theta1):
    return (
        _se_Phi(b - c, theta0, theta1)
        + _se_Phi(a - d, theta0, theta1)
        - _se_Phi(b - d, theta0, theta1)
        - _se_Phi(a - c, theta0, theta1)
    )


def _bm_single(s, a, b):
    if np.any(np.asarray(s) <= 0.0):
        raise DomainError("Brownian-motion point must be strictly positive")
    if a < 0.0:
        raise DomainError("Brownian-motion region must lie in [0, inf)")
    return _bm_F(b, s) - _bm_F(a, s)


def _bm_double(a, b, c, d):
    if a < 0.0 or c < 0.0:
        raise DomainError("Brownian-motion region must lie in [0, inf)")
    return _bm_G(b, d) - _bm_G(a, d) - _bm_G(b, c) + _bm_G(a, c)


def _region1d(region):
    a, b = (float(region[0]), float(region[1]))
    if b < a:
        raise DomainError(f"region bounds out of order: ({a}, {b})")
    return a, b


def _region2d(region):
    return _region1d(region[0]), _region1d(region[1])


# ---------------------------------------------------------------------------
# public kernel operations
# ---------------------------------------------------------------------------


def kernel_eval(spec: KernelSpec, x, y) -> float:
    """Evaluate ``k(x, y)``; symmetric in its point arguments."""
    if spec.family == "se":
        theta0, theta1 = spec.params
        d = float(x) - float(y)
        return float(theta0 * math.exp(-theta1 * d * d / 2.0))
    if spec.family == "bm":
        (theta,) = spec.params
        x, y = float(x), float(y)
        if x <= 0.0 or y <= 0.0:
            raise DomainError("Brownian-motion coordinates must be strictly positive")
        return min(x, y) / theta
    if spec.family == "bs":
        (theta,) = spec.params
        (x1, x2), (y1, y2) = (float(x[0]), float(x[1])), (float(y[0]), float(y[1]))
        if min(x1, x2, y1, y2) <= 0.0:
            raise DomainError("Brownian-sheet coordinates must be strictly positive")
        return min(x1, y1) * min(x2, y2) / theta
    t0x, t1x, t0y, t1y = spec.params
    dx = float(x[0]) - float(y[0])
    dy = float(x[1]) - float(y[1])
    return float(
        t0x * math.exp(-t1x * dx * dx / 2.0) * t0y * math.exp(-t1y * dy * dy / 2.0)
    )


def gram(spec: KernelSpec, X, Y=None) -> np.ndarray:
    """Kernel matrix over point sets, shape ``(len(X), len(Y))``."""
    X = np.asarray(X, dtype=float)
    Y = X if Y is None else np.asarray(Y, dtype=float)
    if spec.family == "se":
        theta0, theta1 = spec.params
        d = X[:, None] - Y[None, :]
        return theta0 * np.exp(-theta1 * d * d / 2.0)
    if spec.family == "bm":
        (theta,) = spec.params
        if np.any(X <= 0.0) or np.any(Y <= 0.0):
            raise DomainError("Brownian-motion coordinates must be strictly positive")
        return np.minimum(X[:, None], Y[None, :]) / theta
    if spec.family == "bs":
        (theta,) = spec.params
        if np.any(X <= 0.0) or np.any(Y <= 0.0):
            raise DomainError("Brownian-sheet coordinates must be strictly positive")
        m1 = np.minimum(X[:, 0][:, None], Y[:, 0][None, :])
        m2 = np.minimum(X[:, 1][:, None], Y[:, 1][None, :])
        return m1 * m2 / theta
    t0x, t1x, t0y, t1y = spec.params
    dx = X[:, 0][:, None] - Y[:, 0][None, :]
    dy = X[:, 1][:, None] - Y[:, 1][None, :]
    return t0x * t0y * np.exp(-t1x * dx * dx / 2.0 - t1y * dy * dy / 2.0)


def kernel_single_integral(spec: KernelSpec, s, region) -> float:
    """``int_region k(s, t) dt`` in closed form."""
    s = np.asarray(s, dtype=float)
    pts = np.atleast_1d(s) if spec.ndim == 1 else np.atleast_2d(s)
    return float(single_integral_vec(spec, pts, region)[0])


def single_integral_vec(spec: KernelSpec, points, region) -> np.ndarray:
    """Vectorized ``int_region k(x_i, t) dt`` over many points."""
    pts = np.asarray(points, dtype=float)
    if spec.family == "se":
        theta0, theta1 = spec.params
        a, b = _region1d(region)
        return _se_single(pts, a, b, theta0, theta1)
    if spec.family == "bm":
        (theta,) = spec.params
        a, b = _region1d(region)
        return _bm_single(pts, a, b) / theta
    if spec.family == "bs":
        (theta,) = spec.params
        (a1, b1), (a2, b2) = _region2d(region)
        return _bm_single(pts[:, 0], a1, b1) * _bm_single(pts[:, 1], a2, b2) / theta
    t0x, t1x, t0y, t1y = spec.params
    (a1, b1), (a2, b2) = _region2d(region)
    return _se_single(pts[:, 0], a1, b1, t0x, t1x) * _se_single(pts[:, 1], a2, b2, t0y, t1y)


def kernel_double_integral(spec: KernelSpec, region_a, region_b) -> float:
    """``int_{region_a} int_{region_b} k(s, t) ds dt`` in closed form."""
    if spec.family == "se":
        theta0, theta1 = spec.params
        a, b = _region1d(region_a)
        c, d = _region1d(region_b)
        return float(_se_double(a, b, c, d, theta0, theta1))
    if spec.family == "bm":
        (theta,) = spec.params
        a, b = _region1d(region_a)
        c, d = _region1d(region_b)
        return float(_bm_double(a, b, c, d) / theta)
    if spec.family == "bs":
        (theta,) = spec.params
        (a1, b1), (a2, b2) = _region2d(region_a)
        (c1, d1), (c2, d2) = _region2d(region_b)
        return float(_bm_double(a1, b1, c1, d1) * _bm_double(a2, b2, c2, d2) / theta)
    t0x, t1x, t0y, t1y = spec.params
    (a1, b1), (a2, b2) = _region2d(region_a)
    (c1, d1), (c2, d2) = _region2d(region_b)
    return float(
        _se_double(a1, b1, c1, d1, t0x, t1x) * _se_double(a2, b2, c2, d2, t0y, t1y)
    )


# ---------------------------------------------------------------------------
# augmented covariance
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AugmentedCovariance:
    """Joint prior covariance of kernel values and region integrals.

    ``V`` is ordered ``[values | region integrals]``; ``chol`` is the lower
    Cholesky factor of ``V + jitter * I``.
    """

    V: np.ndarray
    chol: np.ndarray
    jitter: float
    n_points: int

    @property
    def dim(self) -> int:
        return self.V.shape[0]

    @property
    def n_regions(self) -> int:
        return self.dim - self.n_points

    @property
    def V_SS(self) -> np.ndarray:
        return self.V[: self.n_points, : self.n_points]

    @property
    def V_SI(self) -> np.ndarray:
        return self.V[: self.n_points, self.n_points :]

    @property
    def V_II(self) -> np.ndarray:
        return self.V[self.n_points :, self.n_points :]

    def solve(self, x: np.ndarray) -> np.ndarray:
        return cho_solve((self.chol, True), x)

    def logdet(self) -> float:
        return float(2.0 * np.sum(np.log(np.diag(self.chol))))


def chol_with_jitter(V: np.ndarray, max_jitter: float = 1e-6):
    """Lower Cholesky factor of ``V``, escalating a diagonal jitter from 1e-12
    by decades up to ``max_jitter`` if plain factorization fails."""
    jitters = [0.0] + [10.0**e for e in range(-12, int(math.log10(max_jitter)) + 1)]
    eye = np.eye(V.shape[0])
    for j in jitters:
        try:
            return np.linalg.cholesky(V + j * eye if j else V), j
        except np.linalg.LinAlgError:
            continue
    smallest = float(np.linalg.eigvalsh(V)[0])
    raise IllConditionedCovarianceError(
        f"covariance not factorizable at jitter {max_jitter:g};"
        f" smallest eigenvalue ~ {smallest:.3e}",
        smallest_eigenvalue=smallest,
    )


def _check_separation(points: np.ndarray, scale: float, factor: float = 1e-9):
    tol = factor * scale
    if points.ndim == 1:
        if points.size < 2:
            return
        srt = np.sort(points)
        gap = np.min(np.diff(srt))
        if gap < tol:
            raise ValueError(
                f"points too close for a nondegenerate prior (min gap {gap:.3e} < {tol:.3e})"
            )
    else:
        if points.shape[0] < 2:
            return
        order = np.lexsort((points[:, 1], points[:, 0]))
        d = np.abs(np.diff(points[order], axis=0))
        close = np.all(d < tol, axis=1)
        if np.any(close):
            raise ValueError("duplicate points detected; perturb ties before building the prior")


def build_augmented_covariance(spec: KernelSpec, points, regions=()) -> AugmentedCovariance:
    """Assemble the augmented covariance over ``points`` and ``regions`` and
    factorize it.

    ``V_SS`` comes from ``kernel_eval``, ``V_SI`` from the single integrals
    and ``V_II`` from the double integrals.  Raises
    :class:`IllConditionedCovarianceError` when factorization fails even at
    the maximum jitter.
    """
    pts = np.asarray(points, dtype=float)
    if spec.ndim == 1:
        pts = np.atleast_1d(pts)
        if pts.ndim != 1:
            raise ValueError(f"{spec.family} expects one-dimensional points")
    else:
        pts = np.atleast_2d(pts)
        if pts.shape[1] != 2:
            raise ValueError(f"{spec.family} expects points of shape (M, 2)")
    M = pts.shape[0]
    if M < 1:
        raise ValueError("need at least one point")
    regions = [(_region1d(r) if spec.ndim == 1 else _region2d(r)) for r in regions]
    J = len(regions)

    bounds = [pts.min(), pts.max()]
    for r in regions:
        rr = np.asarray(r, dtype=float)
        bounds.extend([rr.min(), rr.max()])
    scale = float(max(bounds) - min(bounds)) or 1.0
    _check_separation(pts, scale)

    V = np.empty((M + J, M + J))
    V[:M, :M] = gram(spec, pts)
    for j, r in enumerate(regions):
        col = single_integral_vec(spec, pts, r)
        V[:M, M + j] = col
        V[M + j, :M] = col
    for i, ri in enumerate(regions):
        for j in range(i, J):
            v = kernel_double_integral(spec, ri, regions[j])
            V[M + i, M + j] = v
            V[M + j, M + i] = v

    L, jitter = chol_with_jitter(V)
    return AugmentedCovariance(V=V, chol=L, jitter=jitter, n_points=M)
