"""Precision-side machinery for Brownian-motion priors.

The augmented covariance ``C`` of values plus the domain integral, at unit
precision, is

    C[i, j]   = min(x_i, x_j)
    C[i, M]   = x_i * T - x_i**2 / 2
    C[M, M]   = T**3 / 3

for points ``0 < x_1 < ... < x_M <= T``.  The inverse of the value block is
the tridiagonal random-walk precision (1 / spacing entries), so ``C^{-1}`` is
assembled from it by a rank-one Schur complement rather than a dense inverse.

Conditioning a Brownian path on its (unobserved) starting value and
integrating that value out against a flat prior yields the intrinsic,
level-invariant precision

    Q_tilde = C^{-1} - C^{-1} l l' C^{-1} / (l' C^{-1} l),   l = (1, ..., 1, T)'

which annihilates ``l`` by construction.  A small diagonal perturbation
``epsilon`` restores invertibility: ``C_tilde = (Q_tilde + epsilon I)^{-1}``.

``epsilon`` defaults to 1e-8, which behaves well for temporal data.  Spatial
unit-square data may need 1e-4 or larger for a stable ``C_tilde``; shifting
the data far from the origin (a domain offset of ~1e3) is the usual fix when
a small epsilon is wanted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve

from .kernels import chol_with_jitter

DEFAULT_EPSILON = 1e-8


@dataclass(frozen=True)
class BmPrecisionBundle:
    """Unit-precision covariance of a Brownian prior and its corrected
    precision, all expressed in the caller's point ordering.

    ``qf_chol`` is the lower Cholesky factor of ``Q_tilde + epsilon * I``
    (i.e. of ``C_tilde^{-1}``) used for quadratic forms; ``C_tilde_chol``
    factors ``C_tilde`` itself and drives prior draws.
    """

    C: np.ndarray
    C_inv: np.ndarray
    l: np.ndarray
    Q_tilde: np.ndarray
    epsilon: float
    C_tilde: np.ndarray
    C_tilde_chol: np.ndarray
    qf_chol: np.ndarray

    @property
    def dim(self) -> int:
        return self.C.shape[0]

    def logdet_precision(self) -> float:
        """``log det(Q_tilde + epsilon I)``."""
        return float(2.0 * np.sum(np.log(np.diag(self.qf_chol))))


def rw_precision(x_sorted: np.ndarray) -> np.ndarray:
    """Tridiagonal precision of Brownian values at increasing locations.

    Equals the inverse of the ``min(x_i, x_j)`` matrix; entries are
    reciprocals of consecutive spacings (with the origin as the implicit
    leading knot).
    """
    x = np.asarray(x_sorted, dtype=float)
    M = x.size
    gaps = np.diff(np.concatenate(([0.0], x)))
    if np.any(gaps <= 0.0):
        raise ValueError("points must be strictly increasing and positive")
    Q = np.zeros((M, M))
    inv = 1.0 / gaps
    for i in range(M):
        Q[i, i] = inv[i] + (inv[i + 1] if i + 1 < M else 0.0)
        if i + 1 < M:
            Q[i, i + 1] = -inv[i + 1]
            Q[i + 1, i] = -inv[i + 1]
    return Q


def _finish_bundle(C: np.ndarray, C_inv: np.ndarray, l: np.ndarray, epsilon: float) -> BmPrecisionBundle:
    w = C_inv @ l
    s = float(l @ w)
    Q_tilde = C_inv - np.outer(w, w) / s
    Q_tilde = 0.5 * (Q_tilde + Q_tilde.T)
    A = Q_tilde + epsilon * np.eye(Q_tilde.shape[0])
    try:
        qf_chol = np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            f"corrected precision not positive definite at epsilon={epsilon:g};"
            " increase epsilon or shift the domain away from the origin"
        ) from exc
    C_tilde = cho_solve((qf_chol, True), np.eye(A.shape[0]))
    C_tilde = 0.5 * (C_tilde + C_tilde.T)
    C_tilde_chol, _ = chol_with_jitter(C_tilde)
    return BmPrecisionBundle(
        C=C,
        C_inv=C_inv,
        l=l,
        Q_tilde=Q_tilde,
        epsilon=float(epsilon),
        C_tilde=C_tilde,
        C_tilde_chol=C_tilde_chol,
        qf_chol=qf_chol,
    )


def build_bm_bundle(points, T: float, epsilon: float = DEFAULT_EPSILON) -> BmPrecisionBundle:
    """Bundle for Brownian motion on ``[0, T]`` augmented with the integral.

    ``points`` may arrive in any order (a permutation is applied internally
    and all returned matrices are in the caller's ordering); they must be
    strictly positive, at most ``T``, and distinct.
    """
    x = np.asarray(points, dtype=float)
    if x.ndim != 1 or x.size < 1:
        raise ValueError("points must be a non-empty one-dimensional array")
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    if np.any(x <= 0.0):
        raise ValueError("points must be strictly positive")
    if np.any(x > T):
        raise ValueError("points must lie within (0, T]")
    order = np.argsort(x, kind="stable")
    xs = x[order]
    if np.any(np.diff(xs) <= 0.0):
        raise ValueError("duplicate points make the Brownian covariance singular")
    M = x.size

    Q = rw_precision(xs)
    b = xs * T - 0.5 * xs * xs
    c = T**3 / 3.0
    Qb = Q @ b
    schur = c - float(b @ Qb)
    if schur <= 0.0:
        raise np.linalg.LinAlgError("augmented Brownian covariance is numerically singular")

    C_inv_s = np.empty((M + 1, M + 1))
    C_inv_s[:M, :M] = Q + np.outer(Qb, Qb) / schur
    C_inv_s[:M, M] = -Qb / schur
    C_inv_s[M, :M] = -Qb / schur
    C_inv_s[M, M] = 1.0 / schur

    C_s = np.empty((M + 1, M + 1))
    C_s[:M, :M] = np.minimum(xs[:, None], xs[None, :])
    C_s[:M, M] = b
    C_s[M, :M] = b
    C_s[M, M] = c

    # map sorted layout back to the caller's ordering (integral slot stays last)
    pos = np.empty(M, dtype=int)
    pos[order] = np.arange(M)
    idx = np.concatenate([pos, [M]])
    C = C_s[np.ix_(idx, idx)]
    C_inv = C_inv_s[np.ix_(idx, idx)]

    l = np.concatenate([np.ones(M), [float(T)]])
    return _finish_bundle(C, C_inv, l, epsilon)


def bundle_from_cov(C, l, epsilon: float = DEFAULT_EPSILON) -> BmPrecisionBundle:
    """Bundle from an arbitrary unit-precision augmented covariance.

    Used for the two-dimensional Brownian sheet and for mixed layouts with
    several integral slots, where ``C`` has no tridiagonal structure and is
    inverted densely.  ``l`` carries ones for value slots and the region
    measure for each integral slot.
    """
    C = np.asarray(C, dtype=float)
    l = np.asarray(l, dtype=float)
    if C.shape[0] != C.shape[1] or l.shape != (C.shape[0],):
        raise ValueError("C must be square and l of matching length")
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    L, _ = chol_with_jitter(C)
    C_inv = cho_solve((L, True), np.eye(C.shape[0]))
    C_inv = 0.5 * (C_inv + C_inv.T)
    return _finish_bundle(C, C_inv, l, epsilon)


def quadratic_form(bundle: BmPrecisionBundle, lam) -> float:
    """``lam' C_tilde^{-1} lam`` through the Cholesky factor; nonnegative."""
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (bundle.dim,):
        raise ValueError(f"state has dimension {lam.shape}, expected ({bundle.dim},)")
    y = bundle.qf_chol.T @ lam
    return float(y @ y)
