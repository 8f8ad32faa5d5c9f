"""Closed-form kernel integrals and the joint law of values and integrals.

A Gaussian process with an integrable kernel induces an exact joint Gaussian
law on its values at a few points together with its integral over the domain.
This script evaluates the closed forms, checks one of them against adaptive
quadrature, and confirms the joint covariance against brute-force Monte Carlo
over simulated paths.
"""

import numpy as np
from scipy.integrate import quad

import coxint as cx

# pointwise kernels ---------------------------------------------------------

se = cx.se(theta0=1.0, theta1=2.0)
bm = cx.bm(theta=0.5)
print("squared exponential k(0.3, 0.9) =", cx.kernel_eval(se, 0.3, 0.9))
print("Brownian motion     k(1.0, 3.0) =", cx.kernel_eval(bm, 1.0, 3.0))

# analytic single integral vs quadrature ------------------------------------

val = cx.kernel_single_integral(se, 0.0, (0.0, 1.0))
ora, _ = quad(lambda t: cx.kernel_eval(se, 0.0, t), 0.0, 1.0)
print(f"\nint_0^1 k_se(0, t) dt = {val:.12f}  (quadrature {ora:.12f})")

# the joint covariance of [f(1), integral of f over [0, 2]] ------------------

ac = cx.build_augmented_covariance(cx.bm(1.0), [1.0], [(0.0, 2.0)])
print("\naugmented covariance for Brownian motion, point x=1, domain [0,2]:")
print(ac.V)

# Monte Carlo confirmation: simulate paths on a fine grid, Riemann-sum them

rng = np.random.default_rng(0)
n_grid, n_paths, T = 2048, 4000, 2.0
t = (np.arange(n_grid) + 0.5) * T / n_grid
L = np.linalg.cholesky(np.minimum(t[:, None], t[None, :]) + 1e-12 * np.eye(n_grid))
paths = rng.standard_normal((n_paths, n_grid)) @ L.T
i1 = np.argmin(np.abs(t - 1.0))
sample = np.column_stack([paths[:, i1], paths.sum(axis=1) * T / n_grid])
print("\nempirical covariance over", n_paths, "simulated paths:")
print(sample.T @ sample / n_paths)
