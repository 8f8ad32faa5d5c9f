"""Sampler correctness: slice behavior, NUTS dynamics, conjugate updates and
the chain driver, against rejection-sampling and analytic oracles."""

import numpy as np
import pytest
from scipy import stats

import coxint as cx
from coxint import samplers


def rejection_truncated_gaussian(cov, n, rng):
    """Oracle draws from N(0, cov) conditioned on the positive orthant."""
    L = np.linalg.cholesky(cov)
    out = []
    while sum(len(o) for o in out) < n:
        z = rng.standard_normal((4 * n, cov.shape[0])) @ L.T
        out.append(z[np.all(z > 0.0, axis=1)])
    return np.concatenate(out)[:n]


def batch_mcse(draws, n_batches=20):
    n = draws.shape[0] // n_batches
    means = draws[: n * n_batches].reshape(n_batches, n, -1).mean(axis=1)
    return means.std(axis=0, ddof=1) / np.sqrt(n_batches)


class TestEssStep:
    def test_slab_likelihood_confines_draws(self):
        rng = np.random.default_rng(0)
        chol = np.linalg.cholesky(np.array([[1.0, 0.3], [0.3, 1.0]]))

        def loglik(x):
            return 0.0 if abs(x[0] - 0.5) < 0.3 else -np.inf

        state = np.array([0.5, 0.0])
        ll = loglik(state)
        for _ in range(500):
            state, ll, _ = samplers.ess_step(state, chol, loglik, rng, cur_loglik=ll)
            assert abs(state[0] - 0.5) < 0.3

    def test_deterministic_under_seed(self):
        chol = np.eye(3)
        loglik = lambda x: 0.0 if x.min() > -5 else -np.inf
        out = []
        for _ in range(2):
            rng = np.random.default_rng(123)
            s, _, _ = samplers.ess_step(np.ones(3), chol, loglik, rng)
            out.append(s)
        assert np.array_equal(out[0], out[1])

    def test_requires_finite_start(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ValueError):
            samplers.ess_step(np.ones(2), np.eye(2), lambda x: -np.inf, rng)

    def test_positive_orthant_marginals_match_rejection(self):
        cov = np.array([[1.0, 0.6], [0.6, 1.0]])
        chol = np.linalg.cholesky(cov)
        rng = np.random.default_rng(11)
        oracle = rejection_truncated_gaussian(cov, 20_000, rng)

        def loglik(x):
            return 0.0 if x.min() > 0.0 else -np.inf

        state = np.array([0.5, 0.5])
        ll = 0.0
        draws = np.empty((20_000, 2))
        for i in range(2_000):
            state, ll, _ = samplers.ess_step(state, chol, loglik, rng, cur_loglik=ll)
        for i in range(20_000):
            for _ in range(5):
                state, ll, _ = samplers.ess_step(state, chol, loglik, rng, cur_loglik=ll)
            draws[i] = state
        for j in range(2):
            p = stats.ks_2samp(draws[:, j], oracle[:, j]).pvalue
            assert p > 0.01


class TestNuts:
    def test_leapfrog_conserves_energy_on_quadratic(self):
        def f(x):
            return -0.5 * float(x @ x), -x

        rng = np.random.default_rng(1)
        pos = rng.standard_normal(4)
        mom = rng.standard_normal(4)
        lp, grad = f(pos)
        h0 = -lp + 0.5 * float(mom @ mom)
        for _ in range(100):
            pos, mom, lp, grad = samplers.leapfrog(f, pos, mom, grad, 1e-3)
        h1 = -lp + 0.5 * float(mom @ mom)
        assert abs(h1 - h0) <= 1e-6

    def test_standard_gaussian_mean(self):
        def f(x):
            return -0.5 * float(x @ x), -x

        rng = np.random.default_rng(2)
        eps = samplers.find_reasonable_epsilon(f, np.zeros(2), rng)
        da = samplers.DualAveraging(eps, target=0.8)
        state = np.zeros(2)
        for i in range(500):
            state, info = samplers.nuts_step(state, f, da.eps, rng)
            da.update(info["alpha"] / info["n_alpha"])
        step = da.adapted
        draws = np.empty((20_000, 2))
        for i in range(20_000):
            state, info = samplers.nuts_step(state, f, step, rng)
            draws[i] = state
        mcse = batch_mcse(draws)
        assert np.all(np.abs(draws.mean(axis=0)) <= 3.0 * mcse)
        # second moment sanity
        np.testing.assert_allclose(draws.var(axis=0), 1.0, rtol=0.1)

    def test_deterministic_under_seed(self):
        def f(x):
            return -0.5 * float(x @ x), -x

        out = []
        for _ in range(2):
            rng = np.random.default_rng(7)
            state = np.array([0.3, -0.2])
            for _ in range(50):
                state, _ = samplers.nuts_step(state, f, 0.5, rng)
            out.append(state)
        assert np.array_equal(out[0], out[1])

    def test_divergence_recorded_and_state_kept(self):
        # a cliff: the step explodes the energy immediately
        def f(x):
            if x[0] > 1.0:
                return -1e9, np.zeros(1)
            return 0.0, np.zeros(1)

        rng = np.random.default_rng(3)
        state, info = samplers.nuts_step(np.array([0.999]), f, 10.0, rng)
        assert info["divergent"]


class TestGibbsTheta:
    def _bundle(self, m=3, T=2.0, seed=4):
        rng = np.random.default_rng(seed)
        return cx.build_bm_bundle(np.sort(rng.uniform(0.1, T - 0.1, m)), T)

    def test_posterior_params_formula(self):
        b = self._bundle(m=3)
        prior = cx.GammaPrior(0.1, 0.1)
        lam = np.ones(4)
        qf = cx.quadratic_form(b, lam)
        lam_scaled = lam * np.sqrt(4.0 / qf)
        shape, rate = cx.gamma_posterior_params(lam_scaled, b, prior)
        assert shape == pytest.approx(2.1, rel=1e-12)
        assert rate == pytest.approx(2.1, rel=1e-9)

    def test_zero_state_leaves_prior_rate(self):
        b = self._bundle(m=5, T=3.0)
        shape, rate = cx.gamma_posterior_params(np.zeros(6), b, cx.GammaPrior(0.1, 0.1))
        assert shape == pytest.approx(0.1 + 3.0)
        assert rate == pytest.approx(0.1)

    def test_scaling_coherence(self):
        # doubling is exact in binary floating point
        b = self._bundle(m=6, T=4.0, seed=5)
        prior = cx.GammaPrior(0.1, 0.1)
        rng = np.random.default_rng(6)
        lam = rng.uniform(0.5, 2.0, b.dim)
        _, rate1 = cx.gamma_posterior_params(lam, b, prior)
        _, rate2 = cx.gamma_posterior_params(2.0 * lam, b, prior)
        assert rate2 - prior.beta == 4.0 * (rate1 - prior.beta)

    def test_moments_match_conjugate_law(self):
        b = self._bundle(m=12, T=5.0, seed=7)
        prior = cx.GammaPrior(0.1, 0.1)
        rng = np.random.default_rng(8)
        lam = rng.uniform(0.5, 3.0, b.dim)
        shape, rate = cx.gamma_posterior_params(lam, b, prior)
        draws = np.array([cx.gibbs_theta(lam, b, prior, rng) for _ in range(20_000)])
        assert draws.mean() == pytest.approx(shape / rate, rel=0.02)
        assert draws.var(ddof=1) == pytest.approx(shape / rate**2, rel=0.05)


class TestRunChain:
    def _dataset(self, seed=0, n_grid=30):
        rng = np.random.default_rng(seed)
        truth = cx.benchmark_lambda2()
        events = cx.simulate_thinning(truth, rng)
        return cx.Dataset(
            domain=truth.domain, events=events, grid=cx.midpoint_grid(truth.domain, n_grid)
        ), truth

    def test_zero_length_chain(self):
        data, _ = self._dataset()
        cfg = cx.ChainConfig(n_burnin=5, n_samples=0, seed=1)
        s = cx.run_chain(data, cx.bm(1.0), cfg)
        assert s.lam_draws.shape == (0, data.layout.dim)
        assert s.theta_draws.shape == (0,)

    def test_deterministic_under_seed(self):
        data, _ = self._dataset()
        cfg = cx.ChainConfig(n_burnin=50, n_samples=100, seed=9)
        a = cx.run_chain(data, cx.bm(1.0), cfg)
        b = cx.run_chain(data, cx.bm(1.0), cfg)
        assert np.array_equal(a.lam_draws, b.lam_draws)
        assert np.array_equal(a.theta_draws, b.theta_draws)

    def test_all_draws_strictly_positive(self):
        data, _ = self._dataset(seed=2)
        cfg = cx.ChainConfig(n_burnin=200, n_samples=500, seed=3)
        s = cx.run_chain(data, cx.bm(1.0), cfg)
        assert s.lam_draws.min() > 0.0
        assert np.all(s.theta_draws > 0.0)

    def test_fixed_kernel_runs_without_theta(self):
        data, _ = self._dataset(seed=4, n_grid=15)
        cfg = cx.ChainConfig(n_burnin=100, n_samples=200, seed=5)
        s = cx.run_chain(data, cx.se(4.0, 1.0), cfg)
        assert s.theta_draws is None
        assert s.lam_draws.shape[0] == 200

    def test_thinning_stride(self):
        data, _ = self._dataset(seed=6, n_grid=10)
        cfg = cx.ChainConfig(n_burnin=10, n_samples=50, thin=4, seed=7)
        s = cx.run_chain(data, cx.bm(1.0), cfg)
        assert s.lam_draws.shape == (50, data.layout.dim)
        assert s.diagnostics["n_sweeps"] == 10 + 200

    def test_bad_init_is_guided(self):
        data, _ = self._dataset(seed=8, n_grid=5)
        cfg = cx.ChainConfig(n_burnin=5, n_samples=5, init=np.zeros(data.layout.dim))
        with pytest.raises(RuntimeError, match="positive"):
            cx.run_chain(data, cx.bm(1.0), cfg)

    @pytest.mark.slow
    def test_ess_and_nuts_agree(self):
        rng = np.random.default_rng(12)
        truth = cx.benchmark_lambda1()
        events = cx.simulate_thinning(truth, rng)
        data = cx.Dataset(
            domain=truth.domain, events=events, grid=cx.midpoint_grid(truth.domain, 100)
        )
        kernel = cx.se(1.0, 0.05)
        ess = cx.run_chain(data, kernel, cx.ChainConfig(n_burnin=2000, n_samples=12000, seed=1))
        nuts = cx.run_chain(
            data, kernel,
            cx.ChainConfig(n_burnin=1500, n_samples=4000, sampler="nuts", seed=2),
        )
        gs = data.layout.grid_slice
        med_e = np.median(ess.lam_draws[:, gs], axis=0)
        med_n = np.median(nuts.lam_draws[:, gs], axis=0)
        q = np.quantile(ess.lam_draws[:, gs], [0.025, 0.975], axis=0)
        width = float(np.mean(q[1] - q[0]))
        assert np.max(np.abs(med_e - med_n)) <= 0.15 * width
