"""Densities, posterior means and samplers against independent oracles.

Closed forms are checked three ways: frozen hand arithmetic, exhaustive
enumeration (densities must sum to one), and numerical integration of the
prior-times-likelihood definition of a posterior mean.
"""

import itertools

import numpy as np
import pytest
from scipy import integrate

from idgp.distributions import (
    PARAM_FLOOR,
    Z_EPS,
    bernoulli_vec_log_density,
    beta_log_density,
    beta_posterior_mean,
    beta_posterior_mean_grads,
    categorical_log_density,
    check_simplex,
    clamp_z,
    dirichlet_log_density,
    dirichlet_posterior_mean,
    dirichlet_posterior_mean_jacobian,
    floor_params,
    sample_bernoulli_vec,
    sample_categorical,
)


class TestCategorical:
    def test_hand_value(self):
        theta = np.array([0.5, 0.3, 0.2])
        assert categorical_log_density(np.array([1.0, 0, 0]), theta) == pytest.approx(
            np.log(0.5), rel=1e-12)

    def test_uniform_symmetry(self):
        theta = np.full(4, 0.25)
        for j in range(4):
            l = np.zeros(4)
            l[j] = 1.0
            assert categorical_log_density(l, theta) == pytest.approx(np.log(0.25))

    def test_enumeration_sums_to_one(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            c = int(rng.integers(2, 7))
            theta = rng.dirichlet(np.ones(c))
            total = 0.0
            for j in range(c):
                l = np.zeros(c)
                l[j] = 1.0
                total += np.exp(categorical_log_density(l, theta))
            assert total == pytest.approx(1.0, abs=1e-12)

    def test_rejects_non_one_hot(self):
        with pytest.raises(ValueError):
            categorical_log_density(np.array([1.0, 1.0]), np.array([0.5, 0.5]))


class TestBernoulliVec:
    def test_hand_value(self):
        val = bernoulli_vec_log_density(np.array([1.0, 0.0]), np.array([0.2, 0.4]))
        assert val == pytest.approx(np.log(0.2) + np.log(0.6), rel=1e-12)

    def test_half_symmetry(self):
        z = np.full(5, 0.5)
        for s in (np.zeros(5), np.ones(5), np.array([1, 0, 1, 0, 1.0])):
            assert bernoulli_vec_log_density(s, z) == pytest.approx(5 * np.log(0.5))

    @pytest.mark.parametrize("c", [2, 5, 10])
    def test_enumeration_sums_to_one(self, c):
        rng = np.random.default_rng(c)
        z = rng.uniform(0.05, 0.95, size=c)
        total = sum(
            np.exp(bernoulli_vec_log_density(np.array(bits, dtype=float), z))
            for bits in itertools.product([0, 1], repeat=c))
        assert total == pytest.approx(1.0, abs=1e-12)

    def test_rejects_non_binary(self):
        with pytest.raises(ValueError):
            bernoulli_vec_log_density(np.array([0.5]), np.array([0.5]))


class TestPosteriorMeans:
    def test_dirichlet_hand_values(self):
        out = dirichlet_posterior_mean(np.array([2.0, 1, 1]), np.array([1.0, 0, 0]))
        assert np.allclose(out, [0.6, 0.2, 0.2], rtol=1e-12)
        out = dirichlet_posterior_mean(np.ones(3), np.zeros(3))
        assert np.allclose(out, [1 / 3] * 3, rtol=1e-12)
        out = dirichlet_posterior_mean(np.ones(3), np.array([1.0, 1, 0]))
        assert np.allclose(out, [0.4, 0.4, 0.2], rtol=1e-12)

    def test_beta_hand_values(self):
        assert beta_posterior_mean(2.0, 3.0, 1.0) == pytest.approx(0.5, rel=1e-12)
        assert beta_posterior_mean(7.0, 7.0, 0.0) == pytest.approx(0.5, rel=1e-12)
        assert beta_posterior_mean(1.0, 1.0, 1.0) == pytest.approx(2 / 3, rel=1e-12)

    def test_dirichlet_output_on_simplex(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            c = int(rng.integers(2, 9))
            lam = rng.uniform(1e-6, 50.0, size=c)
            o = (rng.random(c) < 0.4).astype(float)
            theta = dirichlet_posterior_mean(lam, o)
            check_simplex(theta, atol=1e-9)

    def test_beta_output_strictly_inside(self):
        rng = np.random.default_rng(2)
        alpha = rng.uniform(1e-6, 50.0, size=1000)
        beta = rng.uniform(1e-6, 50.0, size=1000)
        o = (rng.random(1000) < 0.5).astype(float)
        z = beta_posterior_mean(alpha, beta, o)
        assert np.all(z > 0.0) and np.all(z < 1.0)

    def test_rejects_nonpositive_parameters(self):
        with pytest.raises(ValueError):
            dirichlet_posterior_mean(np.array([0.0, 1.0]), np.zeros(2))
        with pytest.raises(ValueError):
            beta_posterior_mean(1.0, -1.0, 0.0)


class TestConjugacyOracles:
    """Posterior means vs numerical integration of prior * likelihood."""

    def test_dirichlet_two_class_quadrature(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            lam = rng.uniform(0.8, 5.0, size=2)
            for y in (0, 1):
                l = np.zeros(2)
                l[y] = 1.0

                def weight(t1):
                    prior = t1 ** (lam[0] - 1) * (1 - t1) ** (lam[1] - 1)
                    return prior * (t1 if y == 0 else (1 - t1))

                norm, _ = integrate.quad(weight, 0.0, 1.0, epsabs=1e-13)
                mean1, _ = integrate.quad(lambda t: t * weight(t), 0.0, 1.0,
                                          epsabs=1e-13)
                expected = mean1 / norm
                got = dirichlet_posterior_mean(lam, l)[0]
                assert got == pytest.approx(expected, abs=1e-8)

    def test_beta_quadrature_one_observation(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            a, b = rng.uniform(0.8, 5.0, size=2)
            for obs in (0.0, 1.0):
                def weight(z):
                    prior = z ** (a - 1) * (1 - z) ** (b - 1)
                    # obs=1 is one Bernoulli success; obs=0 is no observation
                    return prior * (z if obs == 1.0 else 1.0)

                norm, _ = integrate.quad(weight, 0.0, 1.0, epsabs=1e-13)
                mean, _ = integrate.quad(lambda z: z * weight(z), 0.0, 1.0,
                                         epsabs=1e-13)
                assert beta_posterior_mean(a, b, obs) == pytest.approx(
                    mean / norm, abs=1e-10)

    def test_dirichlet_monte_carlo_c5(self):
        rng = np.random.default_rng(5)
        lam = rng.uniform(1.0, 4.0, size=5)
        y = 2
        draws = rng.dirichlet(lam, size=10 ** 6)
        weights = draws[:, y]
        estimate = (draws * weights[:, None]).sum(axis=0) / weights.sum()
        l = np.zeros(5)
        l[y] = 1.0
        got = dirichlet_posterior_mean(lam, l)
        assert np.max(np.abs(got - estimate)) < 1e-2


class TestJacobians:
    def test_dirichlet_jacobian_formula(self):
        lam = np.array([2.0, 1.0, 0.5])
        o = np.array([1.0, 0.0, 1.0])
        denom = (lam + o).sum()
        theta = (lam + o) / denom
        jac = dirichlet_posterior_mean_jacobian(lam, o)
        expected = (np.eye(3) - theta[:, None]) / denom
        assert np.allclose(jac, expected, rtol=1e-14)

    def test_beta_grads_formula(self):
        alpha, beta, o = np.array([2.0]), np.array([3.0]), np.array([1.0])
        da, db = beta_posterior_mean_grads(alpha, beta, o)
        assert da[0] == pytest.approx(3.0 / 36.0, rel=1e-14)
        assert db[0] == pytest.approx(-3.0 / 36.0, rel=1e-14)


class TestFullDensities:
    def test_uniform_dirichlet_zero(self):
        for theta in ([0.3, 0.7], [0.9, 0.1]):
            assert dirichlet_log_density(np.array(theta), np.ones(2)) == pytest.approx(
                0.0, abs=1e-14)

    def test_dirichlet_hand_value(self):
        val = dirichlet_log_density(np.array([0.5, 0.5]), np.array([2.0, 1.0]))
        assert val == pytest.approx(np.log(2 * 0.5), abs=1e-14)

    def test_dirichlet_integrates_to_one_c2(self):
        lam = np.array([2.5, 1.7])
        total, _ = integrate.quad(
            lambda t: np.exp(dirichlet_log_density(np.array([t, 1 - t]), lam)),
            0.0, 1.0, epsabs=1e-12)
        assert total == pytest.approx(1.0, abs=1e-8)

    def test_dirichlet_integrates_to_one_c3(self):
        lam = np.array([2.0, 3.0, 2.5])
        n = 600
        ts = (np.arange(n) + 0.5) / n
        total = 0.0
        for t1 in ts:
            t2 = ts * (1 - t1)
            vals = [np.exp(dirichlet_log_density(
                np.array([t1, v, 1 - t1 - v]), lam)) for v in t2]
            total += np.trapezoid(vals, t2) / n
        assert total == pytest.approx(1.0, abs=1e-3)

    def test_beta_log_density(self):
        assert beta_log_density(0.3, 1.0, 1.0) == pytest.approx(0.0, abs=1e-14)
        assert beta_log_density(0.5, 2.0, 2.0) == pytest.approx(np.log(1.5), abs=1e-14)
        total, _ = integrate.quad(
            lambda z: np.exp(beta_log_density(z, 2.3, 3.1)), 0.0, 1.0, epsabs=1e-12)
        assert total == pytest.approx(1.0, abs=1e-8)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            beta_log_density(1.5, 1.0, 1.0)
        with pytest.raises(ValueError):
            dirichlet_log_density(np.array([0.6, 0.6]), np.ones(2))


class TestSamplers:
    def test_degenerate_categorical(self):
        rng = np.random.default_rng(6)
        theta = np.array([1.0 - 2e-9, 1e-9, 1e-9])
        assert all(sample_categorical(theta, rng) == 0 for _ in range(100))

    def test_near_zero_bernoulli(self):
        rng = np.random.default_rng(7)
        z = np.full(6, 1e-9)
        draws = np.array([sample_bernoulli_vec(z, rng) for _ in range(1000)])
        assert draws.sum() == 0

    def test_categorical_frequencies_within_3_sigma(self):
        rng = np.random.default_rng(8)
        theta = np.array([0.6, 0.2, 0.2])
        n = 10 ** 5
        counts = np.zeros(3)
        for _ in range(n):
            counts[sample_categorical(theta, rng)] += 1
        freq = counts / n
        band = 3 * np.sqrt(theta * (1 - theta) / n)
        assert np.all(np.abs(freq - theta) <= band)

    def test_bernoulli_frequencies_within_3_sigma(self):
        rng = np.random.default_rng(9)
        z = np.array([0.1, 0.5, 0.9])
        n = 10 ** 5
        draws = rng.random((n, 3)) < z  # same scheme as the sampler
        got = np.array([sample_bernoulli_vec(z, np.random.default_rng(9))])
        freq = draws.mean(axis=0)
        band = 3 * np.sqrt(z * (1 - z) / n)
        assert np.all(np.abs(freq - z) <= band)
        assert got.shape == (1, 3)


class TestClamps:
    def test_floor(self):
        out = floor_params(np.array([0.0, 1e-12, 2.0]))
        assert np.all(out >= PARAM_FLOOR)
        assert out[2] == 2.0

    def test_z_clamp(self):
        out = clamp_z(np.array([0.0, 0.5, 1.0]))
        assert out[0] == Z_EPS and out[2] == 1.0 - Z_EPS and out[1] == 0.5
