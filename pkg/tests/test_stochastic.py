"""Tests for sampling, empirical gradients and the stochastic exponentiated-gradient mode."""
import numpy as np
import pytest

from conftest import figure_market
from dynamics import LearningRates, eg_step
from model import MarketSpec, PreconditionError, gradient
from stochastic import (
    _splitmix64,
    empirical_gradient,
    empirical_moments,
    mix_seed,
    run_seed_ensemble,
    sample_batch,
    standard_normals,
    stochastic_eg_step,
    stochastic_simulate,
)


class TestSeeds:
    def test_splitmix_reference_value(self):
        assert _splitmix64(0) == 0xE220A8397B1DCDAF

    def test_children_are_distinct(self):
        keys = {mix_seed(7, step, agent) for step in range(50) for agent in range(4)}
        assert len(keys) == 200
        assert all(0 <= key < 2 ** 64 for key in keys)

    def test_standard_normals_are_reproducible(self):
        np.testing.assert_array_equal(standard_normals(11, 7), standard_normals(11, 7))
        assert standard_normals(11, 7).shape == (7,)
        assert not np.array_equal(standard_normals(11, 8), standard_normals(12, 8))

    def test_standard_normal_moments(self):
        values = standard_normals(2024, 10 ** 6)
        assert abs(values.mean()) < 5e-3
        assert values.var() == pytest.approx(1.0, abs=5e-3)


class TestSampleBatch:
    def test_same_seed_same_batch(self, market):
        first = sample_batch(market, [[0.2, 0.8]], 50, seed=5)
        second = sample_batch(market, [[0.2, 0.8]], 50, seed=5)
        np.testing.assert_array_equal(first.features, second.features)
        np.testing.assert_array_equal(first.outcomes, second.outcomes)

    def test_feature_covariance(self, market):
        A_hat, _ = empirical_moments(sample_batch(market, [[0.2, 0.8]], 10 ** 6, seed=1))
        np.testing.assert_allclose(A_hat, np.diag([3.0, 7.0]), atol=0.05)

    def test_single_sample_moments(self, market):
        batch = sample_batch(market, [[0.2, 0.8]], 1, seed=3)
        A_hat, yx_hat = empirical_moments(batch)
        x = batch.features[0]
        np.testing.assert_allclose(A_hat, np.outer(x, x))
        np.testing.assert_allclose(yx_hat, batch.outcomes[0] * x)

    def test_gradient_moment_form(self, market):
        batch = sample_batch(market, [[0.2, 0.8]], 25, seed=9)
        A_hat, yx_hat = empirical_moments(batch)
        predictive = np.array([0.4, 0.6])
        np.testing.assert_allclose(empirical_gradient(batch, predictive), 2.0 * (A_hat @ predictive - yx_hat),
                                   atol=1e-10)

    def test_empirical_gradient_is_unbiased(self, market):
        deployed, predictive = [[0.2, 0.8]], np.array([0.2, 0.8])
        estimates = np.array([empirical_gradient(sample_batch(market, deployed, 10, seed), predictive)
                              for seed in range(10 ** 4)])
        standard_error = estimates.std(axis=0, ddof=1) / np.sqrt(len(estimates))
        exact = gradient(market, deployed, predictive)
        assert np.all(np.abs(estimates.mean(axis=0) - exact) <= 4.0 * standard_error)

    def test_variance_shrinks_with_batch_size(self, market):
        deployed, predictive = [[0.2, 0.8]], np.array([0.2, 0.8])
        runs = 5000

        def total_variance(m, first_seed):
            estimates = np.array([empirical_gradient(sample_batch(market, deployed, m, seed), predictive)
                                  for seed in range(first_seed, first_seed + runs)])
            return float(estimates.var(axis=0, ddof=1).sum())

        ratio = total_variance(100, runs) / total_variance(10, 0)
        assert 0.07 <= ratio <= 0.14

    def test_preconditions(self, market):
        with pytest.raises(PreconditionError):
            sample_batch(market, [[0.2, 0.8]], 0, seed=1)
        shifted = MarketSpec(lam=[1.0], theta0=[0.0, 0.0], A=np.eye(2), c=[0.5, 0.0])
        with pytest.raises(PreconditionError, match="c = 0"):
            sample_batch(shifted, [[0.2, 0.8]], 10, seed=1)


class TestStochasticStep:
    def test_large_batch_matches_exact_step(self, market):
        rates = LearningRates.uniform(1, 0.001)
        exact = eg_step(market, [[0.2, 0.8]], rates)
        estimated = stochastic_eg_step(market, [[0.2, 0.8]], rates, m=10 ** 6, seed=4)
        np.testing.assert_allclose(estimated, exact, atol=1e-2)

    def test_shared_batch_keeps_identical_agents_together(self):
        spec = figure_market(n=2)
        profile = np.tile([0.2, 0.8], (2, 1))
        rates = LearningRates.uniform(2, 0.01)
        shared = stochastic_eg_step(spec, profile, rates, m=10, seed=8, shared_batch=True)
        independent = stochastic_eg_step(spec, profile, rates, m=10, seed=8)
        np.testing.assert_array_equal(shared[0], shared[1])
        assert not np.array_equal(independent[0], independent[1])


class TestStochasticSimulate:
    def test_reproducible_per_seed(self, market):
        rates = LearningRates.uniform(1, 0.001)
        first = stochastic_simulate(market, [[0.2, 0.8]], rates, T=20, m=10, seed=42)
        second = stochastic_simulate(market, [[0.2, 0.8]], rates, T=20, m=10, seed=42)
        other = stochastic_simulate(market, [[0.2, 0.8]], rates, T=20, m=10, seed=43)
        np.testing.assert_array_equal(first.states, second.states)
        assert not np.array_equal(first.states, other.states)
        assert first.meta == {"seed": 42, "m": 10}
        assert len(first) == 21

    def test_ensemble_keeps_seed_order(self, market):
        rates = LearningRates.uniform(1, 0.001)
        runs = run_seed_ensemble(market, [[0.2, 0.8]], rates, T=5, m=10, seeds=[3, 1, 2])
        assert [run.meta["seed"] for run in runs] == [3, 1, 2]
        single = stochastic_simulate(market, [[0.2, 0.8]], rates, T=5, m=10, seed=1)
        np.testing.assert_array_equal(runs[1].states, single.states)

    def test_parallel_ensemble_matches_serial(self, market):
        rates = LearningRates.uniform(1, 0.05)
        serial = run_seed_ensemble(market, [[0.2, 0.8]], rates, T=5, m=10, seeds=[0, 1])
        parallel = run_seed_ensemble(market, [[0.2, 0.8]], rates, T=5, m=10, seeds=[0, 1], workers=2)
        for left, right in zip(serial, parallel):
            np.testing.assert_array_equal(left.states, right.states)

    def test_rejects_empty_horizon(self, market):
        with pytest.raises(PreconditionError):
            stochastic_simulate(market, [[0.2, 0.8]], LearningRates.uniform(1, 0.01), T=0, m=10, seed=0)
