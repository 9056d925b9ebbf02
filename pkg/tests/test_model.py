"""Tests for the market model: validation, outcome weights, losses, gradients and the xi drift."""
import numpy as np
import pytest

from conftest import figure_market
from model import (
    DimensionError,
    MarketSpec,
    SpecValidationError,
    decoupled_loss,
    effective_outcome_weights,
    gradient,
    grad_profile,
    make_profile,
    permute_coordinates,
    symmetric_profile,
    total_loss,
    total_loss_gradient,
    uniform_profile,
    xi,
)


class TestMarketSpec:
    def test_derived_quantities(self, market):
        assert market.d == 2
        assert market.n == 1
        assert market.L_n == 14.0
        np.testing.assert_array_equal(market.b, market.A @ market.theta0 + market.c)

    def test_arrays_are_read_only(self, market):
        with pytest.raises(ValueError):
            market.A[0, 0] = 1.0

    def test_rejects_asymmetric_matrix(self):
        with pytest.raises(SpecValidationError, match="not symmetric"):
            MarketSpec(lam=[1.0], theta0=[0.0, 0.0], A=[[1.0, 0.5], [0.0, 1.0]], c=[0.0, 0.0])

    def test_rejects_indefinite_matrix(self):
        with pytest.raises(SpecValidationError, match="positive definite"):
            MarketSpec(lam=[1.0], theta0=[0.0, 0.0], A=[[1.0, 2.0], [2.0, 1.0]], c=[0.0, 0.0])

    def test_rejects_nonpositive_influence(self):
        with pytest.raises(SpecValidationError, match="lambda"):
            MarketSpec(lam=[1.0, 0.0], theta0=[0.0, 0.0], A=np.eye(2), c=[0.0, 0.0])

    def test_rejects_single_feature(self):
        with pytest.raises(SpecValidationError):
            MarketSpec(lam=[1.0], theta0=[0.0], A=[[1.0]], c=[0.0])

    def test_collects_every_error(self):
        with pytest.raises(SpecValidationError) as excinfo:
            MarketSpec(lam=[-1.0], theta0=[0.0, 0.0], A=np.eye(2), c=[0.0, 0.0], sigma0_sq=-1.0)
        assert len(excinfo.value.errors) == 2

    def test_with_lambda(self, market):
        other = market.with_lambda([1.4])
        assert other.L_n == 1.4
        np.testing.assert_array_equal(other.A, market.A)

    def test_permute_coordinates(self, market):
        swapped = permute_coordinates(market, [1, 0])
        np.testing.assert_array_equal(swapped.A, np.diag([7.0, 3.0]))
        with pytest.raises(DimensionError):
            permute_coordinates(market, [0, 0])


class TestProfiles:
    def test_make_profile_validates_rows(self, market):
        with pytest.raises(SpecValidationError, match="sum"):
            make_profile(market, [[0.5, 0.6]])
        with pytest.raises(SpecValidationError, match="negative"):
            make_profile(market, [[1.5, -0.5]])

    def test_boundary_rows_are_warnings_unless_interior_required(self, market):
        make_profile(market, [[1.0, 0.0]])
        with pytest.raises(SpecValidationError, match="boundary"):
            make_profile(market, [[1.0, 0.0]], require_interior=True)

    def test_shape_mismatch(self, market):
        with pytest.raises(SpecValidationError, match="shape"):
            make_profile(market, [[0.5, 0.5], [0.5, 0.5]])
        with pytest.raises(DimensionError):
            effective_outcome_weights(market, [[0.2, 0.3, 0.5]])

    def test_symmetric_and_uniform(self):
        spec = figure_market(n=3)
        np.testing.assert_array_equal(symmetric_profile(spec, [0.7, 0.3]), np.tile([0.7, 0.3], (3, 1)))
        np.testing.assert_array_equal(uniform_profile(spec), np.full((3, 2), 0.5))


class TestEffectiveOutcomeWeights:
    def test_zero_base_model(self):
        spec = MarketSpec(lam=[1.0], theta0=[0.0, 0.0], A=np.eye(2), c=[0.0, 0.0])
        np.testing.assert_allclose(effective_outcome_weights(spec, [[0.5, 0.5]]), [-0.5, -0.5])

    def test_figure_market(self, market):
        np.testing.assert_allclose(effective_outcome_weights(market, [[0.7, 0.3]]), [-9.8, -4.2], atol=1e-12)

    def test_exact_cancellation(self):
        spec = MarketSpec(lam=[1.0, 1.0], theta0=[2.0, 0.0], A=np.eye(2), c=[0.0, 0.0])
        np.testing.assert_array_equal(effective_outcome_weights(spec, [[1.0, 0.0], [1.0, 0.0]]), [0.0, 0.0])


class TestLossAndGradient:
    def test_hand_computed_loss(self):
        spec = MarketSpec(lam=[1.0], theta0=[0.0, 0.0], A=np.eye(2), c=[0.0, 0.0], sigma0_sq=1.0)
        assert decoupled_loss(spec, [[0.5, 0.5]], [0.5, 0.5]) == pytest.approx(3.0)

    def test_perfect_predictor_leaves_noise(self):
        spec = MarketSpec(lam=[0.5], theta0=[1.0, 1.0], A=np.diag([2.0, 3.0]), c=[0.0, 0.0], sigma0_sq=0.7)
        deployed = [[0.4, 0.6]]
        predictive = effective_outcome_weights(spec, deployed)
        assert decoupled_loss(spec, deployed, predictive) == pytest.approx(0.7)

    def test_loss_matches_monte_carlo(self):
        spec = MarketSpec(lam=[1.0], theta0=[0.0, 0.0], A=np.eye(2), c=[0.0, 0.0], sigma0_sq=1.0)
        rng = np.random.default_rng(0)
        draws = 4 * 10 ** 6
        x = rng.normal(size=(draws, 2))
        y = x @ effective_outcome_weights(spec, [[0.5, 0.5]]) + rng.normal(size=draws)
        empirical = np.mean((x @ np.array([0.5, 0.5]) - y) ** 2)
        assert empirical == pytest.approx(3.0, abs=1e-2)

    def test_gradient_at_figure_stable_point(self, market):
        np.testing.assert_allclose(gradient(market, [[0.7, 0.3]], [0.7, 0.3]), [63.0, 63.0], atol=1e-12)

    def test_gradient_vanishes_when_b_matches(self):
        A = np.array([[2.0, 0.3], [0.3, 1.0]])
        deployed, predictive = np.array([[0.2, 0.8]]), np.array([0.6, 0.4])
        c = A @ (predictive + 1.5 * deployed[0])
        spec = MarketSpec(lam=[1.5], theta0=[0.0, 0.0], A=A, c=c)
        np.testing.assert_allclose(gradient(spec, deployed, predictive), [0.0, 0.0], atol=1e-14)

    def test_gradient_matches_finite_differences(self, make_random_market, make_random_profile, rng):
        h = 1e-6
        for _ in range(100):
            n, d = int(rng.integers(1, 4)), int(rng.integers(2, 5))
            spec = make_random_market(n, d)
            profile = make_random_profile(n, d)
            predictive = rng.dirichlet(np.ones(d))
            analytic = gradient(spec, profile, predictive)
            numeric = np.array([(decoupled_loss(spec, profile, predictive + h * e)
                                 - decoupled_loss(spec, profile, predictive - h * e)) / (2 * h) for e in np.eye(d)])
            assert np.linalg.norm(numeric - analytic) <= 1e-6 * max(np.linalg.norm(analytic), 1.0)

    def test_gradient_is_affine_in_predictive_model(self, make_random_market, make_random_profile, rng):
        for _ in range(100):
            n, d = int(rng.integers(1, 4)), int(rng.integers(2, 6))
            spec = make_random_market(n, d)
            profile = make_random_profile(n, d)
            first, second = rng.dirichlet(np.ones(d)), rng.dirichlet(np.ones(d))
            difference = gradient(spec, profile, first) - gradient(spec, profile, second)
            np.testing.assert_allclose(difference, 2.0 * spec.A @ (first - second), atol=1e-12)

    def test_relabelling_features_relabels_gradient(self, make_random_market, make_random_profile, rng):
        for _ in range(100):
            n, d = int(rng.integers(1, 4)), int(rng.integers(2, 6))
            spec = make_random_market(n, d)
            profile = make_random_profile(n, d)
            predictive = rng.dirichlet(np.ones(d))
            order = rng.permutation(d)
            relabelled = permute_coordinates(spec, order)
            np.testing.assert_allclose(gradient(relabelled, profile[:, order], predictive[order]),
                                       gradient(spec, profile, predictive)[order], atol=1e-12)
            np.testing.assert_allclose(grad_profile(relabelled, profile[:, order]).grads,
                                       grad_profile(spec, profile).grads[:, order], atol=1e-12)


class TestGradProfile:
    def test_identical_agents_identical_rows(self):
        spec = figure_market(n=4)
        gp = grad_profile(spec, np.tile([0.7, 0.3], (4, 1)))
        np.testing.assert_allclose(gp.grads, np.full((4, 2), 63.0), atol=1e-12)
        np.testing.assert_allclose(gp.averages, np.full(4, 63.0), atol=1e-12)

    def test_single_agent_reduces_to_gradient(self, make_random_market, make_random_profile):
        spec = make_random_market(1, 3)
        profile = make_random_profile(1, 3)
        np.testing.assert_allclose(grad_profile(spec, profile).grads[0], gradient(spec, profile, profile[0]))


class TestXi:
    def test_vanishes_at_stable_point(self, market):
        np.testing.assert_allclose(xi(market, [[0.7, 0.3]]), 0.0, atol=1e-10)

    def test_zero_coordinate_has_zero_drift(self, market):
        assert xi(market, [[1.0, 0.0]])[0, 1] == 0.0

    def test_rows_sum_to_zero_and_match_formula(self, make_random_market, make_random_profile):
        spec = make_random_market(3, 4)
        profile = make_random_profile(3, 4)
        drift = xi(spec, profile)
        np.testing.assert_allclose(drift.sum(axis=1), 0.0, atol=1e-10)
        for i in range(3):
            g = gradient(spec, profile, profile[i])
            np.testing.assert_allclose(drift[i], profile[i] * (profile[i] @ g - g), atol=1e-12)


class TestTotalLoss:
    def test_sum_of_decoupled_losses(self, make_random_market, make_random_profile):
        spec = make_random_market(2, 3)
        profile = make_random_profile(2, 3)
        expected = sum(decoupled_loss(spec, profile, row) for row in profile)
        assert total_loss(spec, profile) == pytest.approx(expected)

    def test_gradient_matches_finite_differences(self, make_random_market, make_random_profile):
        spec = make_random_market(2, 3)
        profile = make_random_profile(2, 3)
        analytic = total_loss_gradient(spec, profile)
        h = 1e-6
        for i in range(2):
            for k in range(3):
                bump = np.zeros_like(profile)
                bump[i, k] = h
                numeric = (total_loss(spec, profile + bump) - total_loss(spec, profile - bump)) / (2 * h)
                assert numeric == pytest.approx(analytic[i, k], rel=1e-6, abs=1e-6)

    def test_scaled_gradient_at_symmetric_profile(self, make_random_market):
        spec = make_random_market(3, 2)
        theta_star = symmetric_profile(spec, [0.3, 0.7])
        grads = grad_profile(spec, theta_star).grads
        scaled = (1.0 + spec.n * spec.lam)[:, None] * grads
        np.testing.assert_allclose(total_loss_gradient(spec, theta_star), scaled, atol=1e-9)
