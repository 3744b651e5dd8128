# tests/test_learners.py
import math

import numpy as np
import pytest

from graph_model.network import IntruderSet, uniform_weights
from gramian.privacy_cost import CostWindow, exact_gradient
from online_opt.hindsight import fit_log_regret, hindsight_optimum
from online_opt.learners import (
    cholesky_rank_one_update,
    diameter_bound,
    estimate_constants,
    init_learner,
    ogd_step,
    ons_step,
)
from online_opt.projection import FeasibleSet
from utils.errors import EmptyEdgeSet

SEG = FeasibleSet(dimension=2, lower=0.01, upper=0.99)
K0 = IntruderSet((0,))


class TestConstants:
    """Diameter and gradient bound."""

    def test_segment_diameter(self):
        assert diameter_bound(SEG) == pytest.approx(math.sqrt(2) * 0.98, rel=1e-15)

    def test_singleton_diameter(self):
        assert diameter_bound(FeasibleSet(1, 0.01, 0.99)) == 0.0

    def test_diameter_bounds_vertex_distances(self):
        fs = FeasibleSet(4, 0.1, 0.4)
        # vertices: two coordinates at 0.4, two at 0.1
        v1, v2 = np.array([0.4, 0.4, 0.1, 0.1]), np.array([0.1, 0.1, 0.4, 0.4])
        assert diameter_bound(fs) >= np.linalg.norm(v1 - v2) - 1e-15

    def test_empty_edge_set(self, single_node):
        with pytest.raises(EmptyEdgeSet):
            estimate_constants(single_node, FeasibleSet.from_graph(single_node), K0, CostWindow(0.5, 0.5))

    def test_estimate_on_path(self, path3):
        fs = FeasibleSet.from_graph(path3)
        window = CostWindow(0.5, 0.5)
        G, D = estimate_constants(path3, fs, K0, window, samples=8, safety=2.0, seed=3)
        assert D == pytest.approx(math.sqrt(2) * 0.98)
        g0 = exact_gradient(path3, uniform_weights(path3), K0, window)
        assert G >= 2.0 * np.linalg.norm(g0) * (1 - 1e-9)
        assert (G, D) == estimate_constants(path3, fs, K0, window, samples=8, safety=2.0, seed=3)

    def test_rejects_bad_arguments(self, path3):
        fs = FeasibleSet.from_graph(path3)
        with pytest.raises(ValueError):
            estimate_constants(path3, fs, K0, CostWindow(0.5, 0.5), samples=0)
        with pytest.raises(ValueError):
            estimate_constants(path3, fs, K0, CostWindow(0.5, 0.5), safety=0.5)


class TestLearnerState:
    """beta, epsilon and the accumulator."""

    def test_init_invariants(self):
        state = init_learner(SEG, [0.5, 0.5], 1.0, diameter_bound(SEG))
        D = diameter_bound(SEG)
        assert state.beta == 1.0 / (8.0 * 1.0 * D)
        assert state.epsilon_reg == pytest.approx(1.0 / (state.beta ** 2 * D ** 2), rel=1e-14)
        np.testing.assert_allclose(state.accumulator, state.epsilon_reg * np.eye(2))
        assert state.iteration == 1

    def test_singleton_short_circuits(self):
        fs = FeasibleSet(1, 0.01, 0.99)
        state = init_learner(fs, [1.0], 1.0, 0.0)
        assert state.is_degenerate and state.beta == math.inf
        nxt = ons_step(state, [3.0])
        np.testing.assert_array_equal(nxt.current_point, [1.0])
        assert nxt.iteration == 2

    def test_cholesky_update_matches_refactorization(self, rng):
        for m in (1, 2, 5, 9):
            B = rng.standard_normal((m, m))
            A = B @ B.T + np.eye(m)
            v = rng.standard_normal(m)
            L = cholesky_rank_one_update(np.linalg.cholesky(A), v)
            np.testing.assert_allclose(L @ L.T, A + np.outer(v, v), rtol=1e-12, atol=1e-12)
            assert np.allclose(L, np.tril(L))


class TestOnsStep:
    """Newton steps with rank-1 accumulator growth."""

    def test_zero_gradient_is_fixpoint(self):
        state = init_learner(SEG, [0.4, 0.6], 1.0, diameter_bound(SEG))
        nxt = ons_step(state, [0.0, 0.0])
        np.testing.assert_array_equal(nxt.current_point, [0.4, 0.6])
        assert nxt.iteration == 2

    def test_first_step_by_hand(self):
        G, D = 1.0, diameter_bound(SEG)
        state = init_learner(SEG, [0.5, 0.5], G, D)
        g = np.array([0.1, -0.1])
        beta = 1.0 / (8 * G * D)
        eps = 1.0 / (beta * beta * D * D)
        # g is an eigenvector of eps·I + g g^T with eigenvalue eps + |g|^2
        expected = np.array([0.5, 0.5]) - g / (beta * (eps + g @ g))
        nxt = ons_step(state, g)
        np.testing.assert_allclose(nxt.current_point, expected, rtol=1e-13)
        np.testing.assert_allclose(nxt.accumulator, eps * np.eye(2) + np.outer(g, g))

    def test_repeated_gradient_shrinks_step(self):
        state = init_learner(SEG, [0.5, 0.5], 1.0, diameter_bound(SEG))
        g = np.array([0.1, -0.1])
        s1 = ons_step(state, g)
        s2 = ons_step(s1, g)
        step1 = np.linalg.norm(s1.current_point - state.current_point)
        step2 = np.linalg.norm(s2.current_point - s1.current_point)
        assert 0 < step2 < step1
        d1 = s1.current_point - state.current_point
        d2 = s2.current_point - s1.current_point
        assert d2 @ s2.accumulator @ d2 < d1 @ s1.accumulator @ d1

    def test_invariants_along_random_run(self, rng):
        fs = FeasibleSet(5, 0.02, 0.5)
        state = init_learner(fs, fs.barycenter(), 2.0, diameter_bound(fs))
        logdet = np.linalg.slogdet(state.accumulator)[1]
        for _ in range(40):
            state = ons_step(state, rng.normal(0.0, 1.0, 5))
            A = state.accumulator
            np.testing.assert_allclose(A, A.T, atol=0)
            assert np.linalg.eigvalsh(A)[0] >= state.epsilon_reg - 1e-12 * state.epsilon_reg
            new_logdet = np.linalg.slogdet(A)[1]
            assert new_logdet >= logdet
            logdet = new_logdet
            np.testing.assert_allclose(state.factor @ state.factor.T, A, rtol=1e-11, atol=1e-9)
            assert fs.contains(state.current_point, 1e-9)


class TestOgdStep:
    """Projected gradient steps."""

    def test_zero_gradient_is_fixpoint(self):
        state = init_learner(SEG, [0.3, 0.7], 1.0, diameter_bound(SEG))
        np.testing.assert_array_equal(ogd_step(state, [0.0, 0.0]).current_point, [0.3, 0.7])

    def test_normal_direction_is_removed(self):
        fs = FeasibleSet(3, 0.01, 0.99)
        w = np.array([0.5, 0.3, 0.2])
        state = init_learner(fs, w, 1.0, diameter_bound(fs))
        np.testing.assert_allclose(ogd_step(state, [0.4, 0.4, 0.4]).current_point, w, atol=1e-12)

    def test_default_step_size(self):
        state = init_learner(SEG, [0.5, 0.5], 2.0, diameter_bound(SEG))
        g = np.array([0.05, -0.05])
        eta = diameter_bound(SEG) / 2.0
        np.testing.assert_allclose(ogd_step(state, g).current_point, [0.5 - eta * 0.05, 0.5 + eta * 0.05], rtol=1e-13)

    def test_matches_ons_when_accumulator_is_isotropic(self):
        G, D = 1.0, diameter_bound(SEG)
        state = init_learner(SEG, [0.5, 0.5], G, D)
        g = np.array([0.1, -0.1])
        eta = 1.0 / (state.beta * (state.epsilon_reg + g @ g))
        a = ons_step(state, g).current_point
        b = ogd_step(state, g, step_size_rule=lambda s: eta).current_point
        np.testing.assert_allclose(a, b, rtol=1e-13)

    def test_approaches_hindsight_on_path(self, path3):
        fs = FeasibleSet.from_graph(path3)
        window = CostWindow(0.0, 0.5)
        w_star, _ = hindsight_optimum(path3, fs, [(K0, window)] * 10)
        G, D = estimate_constants(path3, fs, K0, window, samples=8)
        state = init_learner(fs, fs.barycenter(), G, D)
        dist = [np.linalg.norm(state.current_point - w_star)]
        for _ in range(30):
            g = exact_gradient(path3, state.current_point, K0, window)
            state = ogd_step(state, g)
            dist.append(np.linalg.norm(state.current_point - w_star))
        assert all(b <= a + 1e-9 for a, b in zip(dist, dist[1:]))
        assert dist[-1] <= 1e-3


class TestSurrogateQuadratics:
    """ONS regret on a known-optimum quadratic sequence."""

    def test_logarithmic_regret(self):
        fs = FeasibleSet(3, 0.01, 0.99)
        target = np.array([0.5, 0.3, 0.2])
        D = diameter_bound(fs)
        state = init_learner(fs, np.array([0.1, 0.1, 0.8]), 2.0 * D, D)
        costs = []
        for _ in range(200):
            e = state.current_point - target
            costs.append(float(e @ e))
            state = ons_step(state, 2.0 * e)
        regret = np.cumsum(costs)  # hindsight optimum costs 0 every step
        curve = list(zip(range(1, 201), regret))
        fit = fit_log_regret(curve)
        assert fit.coefficient > 0
        ratio = regret / np.arange(1, 201)
        assert np.all(np.diff(ratio[19:]) < 0)
