# tests/test_dynamics.py
import math

import numpy as np
import pytest

from online_opt.projection import FeasibleSet, random_feasible_point
from scenario.dynamics import Trajectory, disagreement, integrate_states, summarize_synchronization
from tests.conftest import random_graphs
from utils.errors import DimensionMismatch, EmptyTrace, NonPositiveStep


class TestIntegrateStates:
    """RK4 trajectories of x' = A(w) x."""

    def test_single_node_decay(self, single_node):
        traj = integrate_states(single_node, np.zeros(0), [1.0], 1.0)
        assert traj.final_state[0] == pytest.approx(math.exp(-1.0), abs=1e-8)
        assert traj.times[0] == 0.0 and traj.times[-1] == 1.0

    def test_two_node_eigenvector(self, two_node):
        traj = integrate_states(two_node, [0.5], [1.0, -1.0], (0.0, 1.0))
        np.testing.assert_allclose(traj.final_state, math.exp(-2.0) * np.array([1.0, -1.0]), atol=1e-8)

    def test_zero_state_stays_zero(self, triangle):
        traj = integrate_states(triangle, [0.2, 0.3, 0.5], np.zeros(3), 2.0)
        np.testing.assert_array_equal(traj.states, 0.0)

    def test_step_lands_on_end_time(self, path3):
        traj = integrate_states(path3, [0.5, 0.5], [1.0, 0.0, 0.0], (0.5, 1.0), step=0.03)
        assert traj.times[-1] == 1.0
        assert np.all(np.diff(traj.times) <= 0.03 + 1e-15)

    def test_empty_span(self, path3):
        traj = integrate_states(path3, [0.5, 0.5], [1.0, 2.0, 3.0], (1.0, 1.0))
        assert len(traj) == 1
        np.testing.assert_array_equal(traj.final_state, [1.0, 2.0, 3.0])

    def test_rejects_bad_arguments(self, path3):
        with pytest.raises(NonPositiveStep):
            integrate_states(path3, [0.5, 0.5], np.ones(3), 1.0, step=0.0)
        with pytest.raises(DimensionMismatch):
            integrate_states(path3, [0.5, 0.5], np.ones(2), 1.0)
        with pytest.raises(ValueError):
            integrate_states(path3, [0.5, 0.5], np.ones(3), (2.0, 1.0))

    def test_norm_decays_at_least_at_unit_rate(self):
        gen = np.random.default_rng(13)
        for g in random_graphs(10, 7, seed=14):
            w = random_feasible_point(FeasibleSet.from_graph(g), gen)
            x0 = gen.standard_normal(g.node_count)
            traj = integrate_states(g, w, x0, 3.0, step=0.01)
            bound = np.exp(-traj.times) * np.linalg.norm(x0) * (1 + 1e-8)
            assert np.all(np.linalg.norm(traj.states, axis=1) <= bound)

    def test_consensus_only_keeps_mean(self, triangle):
        x0 = np.array([3.0, -1.0, 4.0])
        traj = integrate_states(triangle, [0.2, 0.3, 0.5], x0, 5.0, consensus_only=True)
        np.testing.assert_allclose(traj.states.mean(axis=1), x0.mean(), rtol=1e-12)
        assert disagreement(traj.final_state)[0] < disagreement(x0)[0]

    def test_extend(self, path3):
        a = integrate_states(path3, [0.5, 0.5], [1.0, 0.0, 0.0], (0.0, 0.5))
        b = integrate_states(path3, [0.3, 0.7], a.final_state, (0.5, 1.0))
        joined = a.extend(b)
        assert len(joined) == len(a) + len(b) - 1
        np.testing.assert_array_equal(joined.final_state, b.final_state)
        assert np.all(np.diff(joined.times) > 0)


class TestSynchronization:
    """Disagreement norm along a trajectory."""

    def test_two_node_disagreement(self, two_node):
        traj = integrate_states(two_node, [0.5], [1.0, -1.0], 1.0)
        np.testing.assert_allclose(disagreement(traj.states), math.sqrt(2) * np.exp(-2.0 * traj.times), rtol=1e-8)

    def test_summary_is_nonincreasing(self, path3):
        traj = integrate_states(path3, [0.4, 0.6], [2.0, -1.0, 0.5], 4.0)
        summary = summarize_synchronization(traj, window_ends=[1.0, 2.0, 3.0, 4.0])
        assert summary.is_nonincreasing()
        assert summary.per_iteration.shape == (4,)
        assert summary.per_iteration[-1] == pytest.approx(summary.disagreement[-1])

    def test_empty_trace(self):
        with pytest.raises(EmptyTrace):
            summarize_synchronization(Trajectory(times=np.zeros(0), states=np.zeros((0, 2))))
