# scenario/dynamics.py
# State trajectories of x' = A(w) x (or the bare consensus x' = -L(w) x).

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from graph_model.network import NetworkGraph, assemble_system_matrix, weighted_laplacian
from gramian.oracles import rk4_propagator
from utils.errors import DimensionMismatch, EmptyTrace, NonPositiveStep

log = logging.getLogger(__name__)

DEFAULT_STATE_STEP = 0.01


@dataclass(frozen=True)
class Trajectory:
    """States sampled at every integration step, endpoints included."""
    times: np.ndarray
    states: np.ndarray

    def __len__(self) -> int:
        return self.times.size

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def extend(self, other: "Trajectory") -> "Trajectory":
        """Append a continuation that starts where this one ends."""
        if not len(self):
            return other
        return Trajectory(
            times=np.concatenate([self.times, other.times[1:]]),
            states=np.vstack([self.states, other.states[1:]]),
        )


def integrate_states(graph: NetworkGraph, w, x0, t_span: Tuple[float, float] | float,
                     step: float = DEFAULT_STATE_STEP, consensus_only: bool = False) -> Trajectory:
    """
    Fixed-step RK4 over t_span (a pair, or a single end time from 0). The step
    is shortened so a whole number of steps lands on the end time.
    """
    if not step > 0:
        raise NonPositiveStep(f"integration step must be > 0, got {step}")
    t0, t1 = (0.0, float(t_span)) if np.isscalar(t_span) else (float(t_span[0]), float(t_span[1]))
    if t1 < t0:
        raise ValueError(f"t_span ends before it starts: {t0} > {t1}")
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.shape != (graph.node_count,):
        raise DimensionMismatch(f"expected a length-{graph.node_count} state, got {x0.size}")

    A = -weighted_laplacian(graph, w) if consensus_only else assemble_system_matrix(graph, w)
    steps = max(1, math.ceil((t1 - t0) / step - 1e-9)) if t1 > t0 else 0
    times = np.linspace(t0, t1, steps + 1)
    states = np.empty((steps + 1, graph.node_count))
    states[0] = x0
    if steps:
        R = rk4_propagator(A, (t1 - t0) / steps)
        x = x0
        for i in range(1, steps + 1):
            x = R @ x
            states[i] = x
    log.debug("integrated %d RK4 steps over [%g, %g]", steps, t0, t1)
    return Trajectory(times=times, states=states)


def disagreement(states: np.ndarray) -> np.ndarray:
    """||x - mean(x)·1|| per row."""
    states = np.atleast_2d(states)
    return np.linalg.norm(states - states.mean(axis=1, keepdims=True), axis=1)


@dataclass(frozen=True)
class SynchronizationSummary:
    times: np.ndarray
    disagreement: np.ndarray
    per_iteration: np.ndarray  # at the end of each iteration's window

    def is_nonincreasing(self, slack: float = 1e-9) -> bool:
        return bool(np.all(np.diff(self.disagreement) <= slack))


def summarize_synchronization(trace, window_ends: Sequence[float] | None = None) -> SynchronizationSummary:
    trajectory = getattr(trace, "trajectory", trace)
    if trajectory is None or not len(trajectory):
        raise EmptyTrace("trace has no state samples")
    d = disagreement(trajectory.states)
    if window_ends is None and hasattr(trace, "records"):
        window_ends = [r.time_start + r.delta for r in trace.records]
    if window_ends is None:
        per_iteration = d.copy()
    else:
        idx = np.searchsorted(trajectory.times, np.asarray(window_ends, dtype=float) - 1e-9)
        per_iteration = d[np.clip(idx, 0, d.size - 1)]
    return SynchronizationSummary(times=trajectory.times, disagreement=d, per_iteration=per_iteration)
