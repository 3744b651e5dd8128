# online_opt/learners.py
# Online Newton Step and Online Gradient Descent over the weight simplex slice.

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import cho_solve

from graph_model.network import IntruderSet, NetworkGraph
from gramian.privacy_cost import CostWindow, build_spectral_cache, pointwise_gradient
from online_opt.projection import FeasibleSet, project, random_feasible_point
from utils.errors import DimensionMismatch, EmptyEdgeSet, SingularAccumulator

log = logging.getLogger(__name__)

DEFAULT_SAFETY = 2.0
DEFAULT_SAMPLES = 32
MIN_GRADIENT_BOUND = 1e-12

StepSizeRule = Callable[["OnlineLearnerState"], float]


# -------------------------
# Constants G and D
# -------------------------
def diameter_bound(fs: FeasibleSet) -> float:
    """
    Upper bound on max ||x - y|| over the set. Mass moved between two points
    is at most 2·min(1 - M·lower, M·upper - 1) and no coordinate moves more
    than upper - lower.
    """
    if fs.is_singleton:
        return 0.0
    span = fs.upper - fs.lower
    slack = min(fs.sum_target - fs.dimension * fs.lower, fs.dimension * fs.upper - fs.sum_target)
    if math.sqrt(2.0 * span * max(slack, 0.0)) <= math.sqrt(2.0) * span:
        return math.sqrt(2.0) * span
    return math.sqrt(fs.dimension) * span


def _as_list(value, kind):
    return [value] if isinstance(value, kind) else list(value)


def _window_gradient_norms(graph: NetworkGraph, w: np.ndarray, intruder_sets, windows, method: str) -> float:
    cache = build_spectral_cache(graph, w)
    rules = [win.rule() for win in windows]
    taus = np.concatenate([n for n, _ in rules])
    bounds = np.cumsum([0] + [n.size for n, _ in rules])
    best = 0.0
    for intruders in intruder_sets:
        pw = pointwise_gradient(graph, cache, intruders, taus, method=method)
        for (_, q), a, b in zip(rules, bounds[:-1], bounds[1:]):
            best = max(best, float(np.linalg.norm(q @ pw[a:b])))
    return best


def estimate_constants(graph: NetworkGraph, fs: FeasibleSet,
                       intruders: Union[IntruderSet, Sequence[IntruderSet]],
                       window: Union[CostWindow, Sequence[CostWindow]],
                       samples: int = DEFAULT_SAMPLES, safety: float = DEFAULT_SAFETY,
                       gradient_mode: str = "exact", seed: int = 0) -> Tuple[float, float]:
    """
    (G, D) for the learner. G is `safety` times the largest window-gradient
    norm seen at the barycenter and samples - 1 random feasible points, over
    every intruder set and window given.
    """
    if graph.edge_count == 0:
        raise EmptyEdgeSet("a graph without edges has no weights to tune")
    if samples < 1:
        raise ValueError(f"samples must be >= 1, got {samples}")
    if safety < 1:
        raise ValueError(f"safety factor must be >= 1, got {safety}")
    method = {"exact": "spectral", "paper": "paper"}.get(gradient_mode)
    if method is None:
        raise ValueError(f"unknown gradient mode {gradient_mode!r}; use 'exact' or 'paper'")

    intruder_sets = _as_list(intruders, IntruderSet)
    windows = _as_list(window, CostWindow)
    rng = np.random.default_rng(seed)
    points = [fs.barycenter()] + [random_feasible_point(fs, rng) for _ in range(samples - 1)]
    g_max = max(_window_gradient_norms(graph, w, intruder_sets, windows, method) for w in points)

    G = max(safety * g_max, MIN_GRADIENT_BOUND)
    D = diameter_bound(fs)
    log.info("constants: G=%.6g (max sampled gradient %.6g, safety %.3g), D=%.6g", G, g_max, safety, D)
    return G, D


# -------------------------
# Learner state
# -------------------------
@dataclass(frozen=True)
class OnlineLearnerState:
    """
    ONS/OGD state at iteration s. `accumulator` is A_s = eps·I + sum g g^T and
    `factor` its lower Cholesky factor, kept in step with rank-1 updates.
    A singleton feasible set (D = 0) carries beta = inf, eps = 0 and no factor.
    """
    feasible_set: FeasibleSet
    iteration: int
    current_point: np.ndarray
    accumulator: np.ndarray
    factor: Optional[np.ndarray]
    gradient_bound: float
    diameter: float
    beta: float
    epsilon_reg: float

    @property
    def is_degenerate(self) -> bool:
        return self.diameter == 0.0

    def newton_direction(self, g: np.ndarray) -> np.ndarray:
        """A_s^{-1} g from the stored factor."""
        if self.factor is None:
            raise SingularAccumulator("no accumulator factor on a singleton set")
        return cho_solve((self.factor, True), g)


def init_learner(fs: FeasibleSet, w1, gradient_bound: float, diameter: float) -> OnlineLearnerState:
    w1 = np.asarray(w1, dtype=float).reshape(-1)
    if w1.shape != (fs.dimension,):
        raise DimensionMismatch(f"expected {fs.dimension} weights, got {w1.size}")
    if fs.dimension == 0:
        raise EmptyEdgeSet("a graph without edges has no weights to tune")
    m = fs.dimension
    if diameter == 0.0 or fs.is_singleton:
        return OnlineLearnerState(
            feasible_set=fs, iteration=1, current_point=np.full(m, fs.sum_target) if m == 1 else w1.copy(),
            accumulator=np.zeros((m, m)), factor=None, gradient_bound=float(gradient_bound),
            diameter=0.0, beta=math.inf, epsilon_reg=0.0,
        )
    if not gradient_bound > 0 or not diameter > 0:
        raise ValueError(f"G and D must be positive, got G={gradient_bound}, D={diameter}")
    if not fs.contains(w1, 1e-10):
        raise ValueError("initial point is not feasible")
    beta = 1.0 / (8.0 * gradient_bound * diameter)
    eps = 1.0 / (beta * beta * diameter * diameter)
    return OnlineLearnerState(
        feasible_set=fs,
        iteration=1,
        current_point=w1.copy(),
        accumulator=eps * np.eye(m),
        factor=math.sqrt(eps) * np.eye(m),
        gradient_bound=float(gradient_bound),
        diameter=float(diameter),
        beta=beta,
        epsilon_reg=eps,
    )


def cholesky_rank_one_update(L: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Lower factor of L L^T + v v^T, O(M^2)."""
    L = L.copy()
    x = np.asarray(v, dtype=float).copy()
    for k in range(L.shape[0]):
        lkk = L[k, k]
        if not lkk > 0:
            raise SingularAccumulator(f"non-positive pivot {lkk} at {k}")
        r = math.hypot(lkk, x[k])
        c, s = r / lkk, x[k] / lkk
        L[k, k] = r
        if k + 1 < L.shape[0]:
            L[k + 1:, k] = (L[k + 1:, k] + s * x[k + 1:]) / c
            x[k + 1:] = c * x[k + 1:] - s * L[k + 1:, k]
    return L


def _check_gradient(state: OnlineLearnerState, g) -> np.ndarray:
    g = np.asarray(g, dtype=float).reshape(-1)
    if g.shape != state.current_point.shape:
        raise DimensionMismatch(f"expected a length-{state.current_point.size} gradient, got {g.size}")
    if not np.all(np.isfinite(g)):
        raise ValueError("gradient has non-finite entries")
    return g


# -------------------------
# Steps
# -------------------------
def ons_step(state: OnlineLearnerState, gradient) -> OnlineLearnerState:
    g = _check_gradient(state, gradient)
    if state.is_degenerate:
        return replace(state, iteration=state.iteration + 1)

    factor = cholesky_rank_one_update(state.factor, g)
    if not np.all(np.isfinite(factor)) or np.min(np.diag(factor)) <= 0:
        raise SingularAccumulator("accumulator lost positive definiteness")
    accumulator = state.accumulator + np.outer(g, g)
    direction = cho_solve((factor, True), g)
    y = state.current_point - direction / state.beta
    w_next = project(state.feasible_set, accumulator, y)
    return replace(state, iteration=state.iteration + 1, current_point=w_next,
                   accumulator=accumulator, factor=factor)


def default_step_size(state: OnlineLearnerState) -> float:
    """eta_s = D / (G sqrt(s))."""
    return state.diameter / (state.gradient_bound * math.sqrt(state.iteration))


def ogd_step(state: OnlineLearnerState, gradient, step_size_rule: StepSizeRule | None = None) -> OnlineLearnerState:
    """w_{s+1} = Proj_I(w_s - eta_s g); the accumulator is left as is."""
    g = _check_gradient(state, gradient)
    if state.is_degenerate:
        return replace(state, iteration=state.iteration + 1)
    rule = step_size_rule or default_step_size
    eta = float(rule(state))
    if not eta > 0:
        raise ValueError(f"step size must be > 0, got {eta}")
    w_next = project(state.feasible_set, np.eye(state.current_point.size), state.current_point - eta * g)
    return replace(state, iteration=state.iteration + 1, current_point=w_next)


SOLVERS = {"ons": ons_step, "ogd": ogd_step}
