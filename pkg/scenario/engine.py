# scenario/engine.py
# The online game: commit w_s, reveal the window cost of the active
# intruders, step the learner, and keep the state trajectory running.

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from graph_model.network import IntruderSet, NetworkGraph, as_weight_vector, uniform_weights
from gramian.privacy_cost import (
    DEFAULT_DELTA,
    DEFAULT_QUADRATURE_ORDER,
    CostWindow,
    PooledSequence,
    build_spectral_cache,
    privacy_cost,
    window_gradient,
)
from online_opt.hindsight import (
    HindsightResult,
    RegretLedger,
    hindsight_optimum,
    prefix_hindsight,
    regret_curve,
)
from online_opt.learners import (
    DEFAULT_SAFETY,
    DEFAULT_SAMPLES,
    SOLVERS,
    OnlineLearnerState,
    estimate_constants,
    init_learner,
)
from online_opt.projection import FeasibleSet, random_feasible_point
from scenario.dynamics import DEFAULT_STATE_STEP, Trajectory, integrate_states
from utils.errors import DimensionMismatch, EmptyEdgeSet, IndexOutOfRange, ScheduleOutOfRange

log = logging.getLogger(__name__)


# -------------------------
# Schedule
# -------------------------
def iteration_for_time(t: float, delta: float) -> int:
    """Iteration s covers [s·delta, (s+1)·delta); times before delta belong to iteration 1."""
    if not delta > 0:
        raise ValueError(f"delta must be > 0, got {delta}")
    if t < 0:
        raise ValueError(f"time must be >= 0, got {t}")
    return max(1, math.floor(t / delta + 1e-9))


@dataclass(frozen=True)
class IntruderSchedule:
    """(iteration, intruders) events; each set stays active until the next event."""
    events: Tuple[Tuple[int, IntruderSet], ...]

    def __post_init__(self):
        if not self.events:
            raise ScheduleOutOfRange("schedule has no events")
        if self.events[0][0] != 1:
            raise ScheduleOutOfRange(f"first event must be at iteration 1, got {self.events[0][0]}")
        its = [s for s, _ in self.events]
        if any(b <= a for a, b in zip(its, its[1:])):
            raise ScheduleOutOfRange(f"event iterations must be strictly increasing, got {its}")

    @classmethod
    def from_pairs(cls, pairs: Sequence[Tuple[int, Sequence[int]]]) -> "IntruderSchedule":
        return cls(tuple((int(s), IntruderSet(tuple(sorted(set(int(k) for k in nodes))))) for s, nodes in pairs))

    def active_at(self, s: int) -> IntruderSet:
        if s < 1:
            raise ScheduleOutOfRange(f"iterations start at 1, got {s}")
        current = self.events[0][1]
        for it, intruders in self.events:
            if it > s:
                break
            current = intruders
        return current

    def distinct_sets(self) -> List[IntruderSet]:
        seen: Dict[Tuple[int, ...], IntruderSet] = {}
        for _, intruders in self.events:
            seen.setdefault(intruders.nodes, intruders)
        return list(seen.values())

    def validate_for(self, graph: NetworkGraph, horizon: int) -> None:
        for s, intruders in self.events:
            if s > horizon:
                raise ScheduleOutOfRange(f"event at iteration {s} is after the horizon {horizon}")
            if not len(intruders):
                raise IndexOutOfRange(f"event at iteration {s} has no intruder nodes")
            for k in intruders:
                if not 0 <= k < graph.node_count:
                    raise IndexOutOfRange(f"node out of range: {k} at iteration {s} ({graph.node_count} nodes)")


# -------------------------
# Config and trace
# -------------------------
InitialSpec = Union[str, Sequence[float], np.ndarray]


@dataclass
class ScenarioConfig:
    """
    `initial_weights` is "uniform", "random" (drawn from rng_seed) or a
    feasible vector; `initial_state` is "random", "zeros" or a vector.
    """
    graph: NetworkGraph
    schedule: IntruderSchedule
    horizon: int
    delta: float = DEFAULT_DELTA
    initial_weights: InitialSpec = "uniform"
    solver: str = "ons"
    gradient_mode: str = "exact"
    initial_state: InitialSpec = "random"
    rng_seed: int = 0
    regret_mode: str = "final"
    quadrature_order: int = DEFAULT_QUADRATURE_ORDER
    safety: float = DEFAULT_SAFETY
    samples: int = DEFAULT_SAMPLES
    state_step: float = DEFAULT_STATE_STEP

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        if not self.delta > 0:
            raise ValueError(f"delta must be > 0, got {self.delta}")
        if self.solver not in SOLVERS:
            raise ValueError(f"unknown solver {self.solver!r}; use one of {sorted(SOLVERS)}")
        if self.gradient_mode not in ("exact", "paper"):
            raise ValueError(f"unknown gradient mode {self.gradient_mode!r}; use 'exact' or 'paper'")
        if self.regret_mode not in ("final", "prefix"):
            raise ValueError(f"unknown regret mode {self.regret_mode!r}; use 'final' or 'prefix'")
        if self.graph.edge_count == 0:
            raise EmptyEdgeSet("a graph without edges has no weights to tune")
        self.schedule.validate_for(self.graph, self.horizon)
        if not isinstance(self.initial_weights, str):
            as_weight_vector(self.graph, self.initial_weights)
        elif self.initial_weights not in ("uniform", "random"):
            raise ValueError(f"initial weights must be 'uniform', 'random' or a vector, got {self.initial_weights!r}")
        if not isinstance(self.initial_state, str):
            if np.asarray(self.initial_state, dtype=float).size != self.graph.node_count:
                raise DimensionMismatch(f"initial state needs {self.graph.node_count} entries")
        elif self.initial_state not in ("random", "zeros"):
            raise ValueError(f"initial state must be 'random', 'zeros' or a vector, got {self.initial_state!r}")

    def window(self, s: int) -> CostWindow:
        return CostWindow(t_start=s * self.delta, delta=self.delta, quadrature_order=self.quadrature_order)


@dataclass
class IterationRecord:
    iteration: int
    time_start: float
    delta: float
    intruders: Tuple[int, ...]
    weights: np.ndarray
    cost: float
    grad_norm: float
    cum_cost: float
    regret: float = math.nan
    wall_time: float = 0.0


@dataclass(frozen=True)
class LearnerConstants:
    gradient_bound: float
    diameter: float
    beta: float
    epsilon_reg: float


@dataclass
class ScenarioTrace:
    config: ScenarioConfig
    records: List[IterationRecord] = field(default_factory=list)
    trajectory: Optional[Trajectory] = None
    ledger: RegretLedger = field(default_factory=RegretLedger)
    constants: Optional[LearnerConstants] = None
    hindsight: Optional[HindsightResult] = None

    def __len__(self) -> int:
        return len(self.records)

    def weights_matrix(self) -> np.ndarray:
        return np.vstack([r.weights for r in self.records])

    def regret_curve(self) -> List[Tuple[int, float]]:
        return regret_curve(self.ledger)


# -------------------------
# Initial conditions
# -------------------------
def resolve_initial_weights(config: ScenarioConfig, fs: FeasibleSet, rng: np.random.Generator) -> np.ndarray:
    spec = config.initial_weights
    if isinstance(spec, str):
        return uniform_weights(config.graph) if spec == "uniform" else random_feasible_point(fs, rng)
    return as_weight_vector(config.graph, spec)


def resolve_initial_state(config: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    spec = config.initial_state
    n = config.graph.node_count
    if isinstance(spec, str):
        return rng.standard_normal(n) if spec == "random" else np.zeros(n)
    return np.asarray(spec, dtype=float).reshape(-1)


# -------------------------
# Game loop
# -------------------------
def cost_sequence(config: ScenarioConfig) -> List[Tuple[IntruderSet, CostWindow]]:
    return [(config.schedule.active_at(s), config.window(s)) for s in range(1, config.horizon + 1)]


def run_scenario(config: ScenarioConfig) -> ScenarioTrace:
    """
    Iteration s commits w_s, pays f_s(w_s) on [s·delta, (s+1)·delta] for the
    active intruders and steps the learner. The state runs from t = 0 with
    w_1 on [0, delta] and w_s on each later window. All randomness comes
    from config.rng_seed.
    """
    graph = config.graph
    fs = FeasibleSet.from_graph(graph)
    rng = np.random.default_rng(config.rng_seed)
    w1 = resolve_initial_weights(config, fs, rng)
    x0 = resolve_initial_state(config, rng)
    terms = cost_sequence(config)

    G, D = estimate_constants(
        graph, fs, config.schedule.distinct_sets(), [win for _, win in terms],
        samples=config.samples, safety=config.safety, gradient_mode=config.gradient_mode, seed=config.rng_seed,
    )
    state: OnlineLearnerState = init_learner(fs, w1, G, D)
    step_fn = SOLVERS[config.solver]
    trace = ScenarioTrace(
        config=config,
        constants=LearnerConstants(state.gradient_bound, state.diameter, state.beta, state.epsilon_reg),
    )
    log.info("scenario: N=%d M=%d T=%d delta=%g solver=%s gradient=%s",
             graph.node_count, graph.edge_count, config.horizon, config.delta, config.solver, config.gradient_mode)

    trajectory = integrate_states(graph, w1, x0, (0.0, config.delta), config.state_step)
    cum_cost = 0.0
    for s, (intruders, window) in enumerate(terms, start=1):
        started = time.perf_counter()
        w = state.current_point.copy()
        cache = build_spectral_cache(graph, w)
        cost = privacy_cost(graph, w, intruders, window, cache=cache)
        grad = window_gradient(graph, w, intruders, window, mode=config.gradient_mode, cache=cache)
        cum_cost += cost
        trace.ledger.record(cost)

        piece = integrate_states(graph, w, trajectory.final_state, (window.t_start, window.t_end), config.state_step)
        trajectory = trajectory.extend(piece)

        state = step_fn(state, grad)
        grad_norm = float(np.linalg.norm(grad))
        trace.records.append(IterationRecord(
            iteration=s, time_start=window.t_start, delta=window.delta, intruders=intruders.nodes,
            weights=w, cost=cost, grad_norm=grad_norm, cum_cost=cum_cost,
            wall_time=time.perf_counter() - started,
        ))
        log.debug("iteration %d: intruders=%s cost=%.6g |g|=%.3g", s, intruders.nodes, cost, grad_norm)

    trace.trajectory = trajectory
    _attach_regret(trace, fs, terms)
    log.info("scenario done: total cost %.10g, final regret %.6g", cum_cost, trace.records[-1].regret)
    return trace


def _attach_regret(trace: ScenarioTrace, fs: FeasibleSet, terms) -> None:
    config = trace.config
    graph = config.graph
    if config.regret_mode == "prefix":
        results = prefix_hindsight(graph, fs, terms)
        trace.hindsight = results[-1]
        trace.ledger.set_prefix_hindsight([r.value for r in results])
    else:
        trace.hindsight = hindsight_optimum(graph, fs, terms)
        trace.ledger.set_final_hindsight(PooledSequence(graph, terms).per_term_costs(trace.hindsight.weights))
    log.info("hindsight (%s): value %.10g at iteration count %d",
             config.regret_mode, trace.hindsight.value, trace.hindsight.iterations)
    for record, (_, r) in zip(trace.records, trace.regret_curve()):
        record.regret = r


# -------------------------
# Analysis helpers
# -------------------------
def intruder_edges(graph: NetworkGraph, intruders: IntruderSet) -> List[int]:
    """Indices of edges with an intruder endpoint."""
    nodes = set(intruders)
    return [l for l, (i, j) in enumerate(graph.edges) if i in nodes or j in nodes]


def neighbour_incident_edges(graph: NetworkGraph, intruders: IntruderSet) -> List[int]:
    """Indices of edges touching a non-intruder neighbour of an intruder."""
    g = graph.to_networkx()
    nodes = set(intruders)
    nbrs = {j for k in nodes for j in g.neighbors(k)} - nodes
    return sorted({l for _, _, l in g.edges(nbrs, data="index")})


def weight_changes(trace: ScenarioTrace) -> np.ndarray:
    """max_l |w_{s+1,l} - w_{s,l}| for s = 1..T-1."""
    W = trace.weights_matrix()
    if W.shape[0] < 2:
        return np.zeros(0)
    return np.abs(np.diff(W, axis=0)).max(axis=1)
