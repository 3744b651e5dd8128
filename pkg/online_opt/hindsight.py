# online_opt/hindsight.py
# Best fixed weights in hindsight and regret bookkeeping.

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from graph_model.network import NetworkGraph
from gramian.privacy_cost import CostTerm, PooledSequence, build_spectral_cache
from online_opt.projection import FeasibleSet, project_euclidean
from utils.errors import EmptyEdgeSet, MaxIterationsExceeded, MissingHindsight

log = logging.getLogger(__name__)

HINDSIGHT_TOL = 1e-8
HINDSIGHT_MAX_ITERATIONS = 2000
ARMIJO_C = 1e-4
MAX_BACKTRACKS = 60

ValueAndGradient = Callable[[np.ndarray], Tuple[float, np.ndarray]]


@dataclass(frozen=True)
class HindsightResult:
    weights: np.ndarray
    value: float
    converged: bool
    iterations: int
    projected_gradient_norm: float

    def __iter__(self) -> Iterator:
        # unpacks as (weights, value)
        return iter((self.weights, self.value))


def _projected_gradient_norm(fs: FeasibleSet, x: np.ndarray, g: np.ndarray) -> float:
    return float(np.linalg.norm(x - project_euclidean(fs, x - g)))


def minimize_on_set(fs: FeasibleSet, value_and_gradient: ValueAndGradient, x0: np.ndarray,
                    tol: float = HINDSIGHT_TOL, max_iterations: int = HINDSIGHT_MAX_ITERATIONS) -> HindsightResult:
    """Projected gradient, Armijo backtracking from a Barzilai-Borwein step."""
    x = project_euclidean(fs, x0)
    f, g = value_and_gradient(x)
    span = max(fs.upper - fs.lower, 1e-12)
    step = span / max(float(np.linalg.norm(g)), 1e-12)
    pg = _projected_gradient_norm(fs, x, g)

    for it in range(max_iterations):
        if pg <= tol:
            return HindsightResult(x, f, True, it, pg)
        # slack for rounding in f near the optimum
        slack = 10.0 * np.finfo(float).eps * max(1.0, abs(f))
        for _ in range(MAX_BACKTRACKS):
            x_new = project_euclidean(fs, x - step * g)
            f_new, g_new = value_and_gradient(x_new)
            if f_new <= f + ARMIJO_C * float(g @ (x_new - x)) + slack:
                break
            step *= 0.5
        else:
            log.debug("line search stalled at iteration %d (pg=%.3g)", it, pg)
            return HindsightResult(x, f, pg <= tol, it, pg)

        s, y = x_new - x, g_new - g
        sy = float(s @ y)
        step = float(s @ s) / sy if sy > 0 else 2.0 * step
        step = min(max(step, 1e-12), 1e12)
        x, f, g = x_new, f_new, g_new
        pg = _projected_gradient_norm(fs, x, g)

    return HindsightResult(x, f, pg <= tol, max_iterations, pg)


def hindsight_optimum(graph: NetworkGraph, fs: FeasibleSet, cost_sequence: Sequence[CostTerm],
                      x0=None, tol: float = HINDSIGHT_TOL, max_iterations: int = HINDSIGHT_MAX_ITERATIONS,
                      strict: bool = False) -> HindsightResult:
    """
    argmin over P of sum_t f_t(w), from the barycenter unless x0 is given.
    Not converged within max_iterations: warn and return the best point,
    or raise MaxIterationsExceeded when strict.
    """
    if graph.edge_count == 0:
        raise EmptyEdgeSet("a graph without edges has no weights to tune")
    terms = list(cost_sequence)
    if not terms:
        raise ValueError("cost sequence is empty")
    pooled = PooledSequence(graph, terms)

    if fs.is_singleton:
        w = fs.barycenter()
        return HindsightResult(w, pooled.cost(w), True, 0, 0.0)

    def value_and_gradient(w: np.ndarray) -> Tuple[float, np.ndarray]:
        cache = build_spectral_cache(graph, w)
        return pooled.cost(w, cache), pooled.gradient(w, cache)

    start = fs.barycenter() if x0 is None else np.asarray(x0, dtype=float)
    result = minimize_on_set(fs, value_and_gradient, start, tol=tol, max_iterations=max_iterations)
    if not result.converged:
        if strict:
            raise MaxIterationsExceeded(
                f"hindsight solve stopped with projected gradient {result.projected_gradient_norm:.3g} "
                f"after {result.iterations} iterations (best value {result.value:.17g})"
            )
        log.warning("hindsight solve not converged: projected gradient %.3g after %d iterations",
                    result.projected_gradient_norm, result.iterations)
    log.debug("hindsight: value=%.17g iterations=%d", result.value, result.iterations)
    return result


def prefix_hindsight(graph: NetworkGraph, fs: FeasibleSet, cost_sequence: Sequence[CostTerm]) -> List[HindsightResult]:
    """min over P of the first T costs, for every T; each solve warm-starts from the previous."""
    results: List[HindsightResult] = []
    terms = list(cost_sequence)
    x0 = None
    for T in range(1, len(terms) + 1):
        res = hindsight_optimum(graph, fs, terms[:T], x0=x0)
        results.append(res)
        x0 = res.weights
    return results


# -------------------------
# Regret
# -------------------------
@dataclass
class RegretLedger:
    """
    Online costs f_t(w_t) plus one of two baselines: the per-step costs of the
    full-horizon hindsight point (final mode) or the optimal value of every
    prefix (prefix mode).
    """
    per_step_costs: List[float] = field(default_factory=list)
    hindsight_cost: Optional[float] = None
    hindsight_step_costs: Optional[List[float]] = None
    prefix_minima: Optional[List[float]] = None

    @property
    def mode(self) -> Optional[str]:
        if self.prefix_minima is not None:
            return "prefix"
        if self.hindsight_step_costs is not None or self.hindsight_cost is not None:
            return "final"
        return None

    def record(self, cost: float) -> None:
        self.per_step_costs.append(float(cost))

    def set_final_hindsight(self, step_costs: Sequence[float]) -> None:
        self.hindsight_step_costs = [float(c) for c in step_costs]
        self.hindsight_cost = float(math.fsum(self.hindsight_step_costs))

    def set_prefix_hindsight(self, minima: Sequence[float]) -> None:
        self.prefix_minima = [float(v) for v in minima]
        self.hindsight_cost = self.prefix_minima[-1] if self.prefix_minima else None


def cumulative_regret(per_step_costs: Sequence[float], hindsight_step_costs: Sequence[float]) -> np.ndarray:
    """R_T = sum_{t<=T} f_t(w_t) - sum_{t<=T} f_t(w*), for every T."""
    a = np.asarray(per_step_costs, dtype=float)
    b = np.asarray(hindsight_step_costs, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"{a.size} online costs against {b.size} hindsight costs")
    return np.cumsum(a) - np.cumsum(b)


def regret_curve(ledger: RegretLedger) -> List[Tuple[int, float]]:
    costs = ledger.per_step_costs
    if ledger.mode == "prefix":
        if len(ledger.prefix_minima) != len(costs):
            raise MissingHindsight(f"{len(ledger.prefix_minima)} prefix minima for {len(costs)} steps")
        regret = np.cumsum(costs) - np.asarray(ledger.prefix_minima)
    elif ledger.hindsight_step_costs is not None:
        regret = cumulative_regret(costs, ledger.hindsight_step_costs)
    elif ledger.hindsight_cost is not None:
        # a bare total only fixes the last point
        if not costs:
            return []
        return [(len(costs), float(math.fsum(costs)) - ledger.hindsight_cost)]
    else:
        raise MissingHindsight("no hindsight baseline recorded")
    return [(T, float(r)) for T, r in enumerate(regret, start=1)]


@dataclass(frozen=True)
class LogFit:
    coefficient: float
    r_squared: float


def fit_log_regret(curve: Sequence[Tuple[int, float]], t_min: int = 2) -> LogFit:
    """
    Least-squares c in R_T ~ c·log T over T >= t_min, with the uncentered R²
    of the through-origin fit.
    """
    pts = [(T, r) for T, r in curve if T >= t_min]
    if not pts:
        raise ValueError(f"no curve points with T >= {t_min}")
    logs = np.log([T for T, _ in pts])
    R = np.array([r for _, r in pts])
    c = float(logs @ R / (logs @ logs))
    total = float(R @ R)
    resid = R - c * logs
    r2 = 1.0 - float(resid @ resid) / total if total > 0 else 1.0
    return LogFit(coefficient=c, r_squared=r2)
