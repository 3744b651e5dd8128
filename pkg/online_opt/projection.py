# online_opt/projection.py
# Projection onto P = {w : 1^T w = 1, lower <= w <= upper} in the norm
# induced by an SPD matrix.

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize

from graph_model.network import SUM_TOL, NetworkGraph
from utils.errors import DimensionMismatch, InfeasibleSet, NonSPDMetric

log = logging.getLogger(__name__)

FEASIBILITY_TOL = 1e-12
ZERO_STEP_TOL = 1e-14
MULTIPLIER_TOL = 1e-12


@dataclass(frozen=True)
class FeasibleSet:
    """The simplex slice of the box [lower, upper]^M. A single edge pins w = (1)."""
    dimension: int
    lower: float
    upper: float
    sum_target: float = 1.0

    def __post_init__(self):
        if self.dimension < 0:
            raise InfeasibleSet(f"dimension must be >= 0, got {self.dimension}")
        if self.dimension <= 1:
            return
        if not 0 <= self.lower <= self.upper:
            raise InfeasibleSet(f"bounds [{self.lower}, {self.upper}] are empty")
        if self.dimension * self.lower > self.sum_target + SUM_TOL:
            raise InfeasibleSet(f"{self.dimension}·{self.lower:g} > {self.sum_target:g}")
        if self.dimension * self.upper < self.sum_target - SUM_TOL:
            raise InfeasibleSet(f"{self.dimension}·{self.upper:g} < {self.sum_target:g}")

    @classmethod
    def from_graph(cls, graph: NetworkGraph) -> "FeasibleSet":
        return cls(dimension=graph.edge_count, lower=graph.weight_lower, upper=graph.weight_upper)

    @property
    def is_singleton(self) -> bool:
        return self.dimension <= 1

    def contains(self, x, tol: float = FEASIBILITY_TOL) -> bool:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dimension,):
            return False
        if self.dimension == 0:
            return True
        if abs(x.sum() - self.sum_target) > tol:
            return False
        if self.dimension == 1:
            return True
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def barycenter(self) -> np.ndarray:
        m = self.dimension
        return np.full(m, self.sum_target / m) if m else np.zeros(0)


def _check_point(fs: FeasibleSet, y) -> np.ndarray:
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.shape != (fs.dimension,):
        raise DimensionMismatch(f"expected a length-{fs.dimension} vector, got {y.size}")
    if not np.all(np.isfinite(y)):
        raise ValueError("point to project has non-finite entries")
    return y


def _normalized_metric(metric, m: int) -> np.ndarray:
    """Check SPD and rescale to unit mean diagonal; the minimizer is scale-free."""
    A = np.asarray(metric, dtype=float)
    if A.shape != (m, m):
        raise DimensionMismatch(f"metric must be {m}x{m}, got {A.shape}")
    if not np.all(np.isfinite(A)):
        raise NonSPDMetric("metric has non-finite entries")
    scale = float(np.mean(np.diag(A))) if m else 1.0
    if not scale > 0:
        raise NonSPDMetric("metric diagonal is not positive")
    A = A / scale
    if not np.allclose(A, A.T, rtol=0.0, atol=1e-10):
        raise NonSPDMetric("metric is not symmetric")
    A = 0.5 * (A + A.T)
    try:
        np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise NonSPDMetric("metric is not positive definite") from exc
    return A


# -------------------------
# Euclidean projection
# -------------------------
def project_euclidean(fs: FeasibleSet, y) -> np.ndarray:
    """clip(y - theta, lower, upper) with theta from brentq."""
    y = _check_point(fs, y)
    if fs.dimension == 0:
        return y.copy()
    if fs.is_singleton:
        return np.array([fs.sum_target])
    lo, hi = fs.lower, fs.upper

    def excess(theta: float) -> float:
        return float(np.clip(y - theta, lo, hi).sum() - fs.sum_target)

    a, b = float(y.min() - hi), float(y.max() - lo)
    if excess(a) <= 0.0:
        theta = a
    elif excess(b) >= 0.0:
        theta = b
    else:
        theta = brentq(excess, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    x = np.clip(y - theta, lo, hi)
    # absorb the root-finding residual into the free coordinates
    free = (x > lo) & (x < hi)
    if free.any():
        x[free] += (fs.sum_target - x.sum()) / free.sum()
    return x


def random_feasible_point(fs: FeasibleSet, rng: np.random.Generator) -> np.ndarray:
    """Dirichlet(1) draw pushed into the box by Euclidean projection."""
    if fs.dimension == 0:
        return np.zeros(0)
    if fs.is_singleton:
        return np.array([fs.sum_target])
    return project_euclidean(fs, fs.sum_target * rng.dirichlet(np.ones(fs.dimension)))


# -------------------------
# Projection in the A-norm (active set)
# -------------------------
def _free_multiplier_interval(g: np.ndarray, at_lower: np.ndarray, at_upper: np.ndarray):
    # stationarity g_i + mu = lam_lo_i >= 0 (lower) and g_i + mu = -lam_hi_i <= 0 (upper)
    lo = float(np.max(-g[at_lower])) if at_lower.any() else -math.inf
    hi = float(np.min(-g[at_upper])) if at_upper.any() else math.inf
    return lo, hi


def _active_set(fs: FeasibleSet, A: np.ndarray, y: np.ndarray, x: np.ndarray, max_iterations: int):
    m = fs.dimension
    lo, hi = fs.lower, fs.upper
    at_lower = np.abs(x - lo) <= FEASIBILITY_TOL
    at_upper = (np.abs(x - hi) <= FEASIBILITY_TOL) & ~at_lower
    x = x.copy()
    x[at_lower] = lo
    x[at_upper] = hi

    for it in range(max_iterations):
        fixed = at_lower | at_upper
        free = ~fixed
        nf = int(free.sum())

        if nf:
            # equality QP over the free block with the fixed block held
            A_ff = A[np.ix_(free, free)]
            rhs_top = A_ff @ y[free] - A[np.ix_(free, fixed)] @ (x[fixed] - y[fixed])
            K = np.zeros((nf + 1, nf + 1))
            K[:nf, :nf] = A_ff
            K[:nf, nf] = 1.0
            K[nf, :nf] = 1.0
            rhs = np.append(rhs_top, fs.sum_target - x[fixed].sum())
            sol = np.linalg.solve(K, rhs)
            target, mu = sol[:nf], float(sol[nf])
            p = target - x[free]
        else:
            p = np.zeros(0)
            mu = None

        if np.abs(p).max(initial=0.0) <= ZERO_STEP_TOL:
            g = A @ (x - y)
            if mu is None:
                a, b = _free_multiplier_interval(g, at_lower, at_upper)
                mu = 0.5 * (a + b) if math.isfinite(a) and math.isfinite(b) else (a if math.isfinite(a) else b)
            lam = np.where(at_lower, g + mu, np.where(at_upper, -(g + mu), 0.0))
            worst = int(np.argmin(lam))
            if lam[worst] >= -MULTIPLIER_TOL:
                log.debug("active-set projection converged in %d iterations", it + 1)
                return x, True
            at_lower[worst] = False
            at_upper[worst] = False
            continue

        # longest step along p that keeps the free block inside the box
        xf = x[free]
        alpha, blocking, to_upper = 1.0, None, False
        idx = np.flatnonzero(free)
        for pos, step in enumerate(p):
            if step < 0:
                a = (lo - xf[pos]) / step
                if a < alpha:
                    alpha, blocking, to_upper = a, idx[pos], False
            elif step > 0:
                a = (hi - xf[pos]) / step
                if a < alpha:
                    alpha, blocking, to_upper = a, idx[pos], True
        alpha = max(alpha, 0.0)
        x[free] = xf + alpha * p
        if blocking is not None:
            if to_upper:
                at_upper[blocking] = True
                x[blocking] = hi
            else:
                at_lower[blocking] = True
                x[blocking] = lo
    return x, False


def _slsqp_projection(fs: FeasibleSet, A: np.ndarray, y: np.ndarray, x0: np.ndarray) -> np.ndarray:
    res = minimize(
        lambda x: 0.5 * (x - y) @ A @ (x - y),
        x0,
        jac=lambda x: A @ (x - y),
        method="SLSQP",
        bounds=[(fs.lower, fs.upper)] * fs.dimension,
        constraints=[{"type": "eq", "fun": lambda x: x.sum() - fs.sum_target, "jac": lambda x: np.ones_like(x)}],
        options={"ftol": 1e-15, "maxiter": 500},
    )
    return project_euclidean(fs, res.x) if not fs.contains(res.x, 1e-10) else res.x


def project(fs: FeasibleSet, metric, y, max_iterations: int | None = None) -> np.ndarray:
    """argmin_{x in P} (y - x)^T metric (y - x)."""
    y = _check_point(fs, y)
    if fs.dimension == 0:
        return y.copy()
    A = _normalized_metric(metric, fs.dimension)
    if fs.is_singleton:
        return np.array([fs.sum_target])
    if fs.contains(y):
        return y.copy()

    x0 = project_euclidean(fs, y)
    limit = max_iterations if max_iterations is not None else 4 * fs.dimension + 20
    x, converged = _active_set(fs, A, y, x0, limit)
    if not converged:
        log.warning("active-set projection did not settle in %d iterations; falling back to SLSQP", limit)
        x = _slsqp_projection(fs, A, y, x)
    return x


def kkt_residual(fs: FeasibleSet, metric, y, x, tol: float = 1e-9) -> float:
    # metric scaled to unit mean diagonal, as in project()
    y = _check_point(fs, y)
    x = _check_point(fs, x)
    if fs.is_singleton:
        return abs(float(x.sum()) - fs.sum_target) if fs.dimension else 0.0
    A = _normalized_metric(metric, fs.dimension)
    g = 2.0 * A @ (x - y)
    primal = max(
        abs(float(x.sum()) - fs.sum_target),
        float(np.max(fs.lower - x, initial=0.0)),
        float(np.max(x - fs.upper, initial=0.0)),
    )
    at_lower = x <= fs.lower + tol
    at_upper = (x >= fs.upper - tol) & ~at_lower
    free = ~(at_lower | at_upper)
    if free.any():
        mu = -float(np.mean(g[free]))
    else:
        a, b = _free_multiplier_interval(g, at_lower, at_upper)
        mu = 0.5 * (a + b) if math.isfinite(a) and math.isfinite(b) else (a if math.isfinite(a) else b)
    r = g + mu
    stationarity = float(np.max(np.abs(r[free]), initial=0.0))
    sign = max(
        float(np.max(-r[at_lower], initial=0.0)),
        float(np.max(r[at_upper], initial=0.0)),
    )
    return max(primal, stationarity, sign)
