# gramian/oracles.py
# Independent cross-checks for the closed-form cost and gradients:
# trajectory-based (empirical) Gramian, linear Gramian, finite differences,
# the exp(Z) >= I + Z inequality and midpoint convexity of phi.

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import List

import numpy as np
import scipy.linalg

from graph_model.network import (
    IntruderSet,
    NetworkGraph,
    _check_weights_shape,
    assemble_system_matrix,
    check_symmetric,
    random_connected_graph,
)
from gramian.privacy_cost import (
    TRUNCATION_HORIZON,
    CostWindow,
    build_spectral_cache,
    exact_gradient,
    matrix_exponential_diag_entry,
    paper_gradient,
    privacy_cost,
)
from utils.errors import NonPositiveHorizon, NonPositivePerturbation, NonPositiveStep

log = logging.getLogger(__name__)


# -------------------------
# Gramians
# -------------------------
def rk4_propagator(A: np.ndarray, step: float) -> np.ndarray:
    """One classical RK4 step of x' = A x, as a matrix."""
    hA = step * A
    I = np.eye(A.shape[0])
    hA2 = hA @ hA
    return I + hA + hA2 / 2.0 + hA2 @ hA / 6.0 + hA2 @ hA2 / 24.0


def empirical_observability_gramian(graph: NetworkGraph, w, intruders: IntruderSet, eps: float,
                                    t_f: float, step: float) -> np.ndarray:
    """
    Gramian from 2N perturbed trajectories x0 = +/- eps e_i (fixed-step RK4),
    W_ij = 1/(4 eps^2) int (y+i - y-i)^T (y+j - y-j) dtau with trapezoidal
    accumulation and y = (x_k) for k in intruders.
    """
    if not eps > 0:
        raise NonPositivePerturbation(f"perturbation must be > 0, got {eps}")
    if not t_f > 0:
        raise NonPositiveHorizon(f"horizon must be > 0, got {t_f}")
    if not step > 0:
        raise NonPositiveStep(f"step must be > 0, got {step}")
    n = graph.node_count
    nodes = list(intruders)
    steps = max(1, math.ceil(t_f / step - 1e-9))
    h = t_f / steps
    R = rk4_propagator(assemble_system_matrix(graph, w), h)

    X_plus = eps * np.eye(n)   # column i is the trajectory from +eps e_i
    X_minus = -eps * np.eye(n)

    def integrand(Xp, Xm):
        Y = Xp[nodes] - Xm[nodes]
        return Y.T @ Y

    gram = np.zeros((n, n))
    prev = integrand(X_plus, X_minus)
    for _ in range(steps):
        X_plus = R @ X_plus
        X_minus = R @ X_minus
        cur = integrand(X_plus, X_minus)
        gram += 0.5 * h * (prev + cur)
        prev = cur
    return gram / (4.0 * eps * eps)


def empirical_gramian_trace(graph: NetworkGraph, w, intruders: IntruderSet, eps: float,
                            t_f: float, step: float) -> float:
    return float(np.trace(empirical_observability_gramian(graph, w, intruders, eps, t_f, step)))


def observability_gramian(graph: NetworkGraph, w, intruders: IntruderSet,
                          horizon: float = TRUNCATION_HORIZON) -> np.ndarray:
    """
    Linear Gramian int_0^T exp(A^T t) C^T C exp(A t) dt in closed form,
    with C selecting the intruder rows.
    """
    if not horizon > 0:
        raise NonPositiveHorizon(f"horizon must be > 0, got {horizon}")
    cache = build_spectral_cache(graph, w)
    lam, U = cache.eigenvalues, cache.eigenvectors
    nodes = list(intruders)
    C_U = U[nodes]  # rows of U for measured nodes
    M = C_U.T @ C_U  # U^T C^T C U
    s = lam[:, None] + lam[None, :]
    # int_0^T exp(s t) dt = T * expm1(s T) / (s T)
    sT = s * horizon
    with np.errstate(divide="ignore", invalid="ignore"):
        factor = np.where(np.abs(sT) < 1e-300, horizon, np.expm1(sT) / s)
    return U @ (M * factor) @ U.T


def is_observable(gramian: np.ndarray, rtol: float = 1e-10) -> bool:
    sv = np.linalg.svd(gramian, compute_uv=False)
    return bool(sv.size and sv[-1] > rtol * sv[0])


# -------------------------
# Gradient oracles
# -------------------------
def finite_difference_gradient(graph: NetworkGraph, w, intruders: IntruderSet, window: CostWindow,
                               h: float = 1e-5) -> np.ndarray:
    """Central differences of privacy_cost, one edge at a time."""
    w = _check_weights_shape(graph, w)
    g = np.zeros_like(w)
    for l in range(w.size):
        wp, wm = w.copy(), w.copy()
        wp[l] += h
        wm[l] -= h
        g[l] = (privacy_cost(graph, wp, intruders, window) - privacy_cost(graph, wm, intruders, window)) / (2.0 * h)
    return g


def relative_error(approx: np.ndarray, reference: np.ndarray) -> float:
    """max |approx - ref| / max |ref| (0 when both vanish)."""
    approx, reference = np.asarray(approx, float), np.asarray(reference, float)
    scale = float(np.abs(reference).max(initial=0.0))
    diff = float(np.abs(approx - reference).max(initial=0.0))
    if scale == 0.0:
        return diff
    return diff / scale


@dataclass(frozen=True)
class GradientDivergence:
    exact: np.ndarray
    paper: np.ndarray
    max_abs: float
    relative: float


def gradient_divergence(graph: NetworkGraph, w, intruders: IntruderSet, window: CostWindow) -> GradientDivergence:
    """How far the closed-form gradient is from the exact one at w."""
    cache = build_spectral_cache(graph, w)
    ex = exact_gradient(graph, w, intruders, window, cache=cache)
    pa = paper_gradient(graph, cache, intruders, window, weights=w)
    return GradientDivergence(
        exact=ex,
        paper=pa,
        max_abs=float(np.abs(ex - pa).max(initial=0.0)),
        relative=relative_error(pa, ex),
    )


# -------------------------
# exp(Z) >= I + Z
# -------------------------
@dataclass(frozen=True)
class InequalityCheck:
    holds: bool
    min_eigenvalue: float
    tolerance: float

    def __bool__(self) -> bool:
        return self.holds


def check_exponential_inequality(Z: np.ndarray, atol: float = 1e-10) -> InequalityCheck:
    """
    lambda_min(expm(Z) - I - Z) >= -atol. The tolerance is scaled by
    max(1, ||expm(Z)||_2): rounding in expm grows with its norm.
    """
    Z = check_symmetric(Z)
    eZ = scipy.linalg.expm(Z)
    gap = eZ - np.eye(Z.shape[0]) - Z
    gap = 0.5 * (gap + gap.T)
    lam_min = float(np.linalg.eigvalsh(gap)[0]) if Z.size else 0.0
    tol = atol * max(1.0, float(np.linalg.norm(eZ, 2)) if Z.size else 1.0)
    return InequalityCheck(holds=lam_min >= -tol, min_eigenvalue=lam_min, tolerance=tol)


@dataclass
class SweepReport:
    samples: int = 0
    failures: List[dict] = field(default_factory=list)
    worst_margin: float = math.inf

    @property
    def all_hold(self) -> bool:
        return not self.failures


def exponential_inequality_sweep(samples: int = 1000, max_dim: int = 8, entry_range: float = 3.0,
                                 seed: int = 0) -> SweepReport:
    rng = np.random.default_rng(seed)
    report = SweepReport()
    for _ in range(samples):
        n = int(rng.integers(1, max_dim + 1))
        B = rng.uniform(-entry_range, entry_range, size=(n, n))
        Z = np.triu(B) + np.triu(B, 1).T
        res = check_exponential_inequality(Z)
        report.samples += 1
        report.worst_margin = min(report.worst_margin, res.min_eigenvalue + res.tolerance)
        if not res.holds:
            report.failures.append({"Z": Z, "min_eigenvalue": res.min_eigenvalue})
    return report


# -------------------------
# Midpoint convexity of phi
# -------------------------
def check_diag_convexity(graph: NetworkGraph, k: int, tau: float, w_a, w_b, atol: float = 1e-10) -> bool:
    """phi((w_a + w_b)/2, tau) <= (phi(w_a, tau) + phi(w_b, tau))/2 + atol."""
    return _convexity_gap(graph, k, tau, w_a, w_b) <= atol


def _convexity_gap(graph: NetworkGraph, k: int, tau: float, w_a, w_b) -> float:
    w_a = _check_weights_shape(graph, w_a)
    w_b = _check_weights_shape(graph, w_b)
    mid = 0.5 * (w_a + w_b)
    f = lambda w: matrix_exponential_diag_entry(build_spectral_cache(graph, w), k, tau)
    return f(mid) - 0.5 * (f(w_a) + f(w_b))


def convexity_sweep(samples: int = 1000, max_nodes: int = 8, seed: int = 0, atol: float = 1e-10,
                    tau_range: tuple = (0.05, 3.0)) -> SweepReport:
    """
    Random (graph, w_a, w_b, tau) midpoint tests. Each failure keeps its
    witness, since phi is only guaranteed convex when A(w) and A_l commute.
    """
    from online_opt.projection import FeasibleSet, random_feasible_point

    rng = np.random.default_rng(seed)
    report = SweepReport()
    for _ in range(samples):
        n = int(rng.integers(2, max_nodes + 1))
        m_max = min(n * (n - 1) // 2, 20)
        m = int(rng.integers(n - 1, m_max + 1))
        graph = random_connected_graph(n, m, seed=int(rng.integers(0, 2**31 - 1)))
        fs = FeasibleSet.from_graph(graph)
        w_a = random_feasible_point(fs, rng)
        w_b = random_feasible_point(fs, rng)
        k = int(rng.integers(0, n))
        tau = float(rng.uniform(*tau_range))
        gap = _convexity_gap(graph, k, tau, w_a, w_b)
        report.samples += 1
        report.worst_margin = min(report.worst_margin, atol - gap)
        if gap > atol:
            report.failures.append({"edges": graph.edges, "k": k, "tau": tau, "w_a": w_a, "w_b": w_b, "gap": gap})
    if report.failures:
        log.warning("midpoint convexity failed on %d of %d samples (worst gap %.3g)",
                    len(report.failures), report.samples, max(f["gap"] for f in report.failures))
    return report
