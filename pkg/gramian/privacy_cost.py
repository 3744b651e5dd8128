# gramian/privacy_cost.py
# Observability cost of the intruder-measured nodes:
#   phi(w, tau) = sum_k [exp(2 A(w) tau)]_kk,   f_t(w) = int_t^{t+delta} phi dtau
# plus its gradient two ways (the closed form that assumes A and A_l commute,
# and the exact Frechet derivative of the matrix exponential).

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, List, Sequence, Tuple

import numpy as np
import scipy.linalg

from graph_model.network import (
    IntruderSet,
    NetworkGraph,
    _check_weights_shape,
    assemble_system_matrix,
)
from utils.errors import IndexOutOfRange, InvalidWindow, NegativeTime, StaleCache
from utils.quadrature import MAX_PANEL, gauss_legendre

log = logging.getLogger(__name__)

DEFAULT_DELTA = 0.5
DEFAULT_QUADRATURE_ORDER = 16
# tail of exp(-2 tau) beyond 20 is ~4e-18
TRUNCATION_HORIZON = 20.0

CostTerm = Tuple[IntruderSet, "CostWindow"]


# -------------------------
# Types
# -------------------------
@dataclass(frozen=True)
class SpectralCache:
    """A(w) = U diag(lam) U^T, built once per weight vector."""
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    source_weights: np.ndarray

    @property
    def size(self) -> int:
        return self.eigenvalues.size


@dataclass(frozen=True)
class CostWindow:
    t_start: float
    delta: float = DEFAULT_DELTA
    quadrature_order: int = DEFAULT_QUADRATURE_ORDER

    def __post_init__(self):
        if not self.delta > 0:
            raise InvalidWindow(f"window length must be > 0, got {self.delta}")
        if self.quadrature_order < 2:
            raise InvalidWindow(f"quadrature order must be >= 2, got {self.quadrature_order}")
        if self.t_start < 0:
            raise NegativeTime(f"window start must be >= 0, got {self.t_start}")

    @property
    def t_end(self) -> float:
        return self.t_start + self.delta

    def rule(self) -> Tuple[np.ndarray, np.ndarray]:
        return gauss_legendre(self.t_start, self.t_end, self.quadrature_order, MAX_PANEL)


def build_spectral_cache(graph: NetworkGraph, w) -> SpectralCache:
    w = _check_weights_shape(graph, w).copy()
    lam, U = scipy.linalg.eigh(assemble_system_matrix(graph, w))
    for arr in (lam, U, w):
        arr.flags.writeable = False
    return SpectralCache(eigenvalues=lam, eigenvectors=U, source_weights=w)


def _check_node(cache: SpectralCache, k: int) -> None:
    if not 0 <= k < cache.size:
        raise IndexOutOfRange(f"node {k} out of range for {cache.size} nodes")


def _check_fresh(cache: SpectralCache, w) -> None:
    if w is None:
        return
    w = np.asarray(w, dtype=float)
    if w.shape != cache.source_weights.shape or not np.array_equal(w, cache.source_weights):
        raise StaleCache("spectral cache was built for different weights")


# -------------------------
# phi
# -------------------------
def matrix_exponential_diag_entry(cache: SpectralCache, k: int, tau: float) -> float:
    """[exp(2 A tau)]_kk = sum_i U[k, i]^2 exp(2 lam_i tau)."""
    _check_node(cache, k)
    if tau < 0:
        raise NegativeTime(f"tau must be >= 0, got {tau}")
    row = cache.eigenvectors[k]
    return float(np.dot(row * row, np.exp(2.0 * cache.eigenvalues * tau)))


def phi(cache: SpectralCache, intruders: Iterable[int], taus) -> np.ndarray:
    """phi summed over intruder nodes, for every tau in `taus`."""
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    if np.any(taus < 0):
        raise NegativeTime("tau must be >= 0")
    nodes = list(intruders)
    for k in nodes:
        _check_node(cache, k)
    if not nodes:
        return np.zeros_like(taus)
    mass = (cache.eigenvectors[nodes] ** 2).sum(axis=0)
    return np.exp(2.0 * np.outer(taus, cache.eigenvalues)) @ mass


def privacy_cost(graph: NetworkGraph, w, intruders: IntruderSet, window: CostWindow,
                 cache: SpectralCache | None = None) -> float:
    """f_t(w): Gauss-Legendre integral of phi over the window."""
    cache = cache if cache is not None else build_spectral_cache(graph, w)
    nodes, weights = window.rule()
    return float(weights @ phi(cache, intruders, nodes))


# -------------------------
# Gradients
# -------------------------
def _pointwise_paper(graph: NetworkGraph, cache: SpectralCache, intruders: Sequence[int], taus: np.ndarray) -> np.ndarray:
    # -2 tau diag(E^T exp(2 A tau) e_k e_k^T E): only edges touching k contribute
    E = graph.incidence
    B = E.T @ cache.eigenvectors  # (M, N)
    expo = np.exp(2.0 * np.outer(taus, cache.eigenvalues))  # (Q, N)
    out = np.zeros((taus.size, graph.edge_count))
    for k in intruders:
        col = (expo * cache.eigenvectors[k]) @ B.T  # (Q, M) = (E^T exp(2A tau) e_k)^T
        out += col * E[k]
    return -2.0 * taus[:, None] * out


def _divided_differences(mu: np.ndarray) -> np.ndarray:
    # F[q, i, j] = (exp(mu_i) - exp(mu_j)) / (mu_i - mu_j), exp(mu_i) on ties
    mi = mu[:, :, None]
    mj = mu[:, None, :]
    d = mi - mj
    small = np.abs(d) < 1e-13
    safe = np.where(small, 1.0, d)
    ratio = np.where(small, 1.0, np.expm1(safe) / safe)
    return np.exp(mj) * ratio


def _pointwise_spectral(graph: NetworkGraph, cache: SpectralCache, intruders: Sequence[int], taus: np.ndarray) -> np.ndarray:
    # Daleckii-Krein: d[e^X]_kk along Y = sum_ij c_i c_j (U^T Y U)_ij F_ij
    U = cache.eigenvectors
    V = U.T @ graph.incidence  # (N, M); U^T A_l U = -v_l v_l^T
    F = _divided_differences(2.0 * np.outer(taus, cache.eigenvalues))  # (Q, N, N)
    out = np.zeros((taus.size, graph.edge_count))
    for k in intruders:
        Z = U[k][:, None] * V  # (N, M)
        out += np.einsum("il,qij,jl->ql", Z, F, Z, optimize=True)
    return -2.0 * taus[:, None] * out


def _pointwise_block(graph: NetworkGraph, cache: SpectralCache, intruders: Sequence[int], taus: np.ndarray) -> np.ndarray:
    # top-right block of expm([[X, Y_l], [0, X]]) with X = 2 A tau, Y_l = 2 tau A_l
    n, m = cache.size, graph.edge_count
    if m == 0 or taus.size == 0:
        return np.zeros((taus.size, m))
    A = (cache.eigenvectors * cache.eigenvalues) @ cache.eigenvectors.T
    E = graph.incidence
    A_l = -np.einsum("il,jl->lij", E, E)  # (M, N, N)
    blocks = np.zeros((taus.size, m, 2 * n, 2 * n))
    X = 2.0 * taus[:, None, None] * A  # (Q, N, N)
    blocks[:, :, :n, :n] = X[:, None]
    blocks[:, :, n:, n:] = X[:, None]
    blocks[:, :, :n, n:] = 2.0 * taus[:, None, None, None] * A_l[None]
    top_right = scipy.linalg.expm(blocks)[:, :, :n, n:]
    nodes = list(intruders)
    return top_right[:, :, nodes, nodes].sum(axis=-1)


_POINTWISE = {
    "paper": _pointwise_paper,
    "spectral": _pointwise_spectral,
    "block": _pointwise_block,
}


def pointwise_gradient(graph: NetworkGraph, cache: SpectralCache, intruders: Iterable[int], taus,
                       method: str = "block") -> np.ndarray:
    """grad_w phi(w, tau) for each tau; shape (len(taus), M)."""
    if method not in _POINTWISE:
        raise ValueError(f"unknown gradient method {method!r}; use one of {sorted(_POINTWISE)}")
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    if np.any(taus < 0):
        raise NegativeTime("tau must be >= 0")
    nodes = list(intruders)
    for k in nodes:
        _check_node(cache, k)
    if graph.edge_count == 0 or not nodes:
        return np.zeros((taus.size, graph.edge_count))
    return _POINTWISE[method](graph, cache, nodes, taus)


def paper_gradient_at(graph: NetworkGraph, cache: SpectralCache, intruders: IntruderSet, tau: float) -> np.ndarray:
    return pointwise_gradient(graph, cache, intruders, [tau], method="paper")[0]


def exact_gradient_at(graph: NetworkGraph, cache: SpectralCache, intruders: IntruderSet, tau: float,
                      method: str = "block") -> np.ndarray:
    return pointwise_gradient(graph, cache, intruders, [tau], method=method)[0]


def paper_gradient(graph: NetworkGraph, cache: SpectralCache, intruders: IntruderSet, window: CostWindow,
                   weights=None) -> np.ndarray:
    """Integrated closed-form gradient; exact only when A(w) and A_l commute."""
    _check_fresh(cache, weights)
    nodes, quad_w = window.rule()
    return quad_w @ pointwise_gradient(graph, cache, intruders, nodes, method="paper")


def exact_gradient(graph: NetworkGraph, w, intruders: IntruderSet, window: CostWindow,
                   cache: SpectralCache | None = None, method: str = "block") -> np.ndarray:
    """Integrated Frechet-derivative gradient of f_t."""
    if cache is None:
        cache = build_spectral_cache(graph, w)
    else:
        _check_fresh(cache, w)
    nodes, quad_w = window.rule()
    return quad_w @ pointwise_gradient(graph, cache, intruders, nodes, method=method)


def window_gradient(graph: NetworkGraph, w, intruders: IntruderSet, window: CostWindow,
                    mode: str = "exact", cache: SpectralCache | None = None) -> np.ndarray:
    """Gradient selected by name: 'exact' (block Frechet) or 'paper'."""
    cache = cache if cache is not None else build_spectral_cache(graph, w)
    if mode == "paper":
        return paper_gradient(graph, cache, intruders, window, weights=w)
    if mode == "exact":
        return exact_gradient(graph, w, intruders, window, cache=cache)
    raise ValueError(f"unknown gradient mode {mode!r}; use 'exact' or 'paper'")


# -------------------------
# Cost sequences (pooled quadrature)
# -------------------------
def _pool(cost_sequence: Sequence[CostTerm]) -> List[Tuple[Tuple[int, ...], np.ndarray, np.ndarray]]:
    groups: dict = {}
    for intruders, window in cost_sequence:
        nodes, weights = window.rule()
        groups.setdefault(tuple(intruders.nodes), []).append((nodes, weights))
    return [
        (key, np.concatenate([n for n, _ in parts]), np.concatenate([q for _, q in parts]))
        for key, parts in groups.items()
    ]


class PooledSequence:
    """Window costs pooled per intruder set: one eigh per weight vector."""

    def __init__(self, graph: NetworkGraph, cost_sequence: Sequence[CostTerm]):
        self.graph = graph
        self.terms = list(cost_sequence)
        self.groups = _pool(self.terms)

    def cost(self, w, cache: SpectralCache | None = None) -> float:
        cache = cache if cache is not None else build_spectral_cache(self.graph, w)
        return float(sum(q @ phi(cache, key, nodes) for key, nodes, q in self.groups))

    def gradient(self, w, cache: SpectralCache | None = None, method: str = "spectral") -> np.ndarray:
        cache = cache if cache is not None else build_spectral_cache(self.graph, w)
        g = np.zeros(self.graph.edge_count)
        for key, nodes, q in self.groups:
            g += q @ pointwise_gradient(self.graph, cache, key, nodes, method=method)
        return g

    def per_term_costs(self, w) -> np.ndarray:
        cache = build_spectral_cache(self.graph, w)
        return np.array([privacy_cost(self.graph, w, k, win, cache=cache) for k, win in self.terms])


def sequence_cost(graph: NetworkGraph, w, cost_sequence: Sequence[CostTerm]) -> float:
    return PooledSequence(graph, cost_sequence).cost(w)


def sequence_gradient(graph: NetworkGraph, w, cost_sequence: Sequence[CostTerm], method: str = "spectral") -> np.ndarray:
    return PooledSequence(graph, cost_sequence).gradient(w, method=method)
