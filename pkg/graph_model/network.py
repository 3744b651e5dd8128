# graph_model/network.py
# Undirected weighted communication graph and the parametrized system
# matrix A(w) = -I - sum_l w_l e_ij e_ij^T.

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Iterable, List, Sequence, Tuple

import networkx as nx
import numpy as np
import numpy.typing as npt
from networkx.utils import UnionFind

from utils.errors import (
    DimensionMismatch,
    DisconnectedGraph,
    DuplicateEdge,
    IndexOutOfRange,
    InfeasibleBounds,
    InfeasibleWeights,
    NonSymmetricInput,
    SelfLoop,
)

log = logging.getLogger(__name__)

WeightVector = npt.NDArray[np.float64]

SUM_TOL = 1e-10
SYMMETRY_TOL = 1e-12


# -------------------------
# Graph
# -------------------------
@dataclass(frozen=True)
class NetworkGraph:
    """
    Immutable graph. Nodes are 0..node_count-1; edges[l] = (i, j) with i < j
    and l is the edge index sigma(i, j), assigned by input order.
    """
    node_count: int
    edges: Tuple[Tuple[int, int], ...]
    weight_lower: float
    weight_upper: float

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @cached_property
    def edge_index(self) -> Dict[Tuple[int, int], int]:
        return {e: l for l, e in enumerate(self.edges)}

    @cached_property
    def incidence(self) -> np.ndarray:
        E = np.zeros((self.node_count, self.edge_count))
        for l, (i, j) in enumerate(self.edges):
            E[i, l] = 1.0
            E[j, l] = -1.0
        E.flags.writeable = False
        return E

    def sigma(self, i: int, j: int) -> int:
        key = (min(i, j), max(i, j))
        if key not in self.edge_index:
            raise IndexOutOfRange(f"no edge between nodes {i} and {j}")
        return self.edge_index[key]

    def neighbors(self, node: int) -> List[int]:
        out = []
        for i, j in self.edges:
            if i == node:
                out.append(j)
            elif j == node:
                out.append(i)
        return out

    def to_networkx(self, weights: Sequence[float] | None = None) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.node_count))
        for l, (i, j) in enumerate(self.edges):
            g.add_edge(i, j, index=l, weight=None if weights is None else float(weights[l]))
        return g


@dataclass(frozen=True)
class IntruderSet:
    """Nodes whose state an intruder reads (y = x_k for every k)."""
    nodes: Tuple[int, ...] = field(default_factory=tuple)

    def __iter__(self):
        return iter(self.nodes)

    def __len__(self) -> int:
        return len(self.nodes)


def build_graph(node_count: int, edge_list: Iterable[Sequence[int]], w_min: float, w_max: float) -> NetworkGraph:
    """
    Validate and freeze a graph. Edge order fixes sigma. Checks run in the
    order: index range, self-loops, duplicates, connectivity, bounds.
    """
    if node_count < 1:
        raise IndexOutOfRange(f"node_count must be positive, got {node_count}")
    edges: List[Tuple[int, int]] = []
    seen = set()
    for pair in edge_list:
        i, j = (int(v) for v in pair)
        for v in (i, j):
            if not 0 <= v < node_count:
                raise IndexOutOfRange(f"node {v} out of range for {node_count} nodes")
        if i == j:
            raise SelfLoop(f"self-loop at node {i}")
        key = (min(i, j), max(i, j))
        if key in seen:
            raise DuplicateEdge(f"duplicate edge {key}")
        seen.add(key)
        edges.append(key)

    if not edges and node_count > 1:
        raise DisconnectedGraph(f"{node_count} nodes and no edges")

    uf = UnionFind(range(node_count))
    for i, j in edges:
        uf.union(i, j)
    roots = {uf[v] for v in range(node_count)}
    if len(roots) > 1:
        isolated = sorted(v for v in range(node_count) if uf[v] != uf[0])
        raise DisconnectedGraph(f"{len(roots)} components; nodes {isolated} unreachable from node 0")

    _check_bounds(len(edges), w_min, w_max)
    return NetworkGraph(node_count=node_count, edges=tuple(edges), weight_lower=float(w_min), weight_upper=float(w_max))


def _check_bounds(m: int, w_min: float, w_max: float) -> None:
    if not w_min > 0:
        raise InfeasibleBounds(f"w_min must be > 0, got {w_min}")
    if not w_max < 1:
        raise InfeasibleBounds(f"w_max must be < 1, got {w_max}")
    if w_min > w_max:
        raise InfeasibleBounds(f"w_min {w_min} exceeds w_max {w_max}")
    # one edge: the sum constraint alone pins w = (1); no edge: nothing to weight
    if m <= 1:
        return
    if m * w_min > 1 + SUM_TOL:
        raise InfeasibleBounds(f"{m}·{w_min:g} > 1")
    if m * w_max < 1 - SUM_TOL:
        raise InfeasibleBounds(f"{m}·{w_max:g} < 1")


# -------------------------
# Random generators (seeded)
# -------------------------
def erdos_renyi_graph(node_count: int, edge_probability: float, seed: int,
                      w_min: float = 0.01, w_max: float = 0.99, max_tries: int = 1000) -> NetworkGraph:
    """G(n, p) with retry-until-connected; try t uses seed + t."""
    for t in range(max_tries):
        g = nx.gnp_random_graph(node_count, edge_probability, seed=seed + t)
        if node_count == 1 or (g.number_of_edges() and nx.is_connected(g)):
            log.debug("erdos_renyi: connected after %d tries (%d edges)", t + 1, g.number_of_edges())
            return build_graph(node_count, sorted(g.edges()), w_min, w_max)
    raise DisconnectedGraph(f"no connected G({node_count}, {edge_probability}) in {max_tries} tries")


def random_connected_graph(node_count: int, edge_count: int, seed: int,
                           w_min: float = 0.01, w_max: float = 0.99, max_tries: int = 1000) -> NetworkGraph:
    """G(n, m) with retry-until-connected."""
    if edge_count < node_count - 1:
        raise DisconnectedGraph(f"{edge_count} edges cannot connect {node_count} nodes")
    for t in range(max_tries):
        g = nx.gnm_random_graph(node_count, edge_count, seed=seed + t)
        if node_count == 1 or nx.is_connected(g):
            return build_graph(node_count, sorted(g.edges()), w_min, w_max)
    raise DisconnectedGraph(f"no connected G({node_count}, m={edge_count}) in {max_tries} tries")


# -------------------------
# Weights and intruders
# -------------------------
def is_feasible(graph: NetworkGraph, w: np.ndarray, tol: float = SUM_TOL) -> bool:
    w = np.asarray(w, dtype=float)
    if w.shape != (graph.edge_count,):
        return False
    if graph.edge_count == 0:
        return True
    if abs(w.sum() - 1.0) > tol:
        return False
    if graph.edge_count == 1:
        return True
    return bool(np.all(w >= graph.weight_lower - tol) and np.all(w <= graph.weight_upper + tol))


def as_weight_vector(graph: NetworkGraph, values: Sequence[float], check_feasible: bool = True) -> WeightVector:
    w = np.asarray(values, dtype=float).reshape(-1)
    if w.shape != (graph.edge_count,):
        raise DimensionMismatch(f"expected {graph.edge_count} weights, got {w.size}")
    if check_feasible and not is_feasible(graph, w):
        raise InfeasibleWeights(
            f"weights must sum to 1 and lie in [{graph.weight_lower:g}, {graph.weight_upper:g}]; "
            f"sum={w.sum():.12g}, min={w.min():.6g}, max={w.max():.6g}"
        )
    return w


def uniform_weights(graph: NetworkGraph) -> WeightVector:
    m = graph.edge_count
    return np.full(m, 1.0 / m) if m else np.zeros(0)


def make_intruders(graph: NetworkGraph, nodes: Iterable[int]) -> IntruderSet:
    picked = sorted({int(k) for k in nodes})
    if not picked:
        raise IndexOutOfRange("intruder set must be nonempty")
    for k in picked:
        if not 0 <= k < graph.node_count:
            raise IndexOutOfRange(f"intruder node {k} out of range for {graph.node_count} nodes")
    return IntruderSet(tuple(picked))


# -------------------------
# Matrices
# -------------------------
def incidence_column(graph: NetworkGraph, l: int) -> np.ndarray:
    """e_i - e_j for edge l = sigma(i, j), i < j."""
    if not 0 <= l < graph.edge_count:
        raise IndexOutOfRange(f"edge index {l} out of range for {graph.edge_count} edges")
    return graph.incidence[:, l].copy()


def incidence_matrix(graph: NetworkGraph) -> np.ndarray:
    return graph.incidence.copy()


def _check_weights_shape(graph: NetworkGraph, w) -> np.ndarray:
    w = np.asarray(w, dtype=float).reshape(-1)
    if w.shape != (graph.edge_count,):
        raise DimensionMismatch(f"expected {graph.edge_count} weights, got {w.size}")
    return w


def weighted_adjacency(graph: NetworkGraph, w) -> np.ndarray:
    w = _check_weights_shape(graph, w)
    W = np.zeros((graph.node_count, graph.node_count))
    for l, (i, j) in enumerate(graph.edges):
        W[i, j] = W[j, i] = w[l]
    return W


def weighted_laplacian(graph: NetworkGraph, w) -> np.ndarray:
    W = weighted_adjacency(graph, w)
    return np.diag(W.sum(axis=1)) - W


def assemble_system_matrix(graph: NetworkGraph, w) -> np.ndarray:
    """A(w) = -I - L(w). Weights are only shape-checked, not bound-checked."""
    return -np.eye(graph.node_count) - weighted_laplacian(graph, w)


def edge_direction(graph: NetworkGraph, l: int) -> np.ndarray:
    """A_l = -e_ij e_ij^T."""
    e = incidence_column(graph, l)
    return -np.outer(e, e)


@dataclass(frozen=True)
class DefinitenessReport:
    negative_definite: bool
    max_eigenvalue: float

    def __bool__(self) -> bool:
        return self.negative_definite


def check_symmetric(A: np.ndarray, tol: float = SYMMETRY_TOL) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise NonSymmetricInput(f"expected a square matrix, got shape {A.shape}")
    scale = max(1.0, float(np.abs(A).max(initial=0.0)))
    if not np.allclose(A, A.T, rtol=0.0, atol=tol * scale):
        raise NonSymmetricInput(f"matrix is not symmetric (max |A - A^T| = {np.abs(A - A.T).max():.3g})")
    return A


def verify_negative_definite(A: np.ndarray) -> DefinitenessReport:
    A = check_symmetric(A)
    lam_max = float(np.linalg.eigvalsh(A)[-1])
    return DefinitenessReport(negative_definite=lam_max < 0.0, max_eigenvalue=lam_max)
