# tests/conftest.py
import os

import numpy as np
import pytest

from graph_model.network import build_graph, random_connected_graph

ROOT_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
SCENARIO_DIR = os.path.join(ROOT_DIR, "scenarios")


@pytest.fixture
def two_node():
    return build_graph(2, [(0, 1)], 0.01, 0.99)


@pytest.fixture
def path3():
    return build_graph(3, [(0, 1), (1, 2)], 0.01, 0.99)


@pytest.fixture
def triangle():
    return build_graph(3, [(0, 1), (1, 2), (0, 2)], 0.01, 0.99)


@pytest.fixture
def single_node():
    return build_graph(1, [], 0.01, 0.99)


@pytest.fixture
def rng():
    return np.random.default_rng(20240521)


def random_graphs(count, max_nodes, max_edges=20, seed=0, min_nodes=2):
    """Seeded connected graphs with node_count <= max_nodes and edge_count <= max_edges."""
    gen = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        n = int(gen.integers(min_nodes, max_nodes + 1))
        m_hi = min(n * (n - 1) // 2, max_edges)
        m = int(gen.integers(n - 1, m_hi + 1))
        out.append(random_connected_graph(n, m, seed=int(gen.integers(0, 2**31 - 1))))
    return out


@pytest.fixture
def scenario_path():
    return lambda name: os.path.join(SCENARIO_DIR, name)


@pytest.fixture
def write_scenario(tmp_path):
    def _write(text, name="case.scenario"):
        p = tmp_path / name
        p.write_text(text, encoding="utf-8")
        return str(p)
    return _write
