import numpy as np
import pytest

from flowtree.graph import Graph, build_graph


def random_connected_graph(rng, n, extra_edges, cap_low=1.0, cap_high=10.0,
                           integer_caps=False) -> Graph:
    """Random spanning tree plus `extra_edges` extra edges, all capacities
    drawn from [cap_low, cap_high]."""
    edges = []
    for v in range(1, n):
        u = int(rng.integers(0, v))
        edges.append((u, v))
    for _ in range(extra_edges):
        u = int(rng.integers(0, n))
        v = int(rng.integers(0, n))
        if u != v:
            edges.append((min(u, v), max(u, v)))
    if integer_caps:
        caps = rng.integers(max(1, int(cap_low)), int(cap_high) + 1,
                            size=len(edges)).astype(float)
    else:
        caps = rng.uniform(cap_low, cap_high, size=len(edges))
    return build_graph([(u, v, c) for (u, v), c in zip(edges, caps)], n)


def random_tree(rng, n, cap_low=1.0, cap_high=10.0) -> Graph:
    return random_connected_graph(rng, n, 0, cap_low, cap_high)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
