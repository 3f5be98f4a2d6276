import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flowtree.graph import build_graph
from flowtree.parallel import WorkSpanMeter, pmap
from flowtree.primitives import (
    RootedTree,
    connected_components,
    euler_tour_annotate,
    lca,
    max_spanning_tree,
    prefix_sum,
    subtree_sum,
    tree_separator,
)

from .conftest import random_connected_graph, random_tree


def random_rooted_tree(rng, n) -> RootedTree:
    parent = np.full(n, -1, dtype=np.int64)
    for v in range(1, n):
        parent[v] = int(rng.integers(0, v))
    caps = rng.uniform(0.5, 4.0, size=n)
    return RootedTree(parent, 0, cap_to_parent=caps)


# -- prefix sums ------------------------------------------------------------

def test_prefix_sum_basic():
    assert list(prefix_sum([1, 2, 3])) == [1, 3, 6]


def test_prefix_sum_empty():
    assert len(prefix_sum([])) == 0


def test_prefix_sum_matches_sequential(rng):
    x = rng.normal(size=100_000)
    got = prefix_sum(x)
    want = np.cumsum(x)
    scale = np.maximum(np.abs(want), 1.0)
    assert np.max(np.abs(got - want) / scale) < 1e-9


@given(st.lists(st.floats(-100, 100, allow_nan=False), max_size=300))
@settings(max_examples=50, deadline=None)
def test_prefix_sum_property(xs):
    got = prefix_sum(xs)
    want = np.cumsum(np.array(xs, dtype=np.float64)) if xs else np.zeros(0)
    assert np.allclose(got, want, rtol=1e-9, atol=1e-9)


def test_prefix_sum_span_logarithmic():
    spans = []
    for k in range(10, 21):
        with WorkSpanMeter() as meter:
            prefix_sum(np.ones(2 ** k))
        spans.append(meter.span)
    deltas = np.diff(spans)
    assert (deltas <= 3).all()


# -- euler tour annotations --------------------------------------------------

def test_euler_path_tree():
    t = RootedTree([-1, 0, 1], 0)
    first, last, parent, depth = euler_tour_annotate(t)
    assert depth[2] == 2
    assert parent[2] == 1


def test_euler_star():
    t = RootedTree([-1, 0, 0, 0], 0)
    _, _, _, depth = euler_tour_annotate(t)
    assert list(depth[1:]) == [1, 1, 1]


def test_euler_matches_recursive_oracle(rng):
    t = random_rooted_tree(rng, 200)

    def oracle_depth(v):
        d = 0
        while t.parent[v] != -1:
            v = int(t.parent[v])
            d += 1
        return d

    first, last, parent, depth = euler_tour_annotate(t)
    for v in range(200):
        assert depth[v] == oracle_depth(v)
    # interval nesting: child interval strictly inside parent interval
    for v in range(1, 200):
        p = int(parent[v])
        if p != t.root:
            assert first[p] < first[v] <= last[v] < last[p]


# -- subtree sums -------------------------------------------------------------

def test_subtree_sum_all_ones(rng):
    t = random_rooted_tree(rng, 50)
    sums = subtree_sum(t, np.ones(50))
    assert sums[t.root] == 50


def test_subtree_leaf_is_own_weight(rng):
    t = RootedTree([-1, 0, 0], 0)
    sums = subtree_sum(t, [5.0, 2.0, 3.0])
    assert sums[1] == 2.0 and sums[2] == 3.0


def test_subtree_sum_matches_oracle(rng):
    t = random_rooted_tree(rng, 233)
    w = rng.normal(size=233)
    got = subtree_sum(t, w)
    want = w.copy()
    by_depth = sorted(range(233), key=lambda v: -int(t.depth[v]))
    for v in by_depth:
        if t.parent[v] != -1:
            want[int(t.parent[v])] += want[v]
    assert np.allclose(got, want, rtol=1e-9, atol=1e-12)


def test_subtree_sum_span_logarithmic_on_paths():
    spans = []
    for k in range(10, 16):
        n = 2 ** k
        parent = np.arange(-1, n - 1, dtype=np.int64)  # path: worst-case depth
        t = RootedTree(parent, 0)
        with WorkSpanMeter() as meter:
            subtree_sum(t, np.ones(n))
        spans.append(meter.span)
    assert (np.diff(spans) <= 3).all()


# -- lca ----------------------------------------------------------------------

def test_lca_with_root(rng):
    t = random_rooted_tree(rng, 40)
    assert lca(t, 17, t.root) == t.root


def test_lca_siblings():
    t = RootedTree([-1, 0, 0], 0)
    assert lca(t, 1, 2) == 0


def test_lca_matches_naive_walk(rng):
    t = random_rooted_tree(rng, 150)

    def naive(u, v):
        anc = set()
        while u != -1:
            anc.add(u)
            u = int(t.parent[u])
        while v not in anc:
            v = int(t.parent[v])
        return v

    for _ in range(100):
        u = int(rng.integers(0, 150))
        v = int(rng.integers(0, 150))
        assert lca(t, u, v) == naive(u, v)


# -- tree separator ------------------------------------------------------------

def test_separator_star():
    t = RootedTree([-1, 0, 0, 0, 0], 0)
    assert tree_separator(t) == 0


def test_separator_path_middle():
    t = RootedTree([-1, 0, 1, 2, 3], 0)
    assert tree_separator(t) == 2


def test_separator_component_bound(rng):
    for _ in range(25):
        n = int(rng.integers(2, 120))
        t = random_rooted_tree(rng, n)
        q = tree_separator(t)
        # component sizes after removing q
        comp_sizes = []
        seen = {q}
        for v in range(n):
            if v in seen:
                continue
            # walk to root or q, collecting the component lazily via BFS
        adj = [[] for _ in range(n)]
        for v in range(n):
            p = int(t.parent[v])
            if p >= 0:
                adj[v].append(p)
                adj[p].append(v)
        seen = {q}
        for v in range(n):
            if v in seen:
                continue
            stack, comp = [v], 0
            block = set()
            while stack:
                u = stack.pop()
                if u in seen or u in block:
                    continue
                block.add(u)
                comp += 1
                for w in adj[u]:
                    if w not in seen and w not in block:
                        stack.append(w)
            seen |= block
            comp_sizes.append(comp)
        assert all(c <= n / 2 for c in comp_sizes)


# -- connectivity ---------------------------------------------------------------

def test_components_two_disjoint_edges():
    g = build_graph([(0, 1, 1.0), (2, 3, 1.0)], n=4)
    labels = connected_components(g)
    assert labels[0] == labels[1]
    assert labels[2] == labels[3]
    assert labels[0] != labels[2]


def test_components_connected(rng):
    g = random_connected_graph(rng, 60, 30)
    labels = connected_components(g)
    assert len(set(labels.tolist())) == 1


def test_components_match_bfs(rng):
    for _ in range(10):
        n = 40
        m = int(rng.integers(0, 50))
        edges = []
        for _ in range(m):
            u, v = int(rng.integers(0, n)), int(rng.integers(0, n))
            if u != v:
                edges.append((u, v, 1.0))
        g = build_graph(edges, n)
        labels = connected_components(g)
        # BFS oracle
        adj = [[] for _ in range(n)]
        for u, v, _ in edges:
            adj[u].append(v)
            adj[v].append(u)
        oracle = [-1] * n
        for v in range(n):
            if oracle[v] >= 0:
                continue
            stack = [v]
            while stack:
                u = stack.pop()
                if oracle[u] >= 0:
                    continue
                oracle[u] = v
                stack.extend(adj[u])
        for a in range(n):
            for b in range(n):
                assert (labels[a] == labels[b]) == (oracle[a] == oracle[b])


# -- max spanning tree ------------------------------------------------------------

def kruskal_oracle(g):
    order = sorted(range(g.m), key=lambda e: (-g.cap[e], e))
    parent = list(range(g.n))

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    out = []
    for e in order:
        a, b = find(int(g.eu[e])), find(int(g.ev[e]))
        if a != b:
            parent[a] = b
            out.append(e)
    return sorted(out)


def test_mst_triangle():
    g = build_graph([(0, 1, 1.0), (1, 2, 2.0), (0, 2, 3.0)], n=3)
    assert sorted(max_spanning_tree(g).tolist()) == [1, 2]


def test_mst_tree_input(rng):
    g = random_tree(rng, 30)
    assert sorted(max_spanning_tree(g).tolist()) == list(range(29))


def test_mst_equal_capacities_weight():
    g = build_graph([(0, 1, 2.0), (1, 2, 2.0), (0, 2, 2.0)], n=3)
    ids = max_spanning_tree(g)
    assert len(ids) == 2
    assert g.cap[ids].sum() == 4.0


def test_mst_matches_kruskal(rng):
    for _ in range(15):
        n = int(rng.integers(2, 60))
        g = random_connected_graph(rng, n, n)
        assert sorted(max_spanning_tree(g).tolist()) == kruskal_oracle(g)


def test_mst_disconnected_raises():
    g = build_graph([(0, 1, 1.0), (2, 3, 1.0)], n=4)
    with pytest.raises(ValueError, match="2 components"):
        max_spanning_tree(g)


# -- determinism across worker counts ----------------------------------------------

def test_pmap_deterministic_output(rng):
    data = [rng.normal(size=50) for _ in range(16)]

    def task(x):
        return float(prefix_sum(x)[-1])

    seq = pmap(task, data, workers=1)
    par = pmap(task, data, workers=8)
    assert seq == par


def test_primitives_identical_across_workers(rng, monkeypatch):
    g = random_connected_graph(rng, 80, 80)
    t = random_rooted_tree(rng, 80)
    w = rng.normal(size=80)
    monkeypatch.setenv("FLOWTREE_THREADS", "1")
    a = (prefix_sum(w).tobytes(), subtree_sum(t, w).tobytes(),
         connected_components(g).tobytes(), max_spanning_tree(g).tobytes())
    monkeypatch.setenv("FLOWTREE_THREADS", "16")
    b = (prefix_sum(w).tobytes(), subtree_sum(t, w).tobytes(),
         connected_components(g).tobytes(), max_spanning_tree(g).tobytes())
    assert a == b
