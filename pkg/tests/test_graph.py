import numpy as np
import pytest

from flowtree.graph import (
    GraphError,
    attach_source_sink,
    build_graph,
    contract,
    serialize_edge_list,
    subdivide,
)
from flowtree.ioformats import parse_edge_list_text
from flowtree.oracles import exact_max_flow_oracle

from .conftest import random_connected_graph


def test_single_edge_adjacency():
    g = build_graph([(0, 1, 2.0)], n=2)
    assert g.m == 1
    assert list(g.adjacency[0]) == [0]
    assert list(g.adjacency[1]) == [0]


def test_parallel_edges_kept():
    g = build_graph([(0, 1, 1.0), (0, 1, 3.0)], n=2)
    assert g.m == 2
    assert g.cap[0] == 1.0 and g.cap[1] == 3.0


def test_self_loop_rejected():
    with pytest.raises(GraphError, match="self-loop"):
        build_graph([(0, 0, 1.0)], n=1)


def test_nonpositive_capacity_rejected():
    with pytest.raises(GraphError, match="capacity"):
        build_graph([(0, 1, 0.0)], n=2)


def test_out_of_range_vertex_rejected():
    with pytest.raises(GraphError, match="out of range"):
        build_graph([(0, 5, 1.0)], n=2)


def test_subdivide_single_edge():
    g = build_graph([(0, 1, 5.0)], n=2)
    s = subdivide(g)
    assert s.graph.n == 3 and s.graph.m == 2
    x = s.split_vertex(0)
    assert x == 2
    assert sorted(s.graph.edge_list()) == [(0, 2, 5.0), (2, 1, 5.0)] or \
        s.graph.edge_list() == [(0, 2, 5.0), (2, 1, 5.0)]


def test_subdivide_triangle_counts():
    g = build_graph([(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)], n=3)
    s = subdivide(g)
    assert s.graph.n == 6
    assert s.graph.m == 6


def test_subdivide_empty():
    g = build_graph([], n=1)
    s = subdivide(g)
    assert s.graph.n == 1 and s.graph.m == 0


def test_subdivide_preserves_min_cut(rng):
    for _ in range(10):
        n = int(rng.integers(3, 9))
        g = random_connected_graph(rng, n, n, integer_caps=True)
        sg = subdivide(g).graph
        s, t = 0, n - 1
        v1, _, _ = exact_max_flow_oracle(g, s, t)
        v2, _, _ = exact_max_flow_oracle(sg, s, t)
        assert v1 == pytest.approx(v2, rel=1e-9)


def test_contract_path():
    # path a-b-c, keep {a}: (a, uX) at c(a,b); (b, c) vanishes as a self-loop
    g = build_graph([(0, 1, 3.0), (1, 2, 5.0)], n=3)
    c = contract(g, [0])
    assert c.graph.n == 2
    assert c.graph.m == 1
    assert c.graph.cap[0] == 3.0
    assert len(c.boundary_edges) == 1


def test_contract_four_cycle():
    # 4-cycle a-b-c-d: keep {a, b} -> (a,b) kept, two boundary edges, (c,d) gone
    g = build_graph([(0, 1, 1.0), (1, 2, 2.0), (2, 3, 3.0), (3, 0, 4.0)], n=4)
    c = contract(g, [0, 1])
    assert c.graph.n == 3
    caps = sorted(c.graph.edge_list())
    assert c.graph.m == 3
    assert len(c.boundary_edges) == 2
    internal = [e for e in range(c.graph.m) if e not in set(c.boundary_edges)]
    assert len(internal) == 1
    assert c.graph.cap[internal[0]] == 1.0


def test_contract_reweight_halves_boundary_only():
    g = build_graph([(0, 1, 1.0), (1, 2, 2.0), (2, 3, 3.0), (3, 0, 4.0)], n=4)
    c = contract(g, [0, 1], reweight=0.5)
    for e in c.boundary_edges:
        base = c.origin_edge[e]
        assert c.graph.cap[e] == pytest.approx(0.5 * g.cap[base])
    internal = [e for e in range(c.graph.m) if e not in set(c.boundary_edges)]
    assert c.graph.cap[internal[0]] == 1.0


def test_contract_rejects_bad_sets():
    g = build_graph([(0, 1, 1.0)], n=2)
    with pytest.raises(GraphError):
        contract(g, [])
    with pytest.raises(GraphError):
        contract(g, [0, 1])
    with pytest.raises(GraphError):
        contract(g, [0], reweight=0.0)


def test_contract_boundary_matches_cut(rng):
    for _ in range(20):
        n = int(rng.integers(4, 50))
        g = random_connected_graph(rng, n, 2 * n)
        k = int(rng.integers(1, n))
        kept = rng.choice(n, size=k, replace=False)
        c = contract(g, kept)
        boundary_cap = float(c.graph.cap[c.boundary_edges].sum())
        assert boundary_cap == pytest.approx(g.cut_capacity(kept), rel=1e-12)


def test_attach_source_sink_counts():
    g = build_graph([(0, 1, 1.0)], n=2)
    h, s, t = attach_source_sink(g, [(0, 1.0)], [(1, 2.0)])
    assert h.n == 4 and h.m == 3
    assert s == 2 and t == 3


def test_attach_source_sink_overlap_allowed():
    g = build_graph([(0, 1, 1.0)], n=2)
    h, s, t = attach_source_sink(g, [(0, 1.0)], [(0, 2.0)])
    incident_0 = set(map(int, h.adjacency[0]))
    assert len(incident_0) == 3


def test_attach_source_sink_empty_rejected():
    g = build_graph([(0, 1, 1.0)], n=2)
    with pytest.raises(GraphError):
        attach_source_sink(g, [], [(1, 1.0)])


def test_serialize_round_trip(rng):
    g = random_connected_graph(rng, 17, 23)
    text = serialize_edge_list(g)
    g2 = parse_edge_list_text(text)
    assert g2.n == g.n and g2.m == g.m
    assert np.array_equal(g2.eu, g.eu)
    assert np.array_equal(g2.ev, g.ev)
    assert np.array_equal(g2.cap, g.cap)
