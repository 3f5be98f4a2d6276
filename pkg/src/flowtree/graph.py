"""Core graph types: capacitated multigraphs, subdivisions, contractions,
and source/sink attachment.

A :class:`Graph` is immutable after construction and safe to share across
threads.  Edge identity is positional (dense ids ``0..m-1`` in construction
order) and every derived graph records per-edge provenance back to its base,
so flows computed downstream can always be attributed to original edges.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class GraphError(ValueError):
    """Raised for invalid graph construction or malformed operations."""


class Graph:
    """Undirected capacitated multigraph with stable edge ids.

    Attributes:
        n: vertex count; vertices are ``0..n-1``.
        m: edge count; edge ids are ``0..m-1`` in construction order.
        eu, ev: int64 endpoint arrays (the stored orientation is ``eu -> ev``).
        cap: float64 positive capacities.
    """

    __slots__ = ("n", "eu", "ev", "cap", "_adj")

    def __init__(self, n: int, eu, ev, cap, _validated: bool = False):
        self.n = int(n)
        self.eu = np.asarray(eu, dtype=np.int64)
        self.ev = np.asarray(ev, dtype=np.int64)
        self.cap = np.asarray(cap, dtype=np.float64)
        self._adj: list[np.ndarray] | None = None
        if not _validated:
            self._validate()

    def _validate(self) -> None:
        if not (len(self.eu) == len(self.ev) == len(self.cap)):
            raise GraphError("endpoint/capacity arrays must have equal length")
        for i in range(self.m):
            u, v, c = int(self.eu[i]), int(self.ev[i]), float(self.cap[i])
            if u == v:
                raise GraphError(f"edge {i} is a self-loop at vertex {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise GraphError(f"edge {i} endpoint out of range: ({u}, {v})")
            if not (c > 0):
                raise GraphError(f"edge {i} has nonpositive capacity {c}")

    @property
    def m(self) -> int:
        return len(self.eu)

    @property
    def adjacency(self) -> list[np.ndarray]:
        """Per-vertex array of incident edge ids (built lazily, then cached)."""
        if self._adj is None:
            adj: list[list[int]] = [[] for _ in range(self.n)]
            for i in range(self.m):
                adj[int(self.eu[i])].append(i)
                adj[int(self.ev[i])].append(i)
            self._adj = [np.array(a, dtype=np.int64) for a in adj]
        return self._adj

    def other_end(self, edge: int, v: int) -> int:
        u = int(self.eu[edge])
        return int(self.ev[edge]) if u == v else u

    def edge_list(self) -> list[tuple[int, int, float]]:
        return [(int(self.eu[i]), int(self.ev[i]), float(self.cap[i]))
                for i in range(self.m)]

    def cut_capacity(self, side) -> float:
        """Total capacity of edges crossing (side, V \\ side)."""
        mask = np.zeros(self.n, dtype=bool)
        mask[np.asarray(sorted(side), dtype=np.int64)] = True
        cross = mask[self.eu] != mask[self.ev]
        return float(self.cap[cross].sum())

    def degree_capacity(self) -> np.ndarray:
        """Per-vertex total incident capacity."""
        out = np.bincount(self.eu, weights=self.cap, minlength=self.n)
        out += np.bincount(self.ev, weights=self.cap, minlength=self.n)
        return out

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, m={self.m})"


def build_graph(edges, n: int) -> Graph:
    """Build a graph from (u, v, capacity) triples.

    Parallel edges are kept as distinct edges; self-loops are rejected here
    (they are only ever deleted silently when a contraction creates them).
    """
    eu = np.empty(len(edges), dtype=np.int64)
    ev = np.empty(len(edges), dtype=np.int64)
    cap = np.empty(len(edges), dtype=np.float64)
    for i, (u, v, c) in enumerate(edges):
        eu[i], ev[i], cap[i] = u, v, c
    return Graph(n, eu, ev, cap)


@dataclass(frozen=True)
class SubdivisionGraph:
    """Subdivision of a base graph: every edge split by a midpoint vertex.

    Vertices ``0..n-1`` are the base vertices; the split vertex of base edge
    ``e`` is ``n + e``.  Both halves of edge ``e`` carry its full capacity.
    Half-edge ids are ``2e`` (u side) and ``2e + 1`` (v side).
    """

    base: Graph
    graph: Graph

    @property
    def split_vertex_of(self) -> np.ndarray:
        return np.arange(self.base.n, self.base.n + self.base.m, dtype=np.int64)

    def split_vertex(self, edge_id: int) -> int:
        return self.base.n + int(edge_id)


def subdivide(graph: Graph) -> SubdivisionGraph:
    """Split each edge (u, v, c) into (u, x_e, c) and (x_e, v, c)."""
    n, m = graph.n, graph.m
    eu = np.empty(2 * m, dtype=np.int64)
    ev = np.empty(2 * m, dtype=np.int64)
    cap = np.empty(2 * m, dtype=np.float64)
    xs = np.arange(n, n + m, dtype=np.int64)
    eu[0::2] = graph.eu
    ev[0::2] = xs
    eu[1::2] = xs
    ev[1::2] = graph.ev
    cap[0::2] = graph.cap
    cap[1::2] = graph.cap
    return SubdivisionGraph(base=graph, graph=Graph(n + m, eu, ev, cap, _validated=True))


@dataclass(frozen=True)
class ContractedSubgraph:
    """A graph with everything outside ``kept`` collapsed into one supernode.

    Vertices of the realized graph: kept vertices renumbered ``0..k-1`` in
    ascending original id, plus the supernode ``k``.  Self-loops created by
    the contraction are dropped; parallel edges (including parallel boundary
    edges) are retained, and boundary capacities are scaled by the reweight
    factor.  ``origin_edge[i]`` is the base edge id realized edge ``i`` came
    from.
    """

    base: Graph
    kept: np.ndarray            # ascending original vertex ids
    supernode: int              # vertex id of u_X in the realized graph
    graph: Graph
    origin_edge: np.ndarray     # realized edge id -> base edge id
    to_local: dict[int, int] = field(repr=False)  # base vertex -> local id
    boundary_edges: np.ndarray = field(repr=False)  # realized ids incident on u_X
    reweight: np.ndarray = field(repr=False)        # per realized edge, 1 internally

    def local(self, base_vertex: int) -> int:
        return self.to_local[int(base_vertex)]

    def to_base_vertex(self, local_vertex: int) -> int:
        """Base vertex of a local id (raises on the supernode)."""
        if local_vertex == self.supernode:
            raise GraphError("the supernode has no single base vertex")
        return int(self.kept[local_vertex])


def contract(graph: Graph, kept_vertices, reweight=1.0) -> ContractedSubgraph:
    """Contract ``V \\ kept_vertices`` into a single supernode.

    ``reweight`` is either a constant in (0, 1] applied to every boundary
    edge or a mapping from base edge id to a factor in (0, 1].
    """
    kept = np.array(sorted(set(int(v) for v in kept_vertices)), dtype=np.int64)
    if len(kept) == 0:
        raise GraphError("kept vertex set must be nonempty")
    if len(kept) >= graph.n:
        raise GraphError("kept vertex set must be a proper subset of V")
    if (kept < 0).any() or (kept >= graph.n).any():
        raise GraphError("kept vertex out of range")
    to_local = {int(v): i for i, v in enumerate(kept)}
    k = len(kept)
    sup = k

    def factor(edge_id: int) -> float:
        if callable(reweight):
            w = float(reweight(edge_id))
        elif isinstance(reweight, dict):
            w = float(reweight.get(edge_id, 1.0))
        else:
            w = float(reweight)
        if not (0.0 < w <= 1.0):
            raise GraphError(f"reweight factor {w} for edge {edge_id} not in (0, 1]")
        return w

    eu_out: list[int] = []
    ev_out: list[int] = []
    cap_out: list[float] = []
    origin: list[int] = []
    rw: list[float] = []
    boundary: list[int] = []
    in_kept = np.zeros(graph.n, dtype=bool)
    in_kept[kept] = True
    for e in range(graph.m):
        u, v = int(graph.eu[e]), int(graph.ev[e])
        ku, kv = in_kept[u], in_kept[v]
        if not ku and not kv:
            continue  # becomes a self-loop at the supernode
        if ku and kv:
            eu_out.append(to_local[u])
            ev_out.append(to_local[v])
            cap_out.append(float(graph.cap[e]))
            rw.append(1.0)
        else:
            w = factor(e)
            inside = to_local[u] if ku else to_local[v]
            boundary.append(len(eu_out))
            eu_out.append(inside)
            ev_out.append(sup)
            cap_out.append(float(graph.cap[e]) * w)
            rw.append(w)
        origin.append(e)
    realized = Graph(k + 1, np.array(eu_out, dtype=np.int64),
                     np.array(ev_out, dtype=np.int64),
                     np.array(cap_out, dtype=np.float64), _validated=True)
    return ContractedSubgraph(
        base=graph, kept=kept, supernode=sup, graph=realized,
        origin_edge=np.array(origin, dtype=np.int64), to_local=to_local,
        boundary_edges=np.array(boundary, dtype=np.int64),
        reweight=np.array(rw, dtype=np.float64),
    )


def attach_source_sink(graph: Graph, sources, sinks) -> tuple[Graph, int, int]:
    """Append fresh vertices s, t wired to the listed vertices.

    ``sources`` / ``sinks`` are (vertex, capacity) lists; a vertex may appear
    in both.  Returns (graph, s, t); the new edges follow the originals, the
    source edges first, oriented s->v and v->t.
    """
    sources = list(sources)
    sinks = list(sinks)
    if not sources or not sinks:
        raise GraphError("need at least one source link and one sink link")
    s = graph.n
    t = graph.n + 1
    eu = list(graph.eu)
    ev = list(graph.ev)
    cap = list(graph.cap)
    for v, c in sources:
        if not (c > 0):
            raise GraphError(f"source link to {v} has nonpositive capacity")
        eu.append(s)
        ev.append(int(v))
        cap.append(float(c))
    for v, c in sinks:
        if not (c > 0):
            raise GraphError(f"sink link to {v} has nonpositive capacity")
        eu.append(int(v))
        ev.append(t)
        cap.append(float(c))
    return Graph(graph.n + 2, eu, ev, cap), s, t


def check_demand(b, n: int, tol_scale: float = 1e-9) -> np.ndarray:
    """Validate a demand vector: length n, finite, entries summing to ~0."""
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (n,):
        raise GraphError(f"demand vector must have length {n}")
    if not np.isfinite(b).all():
        raise GraphError("demand vector has non-finite entries")
    total = abs(float(b.sum()))
    norm = float(np.abs(b).sum())
    if total > tol_scale * max(norm, 1.0):
        raise GraphError(f"demands do not balance: sum={total:g}")
    return b


def flow_divergence(graph: Graph, f) -> np.ndarray:
    """Net inflow per vertex, (Bf)_v with B_{v,e} = +1 when e enters v."""
    f = np.asarray(f, dtype=np.float64)
    out = np.bincount(graph.ev, weights=f, minlength=graph.n)
    out -= np.bincount(graph.eu, weights=f, minlength=graph.n)
    return out


def flow_congestion(graph: Graph, f) -> float:
    """Max per-edge |f_e| / c_e."""
    f = np.asarray(f, dtype=np.float64)
    if graph.m == 0:
        return 0.0
    return float(np.max(np.abs(f) / graph.cap))


def serialize_edge_list(graph: Graph) -> str:
    """Text format: header ``n m`` then one ``u v capacity`` line per edge."""
    lines = [f"{graph.n} {graph.m}"]
    for u, v, c in graph.edge_list():
        lines.append(f"{u} {v} {c!r}")
    return "\n".join(lines) + "\n"
