"""Independent reference oracles used by tests and acceptance checks.

Nothing here shares code with the solver or decomposition machinery beyond
the core :class:`~flowtree.graph.Graph` type: the max-flow oracle is a plain
shortest-augmenting-path/blocking-flow routine over an explicit residual
structure, and the brute-force oracles enumerate.
"""

from __future__ import annotations

import itertools
import math
from collections import deque

import numpy as np

from .graph import Graph, GraphError


class _Dinic:
    """Blocking-flow max-flow on an explicit arc list (undirected edges
    become two oriented residual arcs sharing capacity headroom)."""

    def __init__(self, n: int):
        self.n = n
        self.head: list[int] = []
        self.nxt: list[int] = []
        self.first = [-1] * n
        self.capr: list[float] = []

    def add(self, u: int, v: int, cap_uv: float, cap_vu: float) -> int:
        idx = len(self.head)
        self.head.append(v)
        self.capr.append(cap_uv)
        self.nxt.append(self.first[u])
        self.first[u] = idx
        self.head.append(u)
        self.capr.append(cap_vu)
        self.nxt.append(self.first[v])
        self.first[v] = idx + 1
        return idx

    def max_flow(self, s: int, t: int, limit: float = math.inf) -> float:
        flow = 0.0
        scale = max(self.capr) if self.capr else 1.0
        eps = 1e-12 * max(scale, 1.0)
        while flow < limit:
            level = self._bfs(s, t, eps)
            if level is None:
                break
            it = self.first[:]
            while True:
                pushed = self._dfs(s, t, limit - flow, level, it, eps)
                if pushed <= 0:
                    break
                flow += pushed
        return flow

    def _bfs(self, s: int, t: int, eps: float):
        level = [-1] * self.n
        level[s] = 0
        q = deque([s])
        while q:
            u = q.popleft()
            e = self.first[u]
            while e != -1:
                v = self.head[e]
                if level[v] < 0 and self.capr[e] > eps:
                    level[v] = level[u] + 1
                    q.append(v)
                e = self.nxt[e]
        return level if level[t] >= 0 else None

    def _dfs(self, u: int, t: int, f: float, level, it, eps: float) -> float:
        if u == t:
            return f
        while it[u] != -1:
            e = it[u]
            v = self.head[e]
            if level[v] == level[u] + 1 and self.capr[e] > eps:
                pushed = self._dfs(v, t, min(f, self.capr[e]), level, it, eps)
                if pushed > 0:
                    self.capr[e] -= pushed
                    self.capr[e ^ 1] += pushed
                    return pushed
            it[u] = self.nxt[e]
        return 0.0

    def min_cut_side(self, s: int) -> set[int]:
        scale = max(self.capr) if self.capr else 1.0
        eps = 1e-12 * max(scale, 1.0)
        side = {s}
        q = deque([s])
        while q:
            u = q.popleft()
            e = self.first[u]
            while e != -1:
                v = self.head[e]
                if v not in side and self.capr[e] > eps:
                    side.add(v)
                    q.append(v)
                e = self.nxt[e]
        return side


def exact_max_flow_oracle(graph: Graph, s: int, t: int):
    """Exact s-t max flow (value, per-edge signed flow, min-cut side).

    Flow signs follow each edge's stored orientation.  Exact on integer
    capacities; floating-point inputs are resolved to a 1e-12-relative
    residual threshold.
    """
    if s == t:
        raise GraphError("source equals sink")
    d = _Dinic(graph.n)
    arc_of_edge = []
    for e in range(graph.m):
        arc_of_edge.append(d.add(int(graph.eu[e]), int(graph.ev[e]),
                                 float(graph.cap[e]), float(graph.cap[e])))
    value = d.max_flow(s, t)
    f = np.zeros(graph.m)
    for e, a in enumerate(arc_of_edge):
        # Both residual arcs start at cap c; net flow phi along the stored
        # orientation leaves capr[a] = c - phi and capr[a^1] = c + phi.
        f[e] = (d.capr[a ^ 1] - d.capr[a]) / 2.0
    side = d.min_cut_side(s)
    return value, f, side


def residual_recheck(graph: Graph, s: int, t: int, value: float,
                     rel_tol: float = 1e-7) -> bool:
    """Independent audit of a claimed max-flow value.

    Re-runs a breadth-first augmenting search from scratch and also verifies
    a matching cut: the claimed value must equal the capacity of the cut
    reachable in the final residual graph.
    """
    d = _Dinic(graph.n)
    for e in range(graph.m):
        d.add(int(graph.eu[e]), int(graph.ev[e]),
              float(graph.cap[e]), float(graph.cap[e]))
    got = d.max_flow(s, t)
    side = d.min_cut_side(s)
    cut = graph.cut_capacity(side)
    scale = max(abs(value), abs(got), 1.0)
    return abs(got - value) <= rel_tol * scale and abs(cut - got) <= rel_tol * scale


def sparsity(graph: Graph, side) -> float:
    side = set(int(v) for v in side)
    k = min(len(side), graph.n - len(side))
    if k == 0:
        raise GraphError("sparsity of a trivial cut is undefined")
    return graph.cut_capacity(side) / k


def brute_force_sparsest_cut(graph: Graph):
    """Exhaustive minimum over all proper cuts (n <= 20)."""
    n = graph.n
    if n > 20:
        raise GraphError("brute-force sparsest cut limited to n <= 20")
    if n < 2:
        raise GraphError("need at least two vertices")
    best = None
    best_side = None
    for bits in range(1, 1 << (n - 1)):  # vertex n-1 fixed outside
        side = [v for v in range(n - 1) if bits >> v & 1]
        if not side:
            continue
        phi = sparsity(graph, side)
        if best is None or phi < best:
            best = phi
            best_side = side
    return set(best_side), float(best)


def _all_binary_trees(items: tuple[int, ...]):
    """All leaf-labeled binary tree shapes as nested pairs."""
    if len(items) == 1:
        yield items[0]
        return
    first, rest = items[0], items[1:]
    for k in range(len(rest) + 1):
        for left_ids in itertools.combinations(range(len(rest)), k):
            left = (first,) + tuple(rest[i] for i in left_ids)
            right = tuple(x for i, x in enumerate(rest) if i not in left_ids)
            if not right:
                continue
            for lt in _all_binary_trees(left):
                for rt in _all_binary_trees(right):
                    yield (lt, rt)


def _tree_cost(graph: Graph, shape) -> float:
    """Dasgupta cost of a nested-pair tree shape."""

    def leaves(t):
        if isinstance(t, int):
            return {t}
        return leaves(t[0]) | leaves(t[1])

    memo: dict[int, set[int]] = {}
    cost = 0.0

    def walk(t):
        nonlocal cost
        if isinstance(t, int):
            return {t}
        left = walk(t[0])
        right = walk(t[1])
        here = left | right
        mask = np.zeros(graph.n, dtype=bool)
        mask[list(left)] = True
        mask2 = np.zeros(graph.n, dtype=bool)
        mask2[list(right)] = True
        cross = (mask[graph.eu] & mask2[graph.ev]) | (mask2[graph.eu] & mask[graph.ev])
        cost += float(graph.cap[cross].sum()) * len(here)
        return here

    walk(shape)
    return cost


def brute_force_dasgupta(graph: Graph):
    """Exhaustive minimum-cost hierarchical clustering (n <= 7).

    Enumerates all (2n-3)!! leaf-labeled binary trees; returns the optimal
    nested-pair shape and its cost.
    """
    n = graph.n
    if n > 7:
        raise GraphError("brute-force clustering limited to n <= 7")
    if n == 1:
        return 0, 0.0
    best = None
    best_shape = None
    for shape in _all_binary_trees(tuple(range(n))):
        c = _tree_cost(graph, shape)
        if best is None or c < best:
            best = c
            best_shape = shape
    return best_shape, float(best)


def multicommodity_congestion_lp(graph: Graph, demands) -> float:
    """Exact minimum congestion of routing ``demands`` simultaneously.

    ``demands`` is a list of (source, target, amount).  Solved as one LP with
    per-commodity conservation and shared congestion bound; intended for tiny
    instances (the well-linkedness spot checks).  Returns the optimal
    congestion.
    """
    from scipy.optimize import linprog

    n, m = graph.n, graph.m
    k = len(demands)
    if k == 0:
        return 0.0
    # Variables: per commodity signed edge flows (k*m), then lambda.
    nvar = k * m + 1
    a_eq = []
    b_eq = []
    for ci, (src, dst, amt) in enumerate(demands):
        for v in range(n):
            row = np.zeros(nvar)
            for e in graph.adjacency[v]:
                sgn = 1.0 if int(graph.ev[e]) == v else -1.0
                row[ci * m + int(e)] = sgn
            rhs = 0.0
            if v == dst:
                rhs = amt
            elif v == src:
                rhs = -amt
            a_eq.append(row)
            b_eq.append(rhs)
    # |sum_c f_{c,e}| <= lambda * c_e via two inequalities with auxiliary
    # per-commodity absolute values would be exact but heavy; instead bound
    # sum over commodities of |f_{c,e}| with split variables.
    # Split each flow variable into + and - parts.
    nsplit = 2 * k * m + 1
    a_eq2 = []
    for row in a_eq:
        core = row[:-1]
        a_eq2.append(np.concatenate([core, -core, [0.0]]))
    a_ub = []
    b_ub = []
    for e in range(m):
        row = np.zeros(nsplit)
        for ci in range(k):
            row[ci * m + e] = 1.0
            row[k * m + ci * m + e] = 1.0
        row[-1] = -float(graph.cap[e])
        a_ub.append(row)
        b_ub.append(0.0)
    c = np.zeros(nsplit)
    c[-1] = 1.0
    res = linprog(c, A_ub=np.array(a_ub), b_ub=np.array(b_ub),
                  A_eq=np.array(a_eq2), b_eq=np.array(b_eq),
                  bounds=[(0, None)] * (nsplit - 1) + [(0, None)],
                  method="highs")
    if not res.success:
        raise RuntimeError(f"multicommodity LP failed: {res.message}")
    return float(res.x[-1])


def well_linked_congestion(graph: Graph, edge_ids, scale: float = 1.0) -> float:
    """Congestion of routing the product demand between split vertices of
    ``edge_ids`` in the subdivision graph (exact, tiny instances only)."""
    from .graph import subdivide

    sub = subdivide(graph)
    ids = [int(e) for e in edge_ids]
    total = float(graph.cap[ids].sum())
    demands = []
    for i, e in enumerate(ids):
        for f in ids[i + 1:]:
            amt = scale * float(graph.cap[e]) * float(graph.cap[f]) / total
            if amt > 0:
                demands.append((sub.split_vertex(e), sub.split_vertex(f), amt))
    if not demands:
        return 0.0
    return multicommodity_congestion_lp(sub.graph, demands)
