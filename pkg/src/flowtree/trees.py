"""Exact and structural tree procedures.

This module owns everything that exploits tree structure directly: the
aspect-ratio reduction preprocessing step, exact s-t min-cuts on trees (a
depth-bounded DP with a separator/LCA recursion for deep trees), the
hierarchical decomposition of capacitated trees into low-depth hierarchy
trees, and the binarization pass that bounds node degree while preserving
routing exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import Graph, GraphError
from .hierarchy import INF, HierarchyTree
from .parallel import pmap
from .primitives import (
    RootedTree,
    connected_components,
    lca,
    max_spanning_tree,
    subtree_sum,
    tree_separator,
)


def reduce_aspect_ratio(graph: Graph, s: int, t: int, eps: float) -> Graph:
    """Clamp capacities so max/min capacity is at most m^2 / eps.

    Capacities above ``m * c'`` are clipped to it and edges below
    ``eps * c' / m`` are deleted, where ``c'`` is the bottleneck capacity of
    the s-t path in a maximum spanning tree.  The s-t max flow of the result
    is within a ``(1 - eps)`` factor of the original.
    """
    if not (0.0 < eps < 1.0):
        raise GraphError("eps must be in (0, 1)")
    if s == t:
        raise GraphError("source equals sink")
    labels = connected_components(graph)
    if labels[s] != labels[t]:
        raise GraphError("source and sink are disconnected")
    mst = max_spanning_tree(_component_of(graph, labels, labels[s])[0]) \
        if (labels != labels[s]).any() else max_spanning_tree(graph)
    if (labels != labels[s]).any():
        # Restrict to the s-t component, then map mst edge ids back.
        comp_graph, vmap, emap = _component_of(graph, labels, labels[s])
        mst = emap[mst]
        c_prime = _path_bottleneck(graph, mst, s, t)
    else:
        c_prime = _path_bottleneck(graph, mst, s, t)
    m = graph.m
    hi = m * c_prime
    lo = eps * c_prime / m
    keep = graph.cap >= lo
    new_cap = np.minimum(graph.cap[keep], hi)
    return Graph(graph.n, graph.eu[keep], graph.ev[keep], new_cap,
                 _validated=True)


def _component_of(graph: Graph, labels, label):
    ids = np.nonzero(labels == label)[0]
    vmap = np.full(graph.n, -1, dtype=np.int64)
    vmap[ids] = np.arange(len(ids))
    keep = (labels[graph.eu] == label)
    emap = np.nonzero(keep)[0]
    sub = Graph(len(ids), vmap[graph.eu[keep]], vmap[graph.ev[keep]],
                graph.cap[keep], _validated=True)
    return sub, vmap, emap


def _path_bottleneck(graph: Graph, tree_edges, s: int, t: int) -> float:
    adj: list[list[tuple[int, int]]] = [[] for _ in range(graph.n)]
    for e in map(int, tree_edges):
        u, v = int(graph.eu[e]), int(graph.ev[e])
        adj[u].append((v, e))
        adj[v].append((u, e))
    parent = {s: (-1, -1)}
    stack = [s]
    while stack:
        u = stack.pop()
        if u == t:
            break
        for v, e in adj[u]:
            if v not in parent:
                parent[v] = (u, e)
                stack.append(v)
    if t not in parent:
        raise GraphError("source and sink are disconnected in the tree")
    bottleneck = math.inf
    v = t
    while v != s:
        u, e = parent[v]
        bottleneck = min(bottleneck, float(graph.cap[e]))
        v = u
    return bottleneck


# ---------------------------------------------------------------------------
# Exact s-t min-cut on trees
# ---------------------------------------------------------------------------

@dataclass
class _CutProblem:
    n: int
    adj: list[list[tuple[int, float]]]   # vertex -> (neighbor, edge capacity)
    ws: np.ndarray                       # source-link capacity per vertex
    wt: np.ndarray                       # sink-link capacity per vertex
    depth_threshold: float


def tree_min_cut(tree: RootedTree, source_links, sink_links,
                 forced_source=(), forced_sink=(),
                 depth_threshold: float | None = None):
    """Exact s-t min-cut of a capacitated tree plus attached terminals.

    ``source_links`` / ``sink_links`` are (vertex, capacity) lists wiring an
    implicit super-source/super-sink to tree vertices; ``forced_source`` and
    ``forced_sink`` pin vertices to a side.  Returns ``(value, side)`` where
    ``side`` is a boolean array, True on the source side.

    Shallow subtrees are solved by a two-state DP over children; deeper ones
    recurse on tree-separator (or LCA) split vertices with at most three
    pinned vertices per subproblem.
    """
    n = tree.n
    ws = np.zeros(n)
    wt = np.zeros(n)
    for v, c in source_links:
        ws[int(v)] += float(c)
    for v, c in sink_links:
        wt[int(v)] += float(c)
    fs = set(int(v) for v in forced_source)
    ft = set(int(v) for v in forced_sink)
    if fs & ft:
        raise GraphError("a vertex is forced to both sides")
    if depth_threshold is None:
        depth_threshold = 10.0 * math.log2(max(n, 2))
    adj: list[list[tuple[int, float]]] = [[] for _ in range(n)]
    for v in range(n):
        p = int(tree.parent[v])
        if p >= 0:
            c = float(tree.cap_to_parent[v])
            adj[v].append((p, c))
            adj[p].append((v, c))
    prob = _CutProblem(n, adj, ws, wt, depth_threshold)
    tracked = {}
    for v in fs:
        tracked[v] = True
    for v in ft:
        tracked[v] = False
    value, side_map = _solve_cut(prob, tuple(range(n)), tracked)
    # Pinned vertices carry their own terminal weights (excluded inside the
    # recursion by the ownership convention).
    for v, on_s in tracked.items():
        value += wt[v] if on_s else ws[v]
    side = np.zeros(n, dtype=bool)
    for v, on_s in side_map.items():
        side[v] = on_s
    for v, on_s in tracked.items():
        side[v] = on_s
    return float(value), side


def _solve_cut(prob: _CutProblem, comp: tuple[int, ...], tracked: dict[int, bool]):
    """Min cut over ``comp`` with pinned assignment ``tracked``.

    Terminal weights of pinned vertices are excluded here; each recursion
    level adds the weights of the vertices it newly assigns, so every vertex
    is counted exactly once overall.
    """
    comp_set = set(comp)
    root = min(tracked.keys() & comp_set) if tracked.keys() & comp_set else comp[0]
    parent, order, depth = _orient(prob, comp_set, root)
    if depth <= prob.depth_threshold or len(comp) <= 2:
        return _cut_dp(prob, comp, tracked, parent, order)
    inside = {v: s for v, s in tracked.items() if v in comp_set}
    if len(inside) >= 3:
        others = [v for v in inside if v != root]
        q = _lca_in(parent, others[0], others[1])
    else:
        q = _separator_in(prob, comp, parent, order)
    neighbors = [(u, c) for u, c in prob.adj[q] if u in comp_set]
    comps_u = _components_after_removal(prob, comp_set, q)
    branches = []
    for u, c_uq in neighbors:
        cu = comps_u[u]
        sub_tracked_base = {v: s for v, s in inside.items() if v in cu}
        branches.append((u, c_uq, cu, sub_tracked_base))

    def solve_branch(args):
        u, c_uq, cu, base = args
        out = {}
        for u_side in (True, False):
            if u in inside and inside[u] != u_side:
                out[u_side] = (math.inf, {})
                continue
            sub_tracked = dict(base)
            sub_tracked[u] = u_side
            out[u_side] = _solve_cut(prob, cu, sub_tracked)
        return out

    solved = pmap(solve_branch, branches)
    q_sides = (inside[q],) if q in inside else (True, False)
    best_val = math.inf
    best_map: dict[int, bool] = {}
    for q_side in q_sides:
        val = 0.0 if q in inside else (prob.wt[q] if q_side else prob.ws[q])
        assign = {q: q_side}
        for (u, c_uq, cu, base), res in zip(branches, solved):
            u_choice = None
            u_best = math.inf
            for u_side in (True, False):
                sub_val, _ = res[u_side]
                cand = sub_val
                if u not in inside:
                    cand += prob.wt[u] if u_side else prob.ws[u]
                if u_side != q_side:
                    cand += c_uq
                if cand < u_best:
                    u_best = cand
                    u_choice = u_side
            val += u_best
            assign.update(res[u_choice][1])
            assign[u] = u_choice
        if val < best_val:
            best_val = val
            best_map = assign
    return best_val, best_map


def _orient(prob, comp_set, root):
    parent = {root: -1}
    order = [root]
    depth_of = {root: 0}
    stack = [root]
    maxd = 0
    while stack:
        u = stack.pop()
        for v, _ in prob.adj[u]:
            if v in comp_set and v not in parent:
                parent[v] = u
                depth_of[v] = depth_of[u] + 1
                maxd = max(maxd, depth_of[v])
                order.append(v)
                stack.append(v)
    return parent, order, maxd


def _cut_dp(prob, comp, tracked, parent, order):
    """Two-state DP over a shallow component (children processed before
    parents via reverse discovery order)."""
    cut_s = {}
    cut_t = {}
    choice_s = {}
    choice_t = {}
    cap_to_parent = {}
    for v in order:
        p = parent[v]
        if p >= 0:
            for u, c in prob.adj[v]:
                if u == p:
                    cap_to_parent[v] = c
                    break
    for v in reversed(order):
        pinned = tracked.get(v)
        ws = 0.0 if v in tracked else prob.ws[v]
        wt = 0.0 if v in tracked else prob.wt[v]
        s_val = wt
        t_val = ws
        kids = [u for u, _ in prob.adj[v] if parent.get(u) == v]
        ch_s = {}
        ch_t = {}
        for u in kids:
            c = cap_to_parent[u]
            # v on the source side: child stays (cut_s) or crosses (c + cut_t)
            stay, cross = cut_s[u], c + cut_t[u]
            if stay <= cross:
                s_val += stay
                ch_s[u] = True
            else:
                s_val += cross
                ch_s[u] = False
            # v on the sink side: child crosses (c + cut_s) or stays (cut_t)
            cross, stay = c + cut_s[u], cut_t[u]
            if cross < stay:
                t_val += cross
                ch_t[u] = True
            else:
                t_val += stay
                ch_t[u] = False
        cut_s[v] = math.inf if pinned is False else s_val
        cut_t[v] = math.inf if pinned is True else t_val
        choice_s[v] = ch_s
        choice_t[v] = ch_t
    root = order[0]
    assign: dict[int, bool] = {}
    if cut_s[root] <= cut_t[root]:
        total = cut_s[root]
        _assign_down(root, True, parent, prob, order, choice_s, choice_t, assign)
    else:
        total = cut_t[root]
        _assign_down(root, False, parent, prob, order, choice_s, choice_t, assign)
    return total, assign


def _assign_down(root, root_side, parent, prob, order, choice_s, choice_t, assign):
    stack = [(root, root_side)]
    while stack:
        v, side = stack.pop()
        assign[v] = side
        table = choice_s[v] if side else choice_t[v]
        for u, child_side in table.items():
            stack.append((u, child_side))


def _components_after_removal(prob: _CutProblem, comp_set: set[int], q: int):
    """Map each neighbor of q to the vertex tuple of its component in
    comp \\ {q}."""
    seen = {q}
    out: dict[int, tuple[int, ...]] = {}
    for u, _ in prob.adj[q]:
        if u not in comp_set or u in seen:
            continue
        stack = [u]
        block = []
        while stack:
            v = stack.pop()
            if v in seen:
                continue
            seen.add(v)
            block.append(v)
            for w, _ in prob.adj[v]:
                if w in comp_set and w not in seen:
                    stack.append(w)
        # In a tree each neighbor of q lands in its own component.
        out[u] = tuple(sorted(block))
    return out


def _lca_in(parent, a, b):
    anc = set()
    v = a
    while v != -1:
        anc.add(v)
        v = parent[v]
    v = b
    while v not in anc:
        v = parent[v]
    return v


def _separator_in(prob, comp, parent, order):
    sizes = {v: 1 for v in comp}
    for v in reversed(order):
        p = parent[v]
        if p >= 0:
            sizes[p] += sizes[v]
    n = len(comp)
    for v in order:
        above = n - sizes[v]
        if above > n / 2:
            continue
        kids = [u for u in sizes if parent.get(u) == v]
        if all(sizes[u] <= n / 2 for u in kids):
            return v
    raise RuntimeError("separator not found")


# ---------------------------------------------------------------------------
# Hierarchical decomposition of capacitated trees
# ---------------------------------------------------------------------------

def tree_hierarchical_decomp(tree: RootedTree, log_divisor: float | None = None,
                             binarize: bool = True) -> HierarchyTree:
    """Low-depth hierarchical decomposition of a capacitated tree.

    Each recursion level splits a cluster with a tree-separator partition
    (every piece at most half the cluster) intersected with an exact min-cut
    partition separating the cluster's boundary edges from the freshly cut
    edges (boundary capacities divided by ``log_divisor``, default log2 n).
    Leaves are singleton vertices; every edge label is the exact cut capacity
    of its vertex set in the input tree; the result is binary with depth
    O(log n).
    """
    n = tree.n
    lam = log_divisor if log_divisor is not None else max(1.0, math.log2(max(n, 2)))
    adj: list[list[tuple[int, float, int]]] = [[] for _ in range(n)]
    edges = []
    for v in range(n):
        p = int(tree.parent[v])
        if p >= 0:
            e = len(edges)
            c = float(tree.cap_to_parent[v])
            edges.append((p, v, c))
            adj[v].append((p, c, e))
            adj[p].append((v, c, e))

    parents: list[int] = []
    caps: list[float] = []
    leaf_sets: dict[int, np.ndarray] = {}

    def new_node(parent_node: int) -> int:
        parents.append(parent_node)
        caps.append(0.0)
        return len(parents) - 1

    def decompose(cluster: tuple[int, ...], parent_node: int) -> None:
        node = new_node(parent_node)
        if len(cluster) == 1:
            leaf_sets[node] = np.array(cluster, dtype=np.int64)
            return
        pieces, cut_edges = _tree_partition_a(adj, cluster)
        boundary = _cluster_boundary_edges(adj, cluster)
        if boundary and cut_edges:
            reach_b = _tree_partition_b(adj, edges, cluster, boundary,
                                        cut_edges, lam)
        else:
            reach_b = {v: False for v in cluster}
        buckets: dict[tuple[int, bool], list[int]] = {}
        for i, piece in enumerate(pieces):
            for v in piece:
                buckets.setdefault((i, reach_b[v]), []).append(v)
        for key in sorted(buckets):
            decompose(tuple(sorted(buckets[key])), node)

    decompose(tuple(range(n)), -1)
    out = HierarchyTree(parents, caps, leaf_sets, base_n=n)
    if binarize:
        out = convert_binary(out)
    base_graph = Graph(n, [e[0] for e in edges], [e[1] for e in edges],
                       [max(e[2], 1e-300) for e in edges], _validated=True) \
        if edges else Graph(n, [], [], [], _validated=True)
    return out.relabel(base_graph)


def _tree_partition_a(adj, cluster):
    """Separator-based partition: every piece at most half the cluster.

    Components of the induced forest larger than half the cluster are split
    at a tree-separator vertex (which becomes its own singleton piece); the
    rest stay whole.  Returns (pieces, cut edge ids).
    """
    cluster_set = set(cluster)
    comps = _induced_components(adj, cluster_set)
    half = len(cluster) / 2.0
    pieces: list[tuple[int, ...]] = []
    cut_edges: list[int] = []
    for comp in comps:
        if len(comp) <= half and len(comp) < len(cluster):
            pieces.append(comp)
            continue
        sep = _separator_of_component(adj, comp)
        for u, c, e in adj[sep]:
            if u in cluster_set:
                cut_edges.append(e)
        pieces.append((sep,))
        sub = set(comp) - {sep}
        pieces.extend(_induced_components(adj, sub))
    return pieces, cut_edges


def _induced_components(adj, vertex_set):
    seen: set[int] = set()
    out = []
    for v in sorted(vertex_set):
        if v in seen:
            continue
        stack = [v]
        block = []
        while stack:
            u = stack.pop()
            if u in seen or u not in vertex_set:
                continue
            seen.add(u)
            block.append(u)
            for w, _, _ in adj[u]:
                if w in vertex_set and w not in seen:
                    stack.append(w)
        out.append(tuple(sorted(block)))
    return out


def _separator_of_component(adj, comp):
    comp_set = set(comp)
    local = {v: i for i, v in enumerate(comp)}
    parent = np.full(len(comp), -1, dtype=np.int64)
    root = comp[0]
    order = [root]
    seen = {root}
    stack = [root]
    while stack:
        u = stack.pop()
        for w, _, _ in adj[u]:
            if w in comp_set and w not in seen:
                seen.add(w)
                parent[local[w]] = local[u]
                order.append(w)
                stack.append(w)
    rt = RootedTree(parent, local[root])
    return comp[tree_separator(rt)]


def _cluster_boundary_edges(adj, cluster):
    cluster_set = set(cluster)
    out = []
    for v in cluster:
        for u, c, e in adj[v]:
            if u not in cluster_set:
                out.append((e, v, c))
    return out


def _tree_partition_b(adj, edges, cluster, boundary, cut_edges, lam):
    """Exact min-cut between boundary attachments and freshly cut edges.

    Works on the subdivision of the induced forest plus one node per
    boundary edge (capacity divided by ``lam``), made a single tree with a
    zero-capacity dummy root.  Returns vertex -> True iff it stays with the
    boundary side.
    """
    cluster_set = set(cluster)
    idx: dict = {}

    def vid(key):
        if key not in idx:
            idx[key] = len(idx)
        return idx[key]

    h_edges: list[tuple[int, int, float]] = []
    for e, (p, v, c) in enumerate(edges):
        if p in cluster_set and v in cluster_set:
            xe = vid(("split", e))
            h_edges.append((vid(("v", p)), xe, c))
            h_edges.append((xe, vid(("v", v)), c))
    for e, v, c in boundary:
        h_edges.append((vid(("bnd", e)), vid(("v", v)), c / lam))
    for v in cluster:
        vid(("v", v))
    nh = len(idx)
    # Dummy root with zero-capacity links makes the forest one tree.
    comp_label = list(range(nh))

    def find(a):
        while comp_label[a] != a:
            comp_label[a] = comp_label[comp_label[a]]
            a = comp_label[a]
        return a

    for a, b, _ in h_edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            comp_label[max(ra, rb)] = min(ra, rb)
    roots = sorted({find(a) for a in range(nh)})
    dummy = nh
    all_edges = list(h_edges) + [(dummy, r, 0.0) for r in roots]
    rt = RootedTree.from_edges(nh + 1, [(a, b) for a, b, _ in all_edges],
                               root=dummy, caps=[c for _, _, c in all_edges])
    sources = [(idx[("bnd", e)], INF) for e, _, _ in boundary]
    sinks = [(idx[("split", e)], INF) for e in cut_edges]
    _, side = tree_min_cut(rt, sources, sinks)
    return {v: bool(side[idx[("v", v)]]) for v in cluster}


def convert_binary(tree: HierarchyTree) -> HierarchyTree:
    """Binarize a hierarchy without changing any routing value.

    Nodes with more than two children are split by inserting intermediate
    nodes attached with infinite-capacity (never binding) edges: children are
    sorted by represented-set size, the smallest prefix reaching a quarter of
    the parent's size goes under the first intermediate, the rest under the
    second.  Repeats top-down until binary.
    """
    parent = list(map(int, tree.parent))
    cap = list(map(float, tree.cap))
    kids: list[list[int]] = [list(c) for c in tree.children]
    sizes = [len(m) for m in tree.all_members()]
    leaf_sets = dict(tree.leaf_sets)

    def first_nonbinary() -> list[int]:
        out = []
        stack = [(0, False)]
        while stack:
            u, blocked = stack.pop()
            bad = len(kids[u]) > 2
            if bad and not blocked:
                out.append(u)
            for c in kids[u]:
                stack.append((c, blocked or bad))
        return out

    while True:
        frontier = first_nonbinary()
        if not frontier:
            break
        for u in frontier:
            order = sorted(kids[u], key=lambda c: (-sizes[c], c))
            total = sizes[u]
            cum = 0
            s = len(order)
            for i, c in enumerate(order):
                cum += sizes[c]
                if cum >= total / 4.0:
                    s = i + 1
                    break
            groups = [order[:s], order[s:]]
            kids[u] = []
            for group in groups:
                if not group:
                    continue
                if len(group) == 1:
                    kids[u].append(group[0])
                    parent[group[0]] = u
                    continue
                z = len(parent)
                parent.append(u)
                cap.append(INF)
                kids.append(list(group))
                sizes.append(sum(sizes[c] for c in group))
                kids[u].append(z)
                for c in group:
                    parent[c] = z
    return _renumber(parent, cap, kids, leaf_sets, tree.base_n, tree.alpha)


def _renumber(parent, cap, kids, leaf_sets, base_n, alpha) -> HierarchyTree:
    order = []
    stack = [parent.index(-1)]
    while stack:
        u = stack.pop()
        order.append(u)
        stack.extend(reversed(kids[u]))
    remap = {old: new for new, old in enumerate(order)}
    new_parent = [(-1 if parent[old] == -1 else remap[parent[old]]) for old in order]
    new_cap = [cap[old] for old in order]
    new_leaf_sets = {remap[u]: s for u, s in leaf_sets.items() if u in remap}
    return HierarchyTree(new_parent, new_cap, new_leaf_sets,
                         alpha=alpha, base_n=base_n)
