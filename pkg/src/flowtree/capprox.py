"""Construction of tree congestion approximators.

The full build (:func:`congestion_approx`) recursively sparsifies the graph,
decomposes the resulting spanning structure, and boosts quality by re-running
the hierarchical decomposition with approximate max-flow partitioning on
contracted subgraphs.  :func:`spanning_tree_ca` is the cheap entry point: a
hierarchical decomposition of the maximum spanning tree with labels
recomputed in the original graph; its quality is measured, not proven, but
its lower sandwich side is exact by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .graph import Graph, GraphError, contract, subdivide
from .hierarchy import INF, HierarchyTree, Projection
from .oracles import exact_max_flow_oracle
from .primitives import RootedTree, max_spanning_tree, subtree_sum
from .solver import SolverConfig
from .trees import convert_binary, tree_hierarchical_decomp


@dataclass(frozen=True)
class BuildConfig:
    """Knobs for the congestion-approximator pipeline.

    ``base_size`` is the exact-oracle floor: clusters at or below it are
    decomposed with exact max flows.  ``exact_flow_edges`` optionally routes
    partition flows below that many edges through the exact oracle instead of
    the gradient solver (0 disables).  Reweighting exponents follow the
    construction (log^-12 for the first partition step, log^-4 and psi =
    log^-6 for the second), with ``zeta_floor`` clamping the factors away
    from zero.  ``matching_eps``/``matching_delta`` override the flow and
    decomposition precision in the inner matching rounds; ``None`` means the
    asymptotic 1/(3 log^3 n) formula, which is far too slow at practical
    sizes, so the defaults here are coarser.
    """

    base_size: int = 16
    exact_flow_edges: int = 0
    kappa_const: float = 10.0
    sample_const: float = 4.0
    zeta_floor: float = 1e-6
    matching_eps: float | None = 0.25
    matching_delta: float | None = None
    partition_b_eps: float | None = None
    cut_rounds_const: float = 10.0
    refine_rounds_const: float = 10.0
    alternation_const: float = 6.0
    oracle_alpha: float = 0.0      # 0 = auto (scales with log^2 of size)
    alpha_cap: float = 0.0         # declared quality cap for reports (0 = auto)
    solver: SolverConfig = field(default_factory=SolverConfig)
    seed: int = 0
    max_depth_const: float = 8.0

    def zeta(self, n: int, exponent: int) -> float:
        return max(self.zeta_floor,
                   min(1.0, math.log2(max(n, 2)) ** -exponent))

    def eps_matching(self, n: int) -> float:
        if self.matching_eps is not None:
            return self.matching_eps
        return 1.0 / (3.0 * math.log2(max(n, 2)) ** 3)

    def delta_matching(self, n: int) -> float:
        if self.matching_delta is not None:
            return self.matching_delta
        return 1.0 / (3.0 * math.log2(max(n, 2)) ** 3)

    def eps_partition_b(self, n: int) -> float:
        if self.partition_b_eps is not None:
            return self.partition_b_eps
        return min(0.5, 1.0 / math.log2(max(n, 4)))


def spanning_tree_ca(graph: Graph, alpha: float = 0.0) -> HierarchyTree:
    """Hierarchy over the maximum spanning tree, relabeled exactly in G.

    Every label is a true cut capacity of ``graph``, so routing values on the
    tree never exceed the graph optimum.  ``alpha`` (default: a log^2 n
    guess) is only a declared quality used to size solver iterations.
    """
    if graph.n == 1:
        return HierarchyTree([-1], [INF], {0: np.array([0])}, base_n=1)
    ids = max_spanning_tree(graph)
    rt = _rooted_from_edges(graph, ids)
    hd = tree_hierarchical_decomp(rt)
    out = hd.relabel(graph)
    out.alpha = alpha if alpha > 0 else default_alpha(graph.n)
    return out


def default_alpha(n: int) -> float:
    return max(4.0, math.log2(max(n, 2)) ** 2)


def _rooted_from_edges(graph: Graph, edge_ids) -> RootedTree:
    edges = [(int(graph.eu[e]), int(graph.ev[e])) for e in edge_ids]
    caps = [float(graph.cap[e]) for e in edge_ids]
    return RootedTree.from_edges(graph.n, edges, root=0, caps=caps)


def measure_alpha(graph: Graph, tree: HierarchyTree, trials: int = 50,
                  seed: int = 0, check_lower: bool = True):
    """Measured quality of a congestion approximator over random unit demands.

    For each sampled s-t pair, the graph optimum is 1 / maxflow(s, t) (exact
    oracle) and the tree value is the exact unique-routing congestion.
    Returns (max ratio, list of per-trial ratios); asserts the exact lower
    sandwich side when ``check_lower``.
    """
    rng = np.random.default_rng(seed)
    ratios = []
    for _ in range(trials):
        u, v = map(int, rng.choice(graph.n, size=2, replace=False))
        value, _, _ = exact_max_flow_oracle(graph, u, v)
        if value <= 0:
            continue
        opt_g = 1.0 / value
        b = np.zeros(graph.n)
        b[u] = 1.0
        b[v] = -1.0
        opt_r = tree.route_value(b)
        if check_lower and opt_r > opt_g * (1 + 1e-9):
            raise AssertionError(
                f"tree routing value {opt_r} exceeds graph optimum {opt_g}")
        if opt_r > 0:
            ratios.append(opt_g / opt_r)
    return (max(ratios) if ratios else 1.0), ratios


# ---------------------------------------------------------------------------
# Congestion-approximator compression for contracted subgraphs
# ---------------------------------------------------------------------------

def ca_contraction(tree: HierarchyTree, keep_vertices) -> HierarchyTree:
    """Shrink a hierarchy to the parts relevant for a vertex subset.

    Leaves representing exactly one kept vertex get weight 1, everything else
    weight 0; maximal zero-weight subtrees collapse (top-down) into single
    piece leaves carrying their member sets.  For a binary input of depth
    O(log n) the output has O(|S| log n) nodes and stays binary.
    """
    keep = set(int(v) for v in keep_vertices)
    w = np.zeros(tree.k)
    for u, s in tree.leaf_sets.items():
        if len(s) == 1 and int(s[0]) in keep:
            w[u] = 1.0
    sums = subtree_sum(tree.as_rooted_tree(), w)
    if sums[0] == 0:
        raise GraphError("no kept vertex is represented by the tree")
    members = tree.all_members()
    parents: list[int] = []
    caps: list[float] = []
    leaf_sets: dict[int, np.ndarray] = {}
    stack = [(0, -1)]
    while stack:
        u, parent_new = stack.pop()
        node = len(parents)
        parents.append(parent_new)
        caps.append(float(tree.cap[u]))
        if sums[u] == 0:
            leaf_sets[node] = members[u]
            continue
        kids = tree.children[u]
        if not kids:
            leaf_sets[node] = tree.leaf_sets[u]
            continue
        for c in reversed(kids):
            stack.append((c, node))
    return HierarchyTree(parents, caps, leaf_sets, alpha=tree.alpha,
                         base_n=tree.base_n)


def extract_contracted_ca(tree: HierarchyTree, graph: Graph, kept, csub):
    """Congestion approximator plus demand projection for a contracted graph.

    Compresses ``tree`` (a hierarchy for ``graph``) onto the kept vertices,
    reinterprets the collapsed pieces as split copies of the supernode, and
    relabels every node with its exact cut capacity in the piece-split view
    of the contracted instance (instance edges at instance weights plus
    piece-to-piece edges at base weights).  Returns ``(hierarchy,
    projection)`` where the projection carries each piece's share of the
    supernode demand (proportional to its reweighted boundary capacity).
    """
    kept_sorted = list(map(int, sorted(set(int(v) for v in kept))))
    k = len(kept_sorted)
    sub = ca_contraction(tree, kept_sorted)
    # Identify piece leaves and build the piece-split vertex space:
    # kept vertices keep their local ids 0..k-1, pieces get k, k+1, ...
    piece_of_base = np.full(graph.n, -1, dtype=np.int64)
    piece_nodes: list[int] = []
    local_sets: dict[int, np.ndarray] = {}
    next_piece = k
    for u, s in sub.leaf_sets.items():
        if len(s) == 1 and int(s[0]) in csub.to_local:
            local_sets[u] = np.array([csub.to_local[int(s[0])]], dtype=np.int64)
        elif len(s) == 0:
            local_sets[u] = np.zeros(0, dtype=np.int64)
        else:
            piece_of_base[s] = next_piece
            local_sets[u] = np.array([next_piece], dtype=np.int64)
            piece_nodes.append(u)
            next_piece += 1
    # Piece-split graph: instance edges (reweighted), boundary edges pointed
    # at the actual piece, plus inter-piece edges at base capacity.
    eu: list[int] = []
    ev: list[int] = []
    cap: list[float] = []
    in_kept = np.zeros(graph.n, dtype=bool)
    in_kept[kept_sorted] = True
    for e in range(csub.graph.m):
        u = int(csub.graph.eu[e])
        v = int(csub.graph.ev[e])
        c = float(csub.graph.cap[e])
        if v == csub.supernode or u == csub.supernode:
            base_e = int(csub.origin_edge[e])
            bu, bv = int(graph.eu[base_e]), int(graph.ev[base_e])
            outside = bv if in_kept[bu] else bu
            inside = u if v == csub.supernode else v
            target = int(piece_of_base[outside])
            if target < 0:
                continue  # piece not represented by the tree; demand-free
            eu.append(inside)
            ev.append(target)
            cap.append(c)
        else:
            eu.append(u)
            ev.append(v)
            cap.append(c)
    for e in range(graph.m):
        bu, bv = int(graph.eu[e]), int(graph.ev[e])
        if in_kept[bu] or in_kept[bv]:
            continue
        pu, pv = int(piece_of_base[bu]), int(piece_of_base[bv])
        if pu != pv and pu >= 0 and pv >= 0:
            eu.append(pu)
            ev.append(pv)
            cap.append(float(graph.cap[e]))
    split_graph = Graph(next_piece, eu, ev, cap, _validated=True)
    out = HierarchyTree(sub.parent.copy(), sub.cap.copy(), local_sets,
                        alpha=tree.alpha, base_n=next_piece)
    out = out.relabel(split_graph)
    out.alpha = tree.alpha
    # Boundary weight per piece via one subtree-sum pass over the tree.
    wb = np.zeros(sub.k)
    leaf_of = {}
    for u, s in sub.leaf_sets.items():
        for v in s:
            leaf_of[int(v)] = u
    for e in map(int, csub.boundary_edges):
        base_e = int(csub.origin_edge[e])
        bu, bv = int(graph.eu[base_e]), int(graph.ev[base_e])
        outside = bv if in_kept[bu] else bu
        node = leaf_of.get(outside)
        if node is not None:
            wb[node] += float(csub.graph.cap[e])
    sums = subtree_sum(sub.as_rooted_tree(), wb)
    weights = np.array([sums[u] for u in piece_nodes])
    total = float(weights.sum())
    if total > 0:
        rho = weights / total
    else:
        rho = np.zeros(len(weights))
    remap = {u: u for u in range(sub.k)}  # node ids unchanged by relabel
    proj = Projection(np.array([remap[u] for u in piece_nodes], dtype=np.int64),
                      rho)
    return out, proj
