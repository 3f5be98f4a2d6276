"""Approximate minimum-congestion flow via gradient descent on a softmax
congestion potential, preconditioned by a tree congestion approximator.

The solver minimizes ``lmax(C^-1 f) + lmax(2 alpha R (b - Bf))`` where ``R``
maps a residual demand to its per-tree-cut congestion.  One descent iteration
is a handful of vectorized passes plus two Euler-tour scans over the tree;
the whole inner loop runs inside a kernel (compiled or NumPy, selected at
import).  The outer driver repairs the leftover residual demand by routing it
exactly along a maximum spanning tree, so returned flows always route their
demands to machine precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .graph import Graph, check_demand, flow_congestion, flow_divergence
from .hierarchy import HierarchyTree, Projection
from .parallel import account_map, account_scan
from .primitives import RootedTree, max_spanning_tree, subtree_sum


class SolverError(RuntimeError):
    """Raised when the descent fails to terminate within its iteration cap."""

    def __init__(self, message: str, phi_trace=None):
        super().__init__(message)
        self.phi_trace = list(phi_trace or [])


@dataclass(frozen=True)
class SolverConfig:
    """Knobs for the min-congestion solver.

    ``iter_scale`` is the constant in the iteration cap
    ``iter_scale * alpha^2 * eps^-3 * log n``; ``hard_iter_cap`` bounds a
    single call regardless of the formula.  ``refine_rounds`` controls extra
    residual-repair sweeps when a max-flow call fails its own duality-gap
    certificate.
    """

    epsilon: float = 0.1
    alpha: float = 8.0
    iter_scale: float = 200.0
    hard_iter_cap: int = 2_000_000
    chunk: int = 20_000
    outer_rounds: int | None = None
    refine_rounds: int = 2
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.epsilon < 1.0):
            raise ValueError("epsilon must be in (0, 1)")
        if self.alpha < 1.0:
            raise ValueError("alpha must be >= 1")


@dataclass(frozen=True)
class CutResult:
    """A vertex cut extracted from threshold potentials."""

    side: frozenset
    capacity: float
    threshold: float

    def recheck(self, graph: Graph) -> float:
        return graph.cut_capacity(self.side)


@dataclass
class FlowResult:
    flow: np.ndarray
    value: float
    cut: CutResult
    iterations: int
    congestion: float


def lmax(x) -> float:
    """Symmetric softmax bound: log sum_i (e^{x_i} + e^{-x_i}), max-shifted.

    Satisfies ||x||_inf <= lmax(x) <= ||x||_inf + log(2k).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        return 0.0
    m = float(np.abs(x).max())
    z = float((np.exp(x - m) + np.exp(-x - m)).sum())
    account_scan(x.size)
    return m + math.log(z)


def split_demand(demand: float, piece_weights) -> np.ndarray:
    """Split a supernode demand across contracted pieces by boundary weight.

    Piece i receives ``w_i * demand / W``; the last nonzero-weight piece takes
    the exact remainder so the parts always resum to ``demand`` bitwise.
    """
    w = np.asarray(piece_weights, dtype=np.float64)
    if (w < 0).any():
        raise ValueError("piece weights must be nonnegative")
    total = float(w.sum())
    if total <= 0:
        if demand != 0.0:
            raise ValueError("cannot split nonzero demand over zero weight")
        return np.zeros(len(w))
    out = w * (demand / total)
    nz = np.nonzero(w)[0]
    last = int(nz[-1])
    out[last] = 0.0
    out[last] = math.fsum([demand] + [-x for x in out])
    # "Sums to the demand exactly" means under correctly-rounded summation
    # (math.fsum).  One rounded remainder is not always enough; walk the last
    # entry in ulps (its exact-sum steps cannot jump over the rounding window
    # of the target), nudging another entry if a round-to-even tie blocks it.
    stuck = 0
    for _ in range(128):
        if math.fsum(out) == demand:
            break
        gap = math.fsum([demand] + [-x for x in out])
        stepped = out[last] + gap
        if stepped == out[last]:
            stepped = math.nextafter(out[last], math.copysign(math.inf, gap))
            stuck += 1
        if stuck > 8 and len(nz) > 1:
            j = int(max((i for i in nz if i != last), key=lambda i: abs(out[i])))
            out[j] = math.nextafter(out[j], math.copysign(math.inf, gap))
            stuck = 0
            continue
        out[last] = stepped
    return out


class _Instance:
    """Preassembled arrays binding a graph to a congestion approximator."""

    def __init__(self, graph: Graph, tree: HierarchyTree,
                 projection: Projection | None = None,
                 supernode: int | None = None):
        self.graph = graph
        self.tree = tree
        self.projection = projection
        self.x_vertex = -1 if supernode is None else int(supernode)
        leaf = tree.leaf_of()
        self.leaf_node = np.full(graph.n, -1, dtype=np.int64)
        limit = min(graph.n, tree.base_n)
        self.leaf_node[:limit] = leaf[:limit]
        if self.x_vertex >= 0:
            self.leaf_node[self.x_vertex] = -1
        uncovered = np.nonzero(self.leaf_node < 0)[0]
        for v in uncovered:
            if int(v) != self.x_vertex:
                raise ValueError(f"vertex {int(v)} is not covered by the tree")
        rooted = tree.as_rooted_tree()
        self.arc_node, self.arc_enter, self.first_in, self.last_out = rooted.euler_arrays()
        inv = np.zeros(tree.k)
        finite = np.isfinite(tree.cap)
        finite[0] = False
        inv[finite] = 1.0 / tree.cap[finite]
        self.tree_inv_cap = inv
        if projection is None:
            self.proj_nodes = np.zeros(0, dtype=np.int64)
            self.proj_rho = np.zeros(0)
        else:
            self.proj_nodes = np.asarray(projection.nodes, dtype=np.int64)
            self.proj_rho = np.asarray(projection.rho, dtype=np.float64)

    def tree_norm(self, b) -> float:
        sup = b[self.x_vertex] if self.x_vertex >= 0 else 0.0
        return self.tree.route_value(
            _mask_supernode(b, self.x_vertex), self.projection, sup)


def _mask_supernode(b, x_vertex):
    if x_vertex < 0:
        return b
    out = np.array(b, dtype=np.float64)
    out[x_vertex] = 0.0
    return out


def potential_and_gradient(graph: Graph, tree: HierarchyTree, b, f, alpha: float,
                           projection: Projection | None = None,
                           supernode: int | None = None):
    """Value, per-edge gradient, and per-vertex potentials of the congestion
    potential at flow ``f``.

    For internal edges the tree-term gradient is the difference of endpoint
    potentials; for a boundary edge into a contracted supernode the supernode
    potential is the projection-weighted average of its piece potentials.
    """
    inst = _Instance(graph, tree, projection, supernode)
    b = np.asarray(b, dtype=np.float64)
    f = np.asarray(f, dtype=np.float64)
    if len(f) != graph.m or len(b) != graph.n:
        raise ValueError("dimension mismatch")
    r = b - flow_divergence(graph, f)
    sup = r[inst.x_vertex] if inst.x_vertex >= 0 else 0.0
    w = tree.place_demand(_mask_supernode(r, inst.x_vertex), projection, sup)
    y = kernels.tree_congestion_nodes(
        w, inst.tree_inv_cap * (2.0 * alpha),
        inst.arc_node, inst.arc_enter, inst.first_in, inst.last_out)
    xe = f / graph.cap
    phi1, m1, z1 = _shifted(xe)
    phi2, m2, z2 = _shifted(y, skip=0)
    s_node = (np.exp(y - m2) - np.exp(-y - m2)) / z2
    s_node[0] = 0.0
    g_node = s_node * inst.tree_inv_cap * (2.0 * alpha)
    from ._kernels_py import _tree_root_paths

    pi = _tree_root_paths(g_node, 0, inst.arc_node, inst.arc_enter, inst.first_in)
    pi_x = (float(np.dot(inst.proj_rho, pi[inst.proj_nodes]))
            if inst.x_vertex >= 0 and len(inst.proj_nodes) else 0.0)
    grad1 = (np.exp(xe - m1) - np.exp(-xe - m1)) / z1 / graph.cap
    pot = np.where(np.arange(graph.n) == inst.x_vertex, pi_x,
                   pi[inst.leaf_node])
    grad = grad1 + pot[graph.eu] - pot[graph.ev]
    account_map(graph.m)
    return phi1 + phi2, grad, pot


def _shifted(x, skip: int | None = None):
    vals = np.delete(x, skip) if skip is not None else x
    if len(vals) == 0:
        return 0.0, 0.0, 1.0
    m = float(np.abs(vals).max())
    z = float((np.exp(vals - m) + np.exp(-vals - m)).sum())
    return m + math.log(z), m, z


def almost_route(graph: Graph, tree: HierarchyTree, b, alpha: float, eps: float,
                 cfg: SolverConfig | None = None,
                 projection: Projection | None = None,
                 supernode: int | None = None, separate=None):
    """One gradient-descent pass: a flow nearly routing ``b`` plus a cut.

    Returns ``(flow, cut, iterations)``.  The flow routes most of ``b`` (the
    caller repairs the residual); the cut is the best threshold cut of the
    final vertex potentials, restricted to cuts separating the pair in
    ``separate`` when given.  Raises :class:`SolverError` when the iteration
    cap is exceeded.
    """
    cfg = cfg or SolverConfig()
    b = check_demand(b, graph.n)
    inst = _Instance(graph, tree, projection, supernode)
    f = np.zeros(graph.m)
    norm = inst.tree_norm(b)
    if norm <= 0.0 or graph.m == 0:
        pot = np.zeros(graph.n)
        cut = _best_threshold_cut(graph, pot, separate)
        return f, cut, 0
    n_formula = max(graph.n, 2)
    k_b = 16.0 * math.log(n_formula) / (2.0 * alpha * eps * norm)
    b_scaled = b * k_b
    cap_total = int(min(cfg.hard_iter_cap,
                        math.ceil(cfg.iter_scale * alpha * alpha
                                  * eps ** -3 * max(math.log(n_formula), 1.0))))
    iters = 0
    scale = k_b
    phi_trace: list[float] = []
    res = None
    while True:
        budget = min(cfg.chunk, cap_total - iters)
        res = kernels.almost_route_loop(
            graph.eu, graph.ev, graph.cap,
            inst.x_vertex, inst.leaf_node, inst.proj_nodes, inst.proj_rho,
            0, inst.tree_inv_cap * (2.0 * alpha),
            inst.arc_node, inst.arc_enter, inst.first_in, inst.last_out,
            b_scaled, f, alpha, eps, n_formula, budget)
        iters += res["iters"]
        phi_trace.append(float(res["phi"]))
        scale *= res["kf"]
        b_scaled = b_scaled * res["kf"]
        if res["status"] == "ok":
            break
        if iters >= cap_total:
            raise SolverError(
                f"descent did not converge within {cap_total} iterations "
                f"(alpha={alpha:g}, eps={eps:g}, n={graph.n}, m={graph.m})",
                phi_trace)
    f /= scale
    pot = np.where(np.arange(graph.n) == inst.x_vertex, res["pi_x"],
                   np.asarray(res["pi"])[inst.leaf_node])
    cut = _best_threshold_cut(graph, pot, separate)
    return f, cut, iters


def _best_threshold_cut(graph: Graph, pot: np.ndarray, separate=None) -> CutResult:
    """Scan the n-1 threshold cuts of the potentials, minimizing capacity.

    With ``separate=(s, t)``, only prefixes containing exactly one of the two
    are considered and the returned side contains ``s``.  Ties prefer smaller
    capacity, then the smaller side, then the smaller prefix, making
    extraction deterministic.  The reported capacity is recomputed from the
    chosen side with the standard masked sum.
    """
    n = graph.n
    order = np.lexsort((np.arange(n), -pot))
    rank = np.empty(n, dtype=np.int64)
    rank[order] = np.arange(n)
    if n < 2:
        return CutResult(frozenset(map(int, range(n))), 0.0, 0.0)
    ru = rank[graph.eu]
    rv = rank[graph.ev]
    lo = np.minimum(ru, rv)
    hi = np.maximum(ru, rv)
    diff = np.zeros(n + 1)
    np.add.at(diff, lo, graph.cap)
    np.add.at(diff, hi, -graph.cap)
    account_scan(graph.m + n)
    cut_caps = np.cumsum(diff)[: n - 1]  # cut k = first k+1 vertices vs rest
    candidates = range(n - 1)
    if separate is not None:
        s, t = separate
        a, b = sorted((int(rank[s]), int(rank[t])))
        candidates = range(a, b)
    sizes = np.minimum(np.arange(1, n), n - np.arange(1, n))
    best = min(candidates, key=lambda k: (cut_caps[k], sizes[k], k))
    side = frozenset(map(int, order[: best + 1]))
    if separate is not None and int(separate[0]) not in side:
        side = frozenset(range(n)) - side
    capacity = graph.cut_capacity(side)
    return CutResult(side, capacity, float(pot[order[best]]))


def route_on_spanning_tree(graph: Graph, b, tree_edges=None) -> np.ndarray:
    """Route demands exactly along a spanning tree of the graph.

    The flow on a tree edge equals the net demand of the subtree below it;
    all other edges carry zero.
    """
    b = np.asarray(b, dtype=np.float64)
    ids = max_spanning_tree(graph) if tree_edges is None else np.asarray(tree_edges)
    parent = np.full(graph.n, -2, dtype=np.int64)
    parent_edge = np.full(graph.n, -1, dtype=np.int64)
    adj: list[list[tuple[int, int]]] = [[] for _ in range(graph.n)]
    for e in map(int, ids):
        u, v = int(graph.eu[e]), int(graph.ev[e])
        adj[u].append((v, e))
        adj[v].append((u, e))
    root = 0
    parent[root] = -1
    stack = [root]
    while stack:
        u = stack.pop()
        for v, e in adj[u]:
            if parent[v] == -2:
                parent[v] = u
                parent_edge[v] = e
                stack.append(v)
    if (parent == -2).any():
        raise ValueError("spanning tree does not reach all vertices")
    rt = RootedTree(parent, root)
    sub = subtree_sum(rt, b)
    f = np.zeros(graph.m)
    for v in range(graph.n):
        e = int(parent_edge[v])
        if e < 0:
            continue
        # Inflow into the subtree below v must equal its net demand.
        if int(graph.ev[e]) == v:
            f[e] = sub[v]
        else:
            f[e] = -sub[v]
    return f


def min_congestion_flow(graph: Graph, tree: HierarchyTree, b, alpha: float,
                        eps: float, cfg: SolverConfig | None = None,
                        projection: Projection | None = None,
                        supernode: int | None = None, separate=None):
    """Flow routing ``b`` exactly with approximately optimal congestion.

    Runs one descent pass at the requested precision, then ``log2(2m)``
    repair passes at precision 1/2 on the residual demand, and finally routes
    whatever is left exactly on the maximum spanning tree.  Returns
    ``(flow, cut, iterations)``; the cut is the best threshold cut seen over
    all passes.
    """
    cfg = cfg or SolverConfig()
    b = check_demand(b, graph.n)
    f, best_cut, iters = almost_route(graph, tree, b, alpha, eps, cfg,
                                      projection, supernode, separate)
    rounds = cfg.outer_rounds
    if rounds is None:
        rounds = max(1, math.ceil(math.log2(max(2 * graph.m, 2))))
    total = f.copy()
    for _ in range(rounds):
        residual = b - flow_divergence(graph, total)
        fi, cut_i, it_i = almost_route(graph, tree, residual, alpha, 0.5, cfg,
                                       projection, supernode, separate)
        total += fi
        iters += it_i
        if cut_i.capacity < best_cut.capacity:
            best_cut = cut_i
    residual = b - flow_divergence(graph, total)
    total += route_on_spanning_tree(graph, residual)
    return total, best_cut, iters


def max_flow(graph: Graph, tree: HierarchyTree, request, alpha: float,
             eps: float, cfg: SolverConfig | None = None) -> FlowResult:
    """Approximate maximum flow / minimum cut.

    ``request`` is either an ``(s, t)`` pair or a full demand vector.  For an
    (s, t) request the returned flow is feasible (congestion 1 up to float
    rounding), its value is at least ``(1 - eps)`` of optimal, and the cut
    capacity at most ``(1 + eps)`` of optimal.  Each run self-certifies by
    comparing flow value against the best threshold cut; if the duality gap
    exceeds ``1 + eps`` the solve is retried at halved precision
    (``cfg.refine_rounds`` times), and a stalled descent is retried with the
    declared approximator quality doubled.
    """
    cfg = cfg or SolverConfig()
    st_mode = isinstance(request, tuple)
    separate = None
    if st_mode:
        s, t = request
        if s == t:
            raise ValueError("source equals sink")
        b = np.zeros(graph.n)
        b[s] = 1.0
        b[t] = -1.0
        separate = (int(s), int(t))
    else:
        b = check_demand(request, graph.n)
    eps_run = eps
    alpha_run = alpha
    best: FlowResult | None = None
    attempts = 0
    while True:
        try:
            f, cut, iters = min_congestion_flow(graph, tree, b, alpha_run,
                                                eps_run, cfg, separate=separate)
        except SolverError:
            if alpha_run >= 64 * alpha:
                raise
            alpha_run *= 2.0
            continue
        cong = flow_congestion(graph, f)
        if not st_mode:
            return FlowResult(f, float(np.abs(b).sum()) / 2.0, cut, iters, cong)
        if cong <= 0:
            raise SolverError("zero congestion for nonzero demand")
        result = FlowResult(f / cong, 1.0 / cong, cut, iters, 1.0)
        if best is None:
            best = result
        else:
            # Keep the strongest certificate from any attempt: the largest
            # flow and the smallest cut independently tighten the gap.
            if result.value > best.value:
                best.flow = result.flow
                best.value = result.value
            if result.cut.capacity < best.cut.capacity:
                best.cut = result.cut
            best.iterations += iters
        attempts += 1
        if best.cut.capacity <= (1.0 + eps) * best.value + 1e-12 or \
                attempts > cfg.refine_rounds:
            break
        eps_run /= 2.0
    return best  # type: ignore[return-value]
