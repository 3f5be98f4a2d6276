"""Work-efficient building blocks: scans, Euler-tour tree operations,
separators, connectivity, and maximum spanning trees.

All operations are deterministic for a fixed input (and seed, where one
exists), regardless of worker count.  Tree operations go through a shared
Euler-tour representation so that their span is logarithmic in the tree size
even for path-shaped trees; see :mod:`flowtree.parallel` for the accounting
model.
"""

from __future__ import annotations

from typing import TYPE_CHECKING, Sequence

import numpy as np

from .kernels import scan_inclusive
from .parallel import account_map, account_scan, ceil_log2

if TYPE_CHECKING:  # pragma: no cover
    from .graph import Graph

_SCAN_BLOCK = 4096


def prefix_sum(values) -> np.ndarray:
    """Inclusive prefix sums of a 1-D array.

    Computed by a blocked two-pass scan with a fixed block structure, so the
    result does not depend on worker count.  Grouped additions may differ
    from a flat left-to-right sum by normal float rounding.
    """
    x = np.asarray(values, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("prefix_sum expects a 1-D array")
    account_scan(x.shape[0])
    return _blocked_scan(x)


def _blocked_scan(x: np.ndarray) -> np.ndarray:
    """Scan with a fixed two-pass block structure (no cost accounting here;
    callers charge the ideal logarithmic span once)."""
    n = x.shape[0]
    if n == 0:
        return np.zeros(0, dtype=np.float64)
    if n <= _SCAN_BLOCK:
        return scan_inclusive(x)
    nb = -(-n // _SCAN_BLOCK)
    padded = np.zeros(nb * _SCAN_BLOCK, dtype=np.float64)
    padded[:n] = x
    blocks = padded.reshape(nb, _SCAN_BLOCK)
    block_sums = blocks.sum(axis=1)
    offsets = _blocked_scan(block_sums)
    out = np.cumsum(blocks, axis=1)
    out[1:] += offsets[:-1, None]
    return out.reshape(-1)[:n]


class RootedTree:
    """Rooted tree over vertices ``0..n-1`` with optional edge capacities.

    The parent array fully determines the structure (``parent[root] == -1``).
    ``cap_to_parent[v]`` is the capacity of the edge from ``v`` to its parent
    and is ignored at the root.  Euler-tour arrays are built lazily and cached;
    the tree is immutable after construction.
    """

    def __init__(self, parent: Sequence[int], root: int,
                 cap_to_parent: Sequence[float] | None = None,
                 vertex_weights: Sequence[float] | None = None):
        self.parent = np.asarray(parent, dtype=np.int64)
        self.n = self.parent.shape[0]
        self.root = int(root)
        if not (0 <= self.root < self.n):
            raise ValueError("root out of range")
        if self.parent[self.root] != -1:
            raise ValueError("parent[root] must be -1")
        if cap_to_parent is None:
            self.cap_to_parent = np.ones(self.n, dtype=np.float64)
        else:
            self.cap_to_parent = np.asarray(cap_to_parent, dtype=np.float64)
        self.vertex_weights = (
            None if vertex_weights is None
            else np.asarray(vertex_weights, dtype=np.float64)
        )
        self._children: list[np.ndarray] | None = None
        self._euler = None
        self._depth: np.ndarray | None = None
        self._order: np.ndarray | None = None
        self._lca_table: np.ndarray | None = None
        self._validate()

    def _validate(self) -> None:
        n = self.n
        if n == 0:
            raise ValueError("empty tree")
        seen_root = False
        # Depth computation doubles as an acyclicity/connectivity check.
        depth = np.full(n, -1, dtype=np.int64)
        depth[self.root] = 0
        order = [self.root]
        kids = [[] for _ in range(n)]
        for v in range(n):
            p = self.parent[v]
            if v == self.root:
                seen_root = True
                continue
            if p < 0 or p >= n:
                raise ValueError(f"vertex {v} has invalid parent {p}")
            kids[p].append(v)
        stack = [self.root]
        count = 0
        while stack:
            u = stack.pop()
            count += 1
            for c in kids[u]:
                depth[c] = depth[u] + 1
                order.append(c)
                stack.append(c)
        if count != n:
            raise ValueError("parent array does not describe one tree")
        if not seen_root:
            raise ValueError("missing root")
        self._children = [np.array(k, dtype=np.int64) for k in kids]
        self._depth = depth
        self._order = np.array(order, dtype=np.int64)

    @classmethod
    def from_edges(cls, n: int, edges, root: int = 0,
                   caps: Sequence[float] | None = None) -> "RootedTree":
        """Build from undirected edges (u, v); caps align with the edge list."""
        adj: list[list[tuple[int, float]]] = [[] for _ in range(n)]
        for i, (u, v) in enumerate(edges):
            c = 1.0 if caps is None else float(caps[i])
            adj[u].append((v, c))
            adj[v].append((u, c))
        parent = np.full(n, -2, dtype=np.int64)
        capv = np.ones(n, dtype=np.float64)
        parent[root] = -1
        stack = [root]
        while stack:
            u = stack.pop()
            for v, c in adj[u]:
                if parent[v] == -2:
                    parent[v] = u
                    capv[v] = c
                    stack.append(v)
        if (parent == -2).any():
            raise ValueError("edges do not span all vertices")
        return cls(parent, root, cap_to_parent=capv)

    @property
    def children(self) -> list[np.ndarray]:
        return self._children  # type: ignore[return-value]

    @property
    def depth(self) -> np.ndarray:
        return self._depth  # type: ignore[return-value]

    def euler_arrays(self):
        """Euler-tour arc arrays (arc_node, arc_enter, first_in, last_out).

        Arc i either enters arc_node[i] from its parent (arc_enter True) or
        returns from it.  first_in[v] / last_out[v] are the indices of v's
        entering and leaving arcs; the root uses (-1, 2(n-1)-1).
        """
        if self._euler is not None:
            return self._euler
        n = self.n
        m = 2 * (n - 1)
        arc_node = np.empty(max(m, 0), dtype=np.int64)
        arc_enter = np.empty(max(m, 0), dtype=bool)
        first_in = np.full(n, -1, dtype=np.int64)
        last_out = np.full(n, m - 1, dtype=np.int64)
        k = 0
        # Iterative DFS emitting (enter child ... leave child) arc pairs.
        stack: list[tuple[int, int]] = [(self.root, 0)]
        child_lists = self.children
        while stack:
            u, ci = stack[-1]
            kids = child_lists[u]
            if ci < len(kids):
                stack[-1] = (u, ci + 1)
                c = int(kids[ci])
                arc_node[k] = c
                arc_enter[k] = True
                first_in[c] = k
                k += 1
                stack.append((c, 0))
            else:
                stack.pop()
                if u != self.root:
                    arc_node[k] = u
                    arc_enter[k] = False
                    last_out[u] = k
                    k += 1
        self._euler = (arc_node, arc_enter, first_in, last_out)
        return self._euler


def euler_tour_annotate(tree: RootedTree):
    """Per-vertex (first visit, last visit, parent, depth) from an Euler tour.

    Visit indices refer to the tour's arc sequence and satisfy the usual
    nesting: the open interval of a vertex contains exactly its subtree.
    """
    arc_node, arc_enter, first_in, last_out = tree.euler_arrays()
    account_map(max(len(arc_node), 1))
    first = first_in.copy()
    last = last_out.copy()
    first[tree.root] = -1
    return first, last, tree.parent.copy(), tree.depth.copy()


def subtree_sum(tree: RootedTree, weights) -> np.ndarray:
    """Sum of ``weights`` over each vertex's subtree.

    Implemented as a single scan over the Euler tour, so the span is
    logarithmic in the tree size regardless of its depth.
    """
    w = np.asarray(weights, dtype=np.float64)
    if w.shape[0] != tree.n:
        raise ValueError("weight vector length mismatch")
    if tree.n == 1:
        return w.copy()
    arc_node, arc_enter, first_in, last_out = tree.euler_arrays()
    av = np.where(arc_enter, w[arc_node], 0.0)
    account_map(len(av))
    p = prefix_sum(av)
    p_ext = np.concatenate(([0.0], p))
    out = p_ext[last_out + 1] - p_ext[first_in + 1] + w
    account_map(tree.n)
    return out


def root_path_sum(tree: RootedTree, node_values) -> np.ndarray:
    """For each vertex, the sum of ``node_values`` along its root path
    (inclusive of the vertex, exclusive of nothing; the root contributes its
    own value). One Euler scan; logarithmic span."""
    g = np.asarray(node_values, dtype=np.float64)
    if tree.n == 1:
        return g.copy()
    arc_node, arc_enter, first_in, last_out = tree.euler_arrays()
    av = np.where(arc_enter, g[arc_node], -g[arc_node])
    account_map(len(av))
    p = prefix_sum(av)
    p_ext = np.concatenate(([0.0], p))
    out = p_ext[first_in + 1] + g[tree.root]
    out[tree.root] = g[tree.root]
    account_map(tree.n)
    return out


def lca(tree: RootedTree, u: int, v: int) -> int:
    """Least common ancestor by binary lifting (table built once per tree)."""
    table = _lifting_table(tree)
    return int(_lca_from_table(tree, table, int(u), int(v)))


def lca_many(tree: RootedTree, pairs: np.ndarray) -> np.ndarray:
    """Vectorized-ish LCA over an array of (u, v) pairs."""
    table = _lifting_table(tree)
    out = np.empty(len(pairs), dtype=np.int64)
    for i, (u, v) in enumerate(pairs):
        out[i] = _lca_from_table(tree, table, int(u), int(v))
    return out


def _lifting_table(tree: RootedTree) -> np.ndarray:
    if tree._lca_table is not None:
        return tree._lca_table
    n = tree.n
    levels = max(1, ceil_log2(n) + 1)
    up = np.empty((levels, n), dtype=np.int64)
    par = tree.parent.copy()
    par[tree.root] = tree.root
    up[0] = par
    for k in range(1, levels):
        up[k] = up[k - 1][up[k - 1]]
    tree._lca_table = up
    return up


def _lca_from_table(tree: RootedTree, up: np.ndarray, u: int, v: int) -> int:
    depth = tree.depth
    if depth[u] < depth[v]:
        u, v = v, u
    diff = int(depth[u] - depth[v])
    k = 0
    while diff:
        if diff & 1:
            u = up[k][u]
        diff >>= 1
        k += 1
    if u == v:
        return u
    for k in range(up.shape[0] - 1, -1, -1):
        if up[k][u] != up[k][v]:
            u = up[k][u]
            v = up[k][v]
    return int(up[0][u])


def tree_separator(tree: RootedTree) -> int:
    """A vertex whose removal leaves components of size <= n/2 each.

    Ties are broken toward the smallest vertex id so the output is stable.
    """
    n = tree.n
    sizes = subtree_sum(tree, np.ones(n))
    half = n / 2.0
    best = -1
    order = tree._order
    for v in map(int, order):  # type: ignore[union-attr]
        if n - sizes[v] > half:
            continue
        kids = tree.children[v]
        if len(kids) and sizes[kids].max() > half:
            continue
        if best == -1 or v < best:
            best = v
    if best == -1:
        raise RuntimeError("no separator found; tree invariant violated")
    return best


def connected_components(graph: "Graph") -> np.ndarray:
    """Component label per vertex (labels are component-minimum vertex ids).

    Deterministic label propagation with pointer jumping; the number of
    rounds is logarithmic for typical inputs and each round is a constant
    number of vectorized passes.
    """
    n = graph.n
    labels = np.arange(n, dtype=np.int64)
    if graph.m == 0 or n == 0:
        return labels
    eu, ev = graph.eu, graph.ev
    while True:
        lu = labels[eu]
        lv = labels[ev]
        new = labels.copy()
        np.minimum.at(new, eu, lv)
        np.minimum.at(new, ev, lu)
        account_map(graph.m)
        changed = bool((new != labels).any())
        labels = new
        # Pointer jumping: compress chains label -> label[label].
        for _ in range(ceil_log2(n) + 1):
            nxt = labels[labels]
            if (nxt == labels).all():
                break
            labels = nxt
        account_scan(n)
        if not changed:
            break
    return labels


def max_spanning_tree(graph: "Graph") -> np.ndarray:
    """Edge ids of the maximum-capacity spanning tree.

    Boruvka rounds with the strict total order (capacity desc, edge id asc);
    that order makes the maximum spanning tree unique, so the result matches
    a greedy oracle exactly.
    """
    n, m = graph.n, graph.m
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    labels = connected_components(graph)
    ncomp = len(np.unique(labels))
    if ncomp != 1:
        raise ValueError(f"graph is disconnected ({ncomp} components)")
    # Rank edges by the total order once; smaller rank wins.
    order = np.lexsort((np.arange(m), -graph.cap))
    rank = np.empty(m, dtype=np.int64)
    rank[order] = np.arange(m)
    comp = np.arange(n, dtype=np.int64)
    chosen: list[int] = []
    eu, ev = graph.eu, graph.ev
    while True:
        cu = comp[eu]
        cv = comp[ev]
        cross = cu != cv
        if not cross.any():
            break
        best = np.full(n, m, dtype=np.int64)  # best rank per component
        np.minimum.at(best, cu[cross], rank[cross])
        np.minimum.at(best, cv[cross], rank[cross])
        account_map(m)
        sel = np.unique(best[best < m])
        picked = order[sel]
        for e in picked:
            a, b = _find(comp, eu[e]), _find(comp, ev[e])
            if a != b:
                comp[max(a, b)] = min(a, b)
                chosen.append(int(e))
        # Full path compression keeps comp array canonical and vector reads valid.
        for v in range(n):
            comp[v] = _find(comp, v)
        account_scan(n)
    chosen.sort()
    return np.array(chosen, dtype=np.int64)


def _find(comp: np.ndarray, v: int) -> int:
    root = v
    while comp[root] != root:
        root = comp[root]
    while comp[v] != root:
        comp[v], v = root, comp[v]
    return int(root)
