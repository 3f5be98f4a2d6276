"""Rooted vertex-hierarchy trees with cut-capacity edge labels.

A :class:`HierarchyTree` is the tree object plugged into the congestion
solver: nodes represent vertex subsets of a base graph, the edge from a node
to its parent is labeled with the capacity of the graph cut separating that
subset, and the leaves partition the base vertex set.  Demands placed on base
vertices are routed up the tree, so the congestion of any demand vector is a
single bottom-up pass.

Edges added purely for structure (by the binarization step) carry ``inf``
capacity.  ``inf`` is a sentinel meaning "never binding": such edges are
excluded from congestion maxima, which IEEE division gives us for free
(x / inf == 0).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import Graph
from .primitives import RootedTree, subtree_sum

INF = float("inf")


@dataclass(frozen=True)
class Projection:
    """Demand-splitting weights for a contracted supernode.

    ``nodes`` are piece-leaf ids of a hierarchy tree and ``rho`` their
    fractions (nonnegative, summing to 1).  A demand placed on the supernode
    is distributed as ``rho * demand`` over the piece leaves.
    """

    nodes: np.ndarray
    rho: np.ndarray


class HierarchyTree:
    """Hierarchical decomposition tree over a base vertex set.

    Node 0 is always the root.  ``parent[0] == -1``; ``cap[v]`` labels the
    edge from v to its parent (the root entry is ignored).  ``leaf_sets``
    maps leaf node ids to the base vertices they represent; singleton leaves
    carry one vertex, piece leaves (from congestion-approximator contraction)
    carry several, and placeholder leaves may carry none.
    """

    def __init__(self, parent, cap, leaf_sets: dict[int, np.ndarray],
                 alpha: float = 1.0, base_n: int | None = None):
        self.parent = np.asarray(parent, dtype=np.int64)
        self.cap = np.asarray(cap, dtype=np.float64)
        self.k = len(self.parent)
        if self.k == 0:
            raise ValueError("empty hierarchy tree")
        if self.parent[0] != -1:
            raise ValueError("node 0 must be the root")
        self.leaf_sets = {int(u): np.asarray(s, dtype=np.int64)
                          for u, s in leaf_sets.items()}
        self.alpha = float(alpha)
        covered = (np.concatenate(list(self.leaf_sets.values()))
                   if self.leaf_sets else np.zeros(0, dtype=np.int64))
        self.base_n = int(base_n) if base_n is not None else (
            int(covered.max()) + 1 if len(covered) else 0)
        self._children: list[list[int]] | None = None
        self._depth: np.ndarray | None = None
        self._rooted: RootedTree | None = None
        self._leaf_of: np.ndarray | None = None
        self._members: list[np.ndarray] | None = None
        self._check()

    def _check(self) -> None:
        kids: list[list[int]] = [[] for _ in range(self.k)]
        for v in range(1, self.k):
            p = int(self.parent[v])
            if not (0 <= p < self.k):
                raise ValueError(f"node {v} has invalid parent {p}")
            kids[p].append(v)
        self._children = kids
        depth = np.full(self.k, -1, dtype=np.int64)
        depth[0] = 0
        stack = [0]
        seen = 0
        while stack:
            u = stack.pop()
            seen += 1
            for c in kids[u]:
                depth[c] = depth[u] + 1
                stack.append(c)
        if seen != self.k:
            raise ValueError("parent array has a cycle or unreachable node")
        self._depth = depth
        for u in range(self.k):
            if not kids[u] and u not in self.leaf_sets:
                self.leaf_sets[u] = np.zeros(0, dtype=np.int64)
            if kids[u] and u in self.leaf_sets:
                raise ValueError(f"internal node {u} has a leaf set")
        counts = np.zeros(self.base_n, dtype=np.int64)
        for s in self.leaf_sets.values():
            if len(s):
                counts[s] += 1
        if (counts > 1).any():
            raise ValueError("leaf sets are not disjoint")

    # -- structure ---------------------------------------------------------

    @property
    def children(self) -> list[list[int]]:
        return self._children  # type: ignore[return-value]

    @property
    def depth(self) -> int:
        return int(self._depth.max())  # type: ignore[union-attr]

    @property
    def node_depths(self) -> np.ndarray:
        return self._depth  # type: ignore[return-value]

    @property
    def is_binary(self) -> bool:
        return all(len(c) <= 2 for c in self.children)

    def leaves(self) -> list[int]:
        return sorted(self.leaf_sets.keys())

    def covers_all(self) -> bool:
        counts = np.zeros(self.base_n, dtype=np.int64)
        for s in self.leaf_sets.values():
            if len(s):
                counts[s] += 1
        return bool((counts == 1).all())

    def leaf_of(self) -> np.ndarray:
        """Base vertex -> containing leaf node (-1 where uncovered)."""
        if self._leaf_of is None:
            out = np.full(self.base_n, -1, dtype=np.int64)
            for u, s in self.leaf_sets.items():
                if len(s):
                    out[s] = u
            self._leaf_of = out
        return self._leaf_of

    def singleton_leaf_of(self) -> np.ndarray:
        """Base vertex -> its singleton leaf (-1 if its leaf is not a singleton)."""
        out = np.full(self.base_n, -1, dtype=np.int64)
        for u, s in self.leaf_sets.items():
            if len(s) == 1:
                out[s[0]] = u
        return out

    def members(self, node: int) -> np.ndarray:
        """Base vertices represented by a node (ascending)."""
        return self.all_members()[node]

    def all_members(self) -> list[np.ndarray]:
        if self._members is None:
            out: list[list[int] | np.ndarray] = [None] * self.k  # type: ignore[list-item]
            order = np.argsort(self.node_depths)[::-1]
            for u in map(int, order):
                kids = self.children[u]
                if not kids:
                    out[u] = np.sort(self.leaf_sets[u])
                else:
                    out[u] = np.sort(np.concatenate([out[c] for c in kids]))
            self._members = out  # type: ignore[assignment]
        return self._members  # type: ignore[return-value]

    def as_rooted_tree(self) -> RootedTree:
        """The hierarchy as a plain capacitated tree over its node ids."""
        if self._rooted is None:
            self._rooted = RootedTree(self.parent, 0, cap_to_parent=self.cap)
        return self._rooted

    # -- routing -----------------------------------------------------------

    def place_demand(self, b, projection: Projection | None = None,
                     supernode_demand: float = 0.0) -> np.ndarray:
        """Scatter a base-vertex demand vector onto tree nodes."""
        b = np.asarray(b, dtype=np.float64)
        w = np.zeros(self.k)
        leaf = self.leaf_of()
        nz = np.nonzero(b)[0]
        for v in map(int, nz):
            node = leaf[v]
            if node < 0:
                raise ValueError(f"demand on vertex {v} not covered by any leaf")
            w[node] += b[v]
        if projection is not None and supernode_demand != 0.0:
            w[projection.nodes] += projection.rho * supernode_demand
        return w

    def subtree_demand(self, node_weights) -> np.ndarray:
        return subtree_sum(self.as_rooted_tree(), node_weights)

    def congestion(self, b, projection: Projection | None = None,
                   supernode_demand: float = 0.0) -> np.ndarray:
        """Per-node congestion of routing b up the tree.

        Entry u is (subtree demand of u) / (capacity of u's parent edge);
        the root entry and infinite sentinel edges report 0.
        """
        w = self.place_demand(b, projection, supernode_demand)
        sub = self.subtree_demand(w)
        inv = np.zeros(self.k)
        finite = np.isfinite(self.cap)
        finite[0] = False
        inv[finite] = 1.0 / self.cap[finite]
        return sub * inv

    def route_value(self, b, projection: Projection | None = None,
                    supernode_demand: float = 0.0) -> float:
        """Exact optimal congestion of routing b in this tree (unique routing)."""
        y = self.congestion(b, projection, supernode_demand)
        return float(np.abs(y).max()) if self.k else 0.0

    # -- labels ------------------------------------------------------------

    def relabel(self, graph: Graph, vertex_map=None, keep_infinite: bool = True
                ) -> "HierarchyTree":
        """Recompute every edge label as an exact cut capacity in ``graph``.

        Labels are produced by the same masked-sum used by
        :meth:`Graph.cut_capacity`, so a later exactness check compares
        bitwise-identical numbers.  ``vertex_map`` optionally translates this
        tree's base vertices into ``graph`` vertices (-1 entries drop out).
        With ``keep_infinite``, sentinel labels stay infinite.
        """
        mem = self.all_members()
        new_cap = self.cap.copy()
        new_cap[0] = INF
        mask = np.zeros(graph.n, dtype=bool)
        vm = None if vertex_map is None else np.asarray(vertex_map, dtype=np.int64)
        for u in range(1, self.k):
            if keep_infinite and not np.isfinite(self.cap[u]):
                continue
            ids = mem[u]
            if vm is not None:
                ids = vm[ids]
                ids = ids[ids >= 0]
            mask[:] = False
            mask[ids] = True
            cross = mask[graph.eu] != mask[graph.ev]
            new_cap[u] = float(graph.cap[cross].sum())
        return HierarchyTree(self.parent.copy(), new_cap, dict(self.leaf_sets),
                             alpha=self.alpha, base_n=self.base_n)

    def check_labels(self, graph: Graph, rel_tol: float = 0.0) -> bool:
        """True iff every finite label equals the recomputed cut capacity."""
        mem = self.all_members()
        for u in range(1, self.k):
            if not np.isfinite(self.cap[u]):
                continue
            want = graph.cut_capacity(mem[u])
            got = float(self.cap[u])
            if abs(want - got) > rel_tol * max(1.0, abs(want)):
                return False
        return True

    # -- serialization -----------------------------------------------------

    def dumps(self) -> str:
        """Line format: ``node parent cut_capacity leaf_members``.

        ``leaf_members`` is a comma-separated vertex list for leaves and
        ``-`` for internal nodes; infinite labels serialize as ``inf``.
        """
        lines = []
        for u in range(self.k):
            c = self.cap[u]
            cs = "inf" if not np.isfinite(c) else repr(float(c))
            if self.children[u]:
                mem = "-"
            else:
                mem = ",".join(str(int(v)) for v in self.leaf_sets[u]) or "_"
            lines.append(f"{u} {int(self.parent[u])} {cs} {mem}")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str, alpha: float = 1.0) -> "HierarchyTree":
        parent = []
        cap = []
        leaf_sets: dict[int, np.ndarray] = {}
        for line in text.strip().splitlines():
            parts = line.split()
            if len(parts) != 4:
                raise ValueError(f"malformed hierarchy line: {line!r}")
            u, p, cs, mem = int(parts[0]), int(parts[1]), parts[2], parts[3]
            if u != len(parent):
                raise ValueError("hierarchy nodes must be listed in order")
            parent.append(p)
            cap.append(INF if cs == "inf" else float(cs))
            if mem != "-":
                ids = [] if mem == "_" else [int(x) for x in mem.split(",")]
                leaf_sets[u] = np.array(ids, dtype=np.int64)
        return cls(parent, cap, leaf_sets, alpha=alpha)

    def __repr__(self) -> str:
        return (f"HierarchyTree(k={self.k}, depth={self.depth}, "
                f"leaves={len(self.leaf_sets)}, alpha={self.alpha:g})")


def tree_congestion(tree: HierarchyTree, b) -> np.ndarray:
    """Per-tree-edge congestion of a base demand vector (see
    :meth:`HierarchyTree.congestion`)."""
    if np.any((tree.cap[1:] == 0)):
        raise ValueError("zero-capacity tree edge")
    return tree.congestion(b)


def singleton_hierarchy(sets_parent, cap, base_vertices, alpha=1.0) -> HierarchyTree:
    """Convenience constructor mapping per-leaf single vertices."""
    leaf_sets = {u: np.array([v], dtype=np.int64) for u, v in base_vertices.items()}
    return HierarchyTree(sets_parent, cap, leaf_sets, alpha=alpha)
