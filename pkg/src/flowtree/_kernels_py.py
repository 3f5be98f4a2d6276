"""Pure NumPy implementations of the hot kernels.

This module mirrors the compiled extension in :mod:`flowtree._kernels`; the
backend is selected once at import time in :mod:`flowtree.kernels`.  Keep the
two implementations semantically identical: same update order, same shifted
softmax, same termination tests.  Results may differ between backends by
normal float rounding, never structurally.
"""

from __future__ import annotations

import math

import numpy as np

BACKEND = "python"


def scan_inclusive(x: np.ndarray) -> np.ndarray:
    return np.cumsum(np.asarray(x, dtype=np.float64))


def _tree_subtree_sums(w, arc_node, arc_enter, first_in, last_out):
    """Subtree sums of per-node values via one Euler scan."""
    if len(arc_node) == 0:
        return w.copy()
    av = np.where(arc_enter, w[arc_node], 0.0)
    p_ext = np.empty(len(av) + 1, dtype=np.float64)
    p_ext[0] = 0.0
    np.cumsum(av, out=p_ext[1:])
    return p_ext[last_out + 1] - p_ext[first_in + 1] + w


def _tree_root_paths(g, root, arc_node, arc_enter, first_in):
    """Root-path sums (inclusive) of per-node values via one Euler scan."""
    if len(arc_node) == 0:
        return g.copy()
    av = np.where(arc_enter, g[arc_node], -g[arc_node])
    p_ext = np.empty(len(av) + 1, dtype=np.float64)
    p_ext[0] = 0.0
    np.cumsum(av, out=p_ext[1:])
    out = p_ext[first_in + 1] + g[root]
    out[root] = g[root]
    return out


def tree_congestion_nodes(w_nodes, inv_cap, arc_node, arc_enter, first_in, last_out):
    """Per-node congestion: subtree sum divided by parent-edge capacity.

    ``inv_cap`` must already be 0 at the root and on infinite sentinel edges.
    """
    sub = _tree_subtree_sums(np.asarray(w_nodes, dtype=np.float64),
                             arc_node, arc_enter, first_in, last_out)
    return sub * inv_cap


def almost_route_loop(
    eu, ev, cap,
    x_vertex, leaf_node, proj_nodes, proj_rho,
    root, tree_g, arc_node, arc_enter, first_in, last_out,
    b_scaled, f,
    alpha, eps, n_formula, max_iters,
):
    """Gradient-descent inner loop of the congestion-potential solver.

    Mutates ``f`` in place (flow for the scaled demand; caller divides by the
    returned total scale).  Returns a dict with iteration count, the final
    potential pieces, per-node potentials for cut extraction, and a status
    flag ("ok" or "iteration-cap").
    """
    m = len(eu)
    n = len(b_scaled)
    K = len(tree_g)
    b = np.array(b_scaled, dtype=np.float64)
    inv_cap_e = 1.0 / cap
    phi_threshold = 16.0 * math.log(max(n_formula, 2)) / eps
    step_denom = 1.0 + 4.0 * alpha * alpha
    kf = 1.0
    iters = 0
    status = "iteration-cap"
    # Vertex -> tree-node scatter index; the supernode (if any) is handled
    # separately through the projection weights.
    plain = np.arange(n)
    if x_vertex >= 0:
        plain = plain[plain != x_vertex]
    plain_nodes = leaf_node[plain]

    pi = np.zeros(K)
    pi_x = 0.0
    delta = 0.0
    y = np.zeros(K)
    phi = 0.0

    while True:
        # Residual demand r = b - Bf (edge e = (u, v) enters v).
        r = b - np.bincount(ev, weights=f, minlength=n)
        r += np.bincount(eu, weights=f, minlength=n)
        w = np.bincount(plain_nodes, weights=r[plain], minlength=K)
        if x_vertex >= 0 and len(proj_nodes):
            w += np.bincount(proj_nodes, weights=proj_rho * r[x_vertex], minlength=K)
        y = tree_congestion_nodes(w, tree_g, arc_node, arc_enter, first_in, last_out)
        xe = f * inv_cap_e
        # Guard: scale flow and demand up until the potential clears the bar.
        # y and xe are linear in the scale, so rescale them directly.
        scale = 1.0
        while True:
            phi1, _, _ = _lmax_shifted(xe * scale, skip_root=-1)
            phi2, _, _ = _lmax_shifted(y * scale, skip_root=root)
            phi = phi1 + phi2
            if phi >= phi_threshold or (not np.any(y) and not np.any(xe)):
                break
            scale *= 17.0 / 16.0
        if scale != 1.0:
            kf *= scale
            f *= scale
            b *= scale
            y *= scale
            xe *= scale
        phi1, m1, z1 = _lmax_shifted(xe, skip_root=-1)
        phi2, m2, z2 = _lmax_shifted(y, skip_root=root)
        phi = phi1 + phi2
        # Gradient of the tree term: node weights -> root-path potentials.
        s_node = (np.exp(y - m2) - np.exp(-y - m2)) / z2
        s_node[root] = 0.0
        g_node = s_node * tree_g
        pi = _tree_root_paths(g_node, root, arc_node, arc_enter, first_in)
        if x_vertex >= 0 and len(proj_nodes):
            pi_x = float(np.dot(proj_rho, pi[proj_nodes]))
        grad1 = (np.exp(xe - m1) - np.exp(-xe - m1)) / z1 * inv_cap_e
        pot_u = _vertex_potential(eu, pi, leaf_node, x_vertex, pi_x)
        pot_v = _vertex_potential(ev, pi, leaf_node, x_vertex, pi_x)
        grad = grad1 + (pot_u - pot_v)
        delta = float(np.abs(cap * grad).sum())
        if delta < eps / 4.0:
            status = "ok"
            break
        if iters >= max_iters:
            break
        f -= np.sign(grad) * (delta * cap / step_denom)
        iters += 1

    return {
        "iters": iters,
        "status": status,
        "kf": kf,
        "phi": phi,
        "delta": delta,
        "pi": pi,
        "pi_x": pi_x,
        "y": y,
    }


def _vertex_potential(idx, pi, leaf_node, x_vertex, pi_x):
    if x_vertex < 0:
        return pi[leaf_node[idx]]
    # leaf_node[x_vertex] is -1; pi[-1] is a valid gather whose value is
    # discarded by the where().
    return np.where(idx == x_vertex, pi_x, pi[leaf_node[idx]])


def _lmax_shifted(x, skip_root):
    """Symmetric softmax log-sum with max-shift.

    Returns (value, shift, shifted_sum) where
    value = shift + log(shifted_sum) and shifted_sum = sum(e^{x-shift} + e^{-x-shift}).
    The root entry is excluded from the tree-term sum via ``skip_root``.
    """
    if skip_root >= 0:
        mask = np.ones(len(x), dtype=bool)
        mask[skip_root] = False
        vals = x[mask]
    else:
        vals = x
    if len(vals) == 0:
        return 0.0, 0.0, 1.0
    m = float(np.abs(vals).max())
    z = float((np.exp(vals - m) + np.exp(-vals - m)).sum())
    return m + math.log(z), m, z
