# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: prefix scan, Euler-tour tree congestion, and the
full congestion-potential descent loop.

Semantics mirror flowtree._kernels_py exactly (same update order, same
shifted softmax, same termination tests); only rounding of equivalent
float expressions may differ.  Keep the two in lockstep.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, log

cnp.import_array()

BACKEND = "cython"


def scan_inclusive(x):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] arr = np.ascontiguousarray(x, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty_like(arr)
    cdef Py_ssize_t i, n = arr.shape[0]
    cdef double acc = 0.0
    for i in range(n):
        acc += arr[i]
        out[i] = acc
    return out


cdef void _subtree_sums(double[::1] w, long[::1] arc_node, unsigned char[::1] arc_enter,
                        long[::1] first_in, long[::1] last_out,
                        double[::1] p_ext, double[::1] out) nogil:
    cdef Py_ssize_t na = arc_node.shape[0]
    cdef Py_ssize_t k = w.shape[0]
    cdef Py_ssize_t i
    cdef double acc = 0.0
    p_ext[0] = 0.0
    for i in range(na):
        if arc_enter[i]:
            acc += w[arc_node[i]]
        p_ext[i + 1] = acc
    for i in range(k):
        out[i] = p_ext[last_out[i] + 1] - p_ext[first_in[i] + 1] + w[i]


cdef void _root_paths(double[::1] g, long root, long[::1] arc_node,
                      unsigned char[::1] arc_enter, long[::1] first_in,
                      double[::1] p_ext, double[::1] out) nogil:
    cdef Py_ssize_t na = arc_node.shape[0]
    cdef Py_ssize_t k = g.shape[0]
    cdef Py_ssize_t i
    cdef double acc = 0.0
    p_ext[0] = 0.0
    for i in range(na):
        if arc_enter[i]:
            acc += g[arc_node[i]]
        else:
            acc -= g[arc_node[i]]
        p_ext[i + 1] = acc
    for i in range(k):
        out[i] = p_ext[first_in[i] + 1] + g[root]
    out[root] = g[root]


def tree_congestion_nodes(w_nodes, inv_cap, arc_node, arc_enter, first_in, last_out):
    """Per-node congestion: subtree sum divided by parent-edge capacity."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] w = np.ascontiguousarray(w_nodes, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ic = np.ascontiguousarray(inv_cap, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] an = np.ascontiguousarray(arc_node, dtype=np.int64)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] ae = np.ascontiguousarray(arc_enter, dtype=np.uint8)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] fi = np.ascontiguousarray(first_in, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] lo = np.ascontiguousarray(last_out, dtype=np.int64)
    cdef Py_ssize_t k = w.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(k, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] p_ext = np.empty(an.shape[0] + 1, dtype=np.float64)
    if an.shape[0] == 0:
        return w * ic
    _subtree_sums(w, an, ae, fi, lo, p_ext, out)
    cdef Py_ssize_t i
    for i in range(k):
        out[i] *= ic[i]
    return out


def almost_route_loop(
    eu, ev, cap,
    x_vertex, leaf_node, proj_nodes, proj_rho,
    root, tree_g, arc_node, arc_enter, first_in, last_out,
    b_scaled, f,
    alpha, eps, n_formula, max_iters,
):
    """Gradient-descent inner loop; see the NumPy twin for the contract."""
    cdef cnp.ndarray[cnp.int64_t, ndim=1] eu_ = np.ascontiguousarray(eu, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] ev_ = np.ascontiguousarray(ev, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] cap_ = np.ascontiguousarray(cap, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] leaf_ = np.ascontiguousarray(leaf_node, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] pn_ = np.ascontiguousarray(proj_nodes, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] pr_ = np.ascontiguousarray(proj_rho, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] tg_ = np.ascontiguousarray(tree_g, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] an_ = np.ascontiguousarray(arc_node, dtype=np.int64)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] ae_ = np.ascontiguousarray(arc_enter, dtype=np.uint8)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] fi_ = np.ascontiguousarray(first_in, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] lo_ = np.ascontiguousarray(last_out, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] b_ = np.array(b_scaled, dtype=np.float64)
    if not (isinstance(f, np.ndarray) and f.dtype == np.float64 and f.flags.c_contiguous):
        raise TypeError("f must be a contiguous float64 array")
    cdef cnp.ndarray[cnp.float64_t, ndim=1] f_ = f

    cdef Py_ssize_t m = eu_.shape[0]
    cdef Py_ssize_t n = b_.shape[0]
    cdef Py_ssize_t K = tg_.shape[0]
    cdef Py_ssize_t na = an_.shape[0]
    cdef long x = x_vertex
    cdef long rt = root
    cdef double alpha_ = alpha
    cdef double eps_ = eps
    cdef double nf = n_formula if n_formula > 2.0 else 2.0
    cdef double phi_threshold = 16.0 * log(nf) / eps_
    cdef double step_denom = 1.0 + 4.0 * alpha_ * alpha_
    cdef double kf = 1.0
    cdef long iters = 0
    cdef long budget = max_iters
    cdef bint ok = False

    cdef cnp.ndarray[cnp.float64_t, ndim=1] r = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] w = np.empty(K, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] y = np.empty(K, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] gnode = np.empty(K, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] pi = np.zeros(K, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] p_ext = np.empty(na + 1, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xe = np.empty(m, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] grad = np.empty(m, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] inv_cap_e = np.empty(m, dtype=np.float64)

    cdef Py_ssize_t i, e, v
    cdef double acc, m1, m2, z1, z2, phi1, phi2, phi, scale, delta
    cdef double pi_x, pot_u, pot_v, g1, step, sign
    cdef double yv, xv
    phi = 0.0
    delta = 0.0
    pi_x = 0.0

    for e in range(m):
        inv_cap_e[e] = 1.0 / cap_[e]

    while True:
        # Residual demand r = b - Bf (edge e = (u, v) enters v).
        for v in range(n):
            r[v] = b_[v]
        for e in range(m):
            r[ev_[e]] -= f_[e]
            r[eu_[e]] += f_[e]
        for i in range(K):
            w[i] = 0.0
        for v in range(n):
            if v != x:
                w[leaf_[v]] += r[v]
        if x >= 0:
            for i in range(pn_.shape[0]):
                w[pn_[i]] += pr_[i] * r[x]
        if na > 0:
            _subtree_sums(w, an_, ae_, fi_, lo_, p_ext, y)
            for i in range(K):
                y[i] *= tg_[i]
        else:
            for i in range(K):
                y[i] = w[i] * tg_[i]
        for e in range(m):
            xe[e] = f_[e] * inv_cap_e[e]
        # Guard: scale flow and demand up until the potential clears the bar;
        # y and xe are linear in the scale.
        scale = 1.0
        while True:
            m1 = 0.0
            for e in range(m):
                if fabs(xe[e]) * scale > m1:
                    m1 = fabs(xe[e]) * scale
            m2 = 0.0
            for i in range(K):
                if i != rt and fabs(y[i]) * scale > m2:
                    m2 = fabs(y[i]) * scale
            z1 = 0.0
            for e in range(m):
                xv = xe[e] * scale
                z1 += exp(xv - m1) + exp(-xv - m1)
            z2 = 0.0
            for i in range(K):
                if i != rt:
                    yv = y[i] * scale
                    z2 += exp(yv - m2) + exp(-yv - m2)
            phi1 = m1 + log(z1) if m > 0 else 0.0
            phi2 = m2 + log(z2) if K > 1 else 0.0
            phi = phi1 + phi2
            if phi >= phi_threshold:
                break
            # Degenerate zero state cannot scale out of the floor.
            if m1 == 0.0 and m2 == 0.0:
                acc = 0.0
                for i in range(K):
                    acc += fabs(y[i])
                for e in range(m):
                    acc += fabs(xe[e])
                if acc == 0.0:
                    break
            scale *= 17.0 / 16.0
        if scale != 1.0:
            kf *= scale
            for e in range(m):
                f_[e] *= scale
                xe[e] *= scale
            for v in range(n):
                b_[v] *= scale
            for i in range(K):
                y[i] *= scale
        # Gradient of the tree term via root-path potentials.
        for i in range(K):
            if i == rt:
                gnode[i] = 0.0
            else:
                gnode[i] = (exp(y[i] - m2) - exp(-y[i] - m2)) / z2 * tg_[i]
        if na > 0:
            _root_paths(gnode, rt, an_, ae_, fi_, p_ext, pi)
        else:
            for i in range(K):
                pi[i] = gnode[i]
        pi_x = 0.0
        if x >= 0:
            for i in range(pn_.shape[0]):
                pi_x += pr_[i] * pi[pn_[i]]
        delta = 0.0
        for e in range(m):
            g1 = (exp(xe[e] - m1) - exp(-xe[e] - m1)) / z1 * inv_cap_e[e]
            if eu_[e] == x:
                pot_u = pi_x
            else:
                pot_u = pi[leaf_[eu_[e]]]
            if ev_[e] == x:
                pot_v = pi_x
            else:
                pot_v = pi[leaf_[ev_[e]]]
            grad[e] = g1 + pot_u - pot_v
            delta += fabs(cap_[e] * grad[e])
        if delta < eps_ / 4.0:
            ok = True
            break
        if iters >= budget:
            break
        for e in range(m):
            sign = 1.0 if grad[e] > 0.0 else (-1.0 if grad[e] < 0.0 else 0.0)
            f_[e] -= sign * (delta * cap_[e] / step_denom)
        iters += 1

    return {
        "iters": int(iters),
        "status": "ok" if ok else "iteration-cap",
        "kf": kf,
        "phi": phi,
        "delta": delta,
        "pi": pi,
        "pi_x": pi_x,
        "y": y,
    }
