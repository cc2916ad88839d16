# cython: language_level=3
"""Compiled hot kernels: pairwise distances, triangle counting,
degree-preserving edge swaps, and the Louvain local-move sweep.

Each function has a behaviour-identical twin in ``_pyfallback``; keep the
two in lockstep (same arithmetic order, same tie-breaking) so a run gives
the same answer on either backend.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


def condensed_distances(double[:, ::1] x):
    """Upper-triangular Euclidean distances of the rows of x, scipy
    condensed order: pair (i, j), i<j at index i*m - i*(i+1)/2 + j - i - 1."""
    cdef Py_ssize_t m = x.shape[0]
    cdef Py_ssize_t d = x.shape[1]
    out_arr = np.empty(m * (m - 1) // 2, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, j, k, t = 0
    cdef double acc, diff
    for i in range(m):
        for j in range(i + 1, m):
            acc = 0.0
            for k in range(d):
                diff = x[i, k] - x[j, k]
                acc += diff * diff
            out[t] = sqrt(acc)
            t += 1
    return out_arr


def triangle_counts(long long[::1] indptr, long long[::1] indices):
    """Per-node triangle counts for a simple undirected graph in CSR form.

    Neighbor lists must be sorted ascending. Uses the forward algorithm:
    each triangle u<v<w is found once, from edge (u, v).
    """
    cdef Py_ssize_t n = indptr.shape[0] - 1
    tri_arr = np.zeros(n, dtype=np.int64)
    cdef long long[::1] tri = tri_arr
    cdef Py_ssize_t u, p, a, b
    cdef long long v, w1, w2
    for u in range(n):
        for p in range(indptr[u], indptr[u + 1]):
            v = indices[p]
            if v <= u:
                continue
            # intersect neighbors of u and v strictly greater than v
            a = p + 1
            b = indptr[v]
            while b < indptr[v + 1] and indices[b] <= v:
                b += 1
            while a < indptr[u + 1] and b < indptr[v + 1]:
                w1 = indices[a]
                w2 = indices[b]
                if w1 == w2:
                    tri[u] += 1
                    tri[v] += 1
                    tri[w1] += 1
                    a += 1
                    b += 1
                elif w1 < w2:
                    a += 1
                else:
                    b += 1
    return tri_arr


def double_edge_swap(long long[:, ::1] edges,
                     unsigned char[:, ::1] adj,
                     long long[::1] pick_a,
                     long long[::1] pick_b,
                     unsigned char[::1] side):
    """Attempt len(pick_a) double-edge swaps in place.

    edges is an (m, 2) array (rows kept u<v); adj is the dense symmetric
    adjacency. Attempt t rewires edges pick_a[t]=(a,b) and pick_b[t]=(c,d)
    to (a,d),(c,b) when side[t] else (a,c),(b,d); attempts that would make
    a self-loop or duplicate edge are skipped. Returns the success count.
    """
    cdef Py_ssize_t t, n_try = pick_a.shape[0]
    cdef long long e1, e2, a, b, c, d, x1, y1, x2, y2, tmp
    cdef long long done = 0
    for t in range(n_try):
        e1 = pick_a[t]
        e2 = pick_b[t]
        if e1 == e2:
            continue
        a = edges[e1, 0]
        b = edges[e1, 1]
        c = edges[e2, 0]
        d = edges[e2, 1]
        if side[t]:
            x1 = a; y1 = d; x2 = c; y2 = b
        else:
            x1 = a; y1 = c; x2 = b; y2 = d
        if x1 == y1 or x2 == y2:
            continue
        if adj[x1, y1] or adj[x2, y2]:
            continue
        adj[a, b] = 0; adj[b, a] = 0
        adj[c, d] = 0; adj[d, c] = 0
        adj[x1, y1] = 1; adj[y1, x1] = 1
        adj[x2, y2] = 1; adj[y2, x2] = 1
        if x1 > y1:
            tmp = x1; x1 = y1; y1 = tmp
        if x2 > y2:
            tmp = x2; x2 = y2; y2 = tmp
        edges[e1, 0] = x1; edges[e1, 1] = y1
        edges[e2, 0] = x2; edges[e2, 1] = y2
        done += 1
    return done


def louvain_move_pass(long long[::1] indptr,
                      long long[::1] indices,
                      double[::1] weights,
                      long long[::1] order,
                      long long[::1] labels,
                      double[::1] strength,
                      double[::1] comm_tot,
                      double two_m,
                      double resolution,
                      double[::1] nb_weight,
                      long long[::1] touched):
    """One sweep of Louvain local moves over ``order``; returns move count.

    labels and comm_tot are updated in place. nb_weight/touched are
    caller-provided scratch (nb_weight all zeros on entry and exit).
    Gains are compared as w(v->c) - resolution * k_v * tot_c / 2m with the
    node removed from its community first; a move needs a gain more than
    1e-12 above staying put, candidates scanned in first-encounter order.
    """
    cdef Py_ssize_t n = order.shape[0]
    cdef Py_ssize_t oi, p, ti
    cdef long long v, u, a, c, best, ntouch
    cdef double w, g, best_gain
    cdef long long moves = 0
    for oi in range(n):
        v = order[oi]
        a = labels[v]
        ntouch = 0
        for p in range(indptr[v], indptr[v + 1]):
            u = indices[p]
            if u == v:
                continue
            c = labels[u]
            if nb_weight[c] == 0.0:
                touched[ntouch] = c
                ntouch += 1
            nb_weight[c] += weights[p]
        comm_tot[a] -= strength[v]
        best = a
        best_gain = nb_weight[a] - resolution * strength[v] * comm_tot[a] / two_m
        for ti in range(ntouch):
            c = touched[ti]
            if c == a:
                continue
            g = nb_weight[c] - resolution * strength[v] * comm_tot[c] / two_m
            if g > best_gain + 1e-12:
                best_gain = g
                best = c
        comm_tot[best] += strength[v]
        if best != a:
            labels[v] = best
            moves += 1
        for ti in range(ntouch):
            nb_weight[touched[ti]] = 0.0
    return moves
