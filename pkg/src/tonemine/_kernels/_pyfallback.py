"""Pure-Python/numpy twins of the compiled kernels.

Selected automatically when the extension is missing (or forced via
``TONEMINE_PURE_PYTHON=1``). Semantics match ``_core`` exactly — same
arithmetic order in the Louvain sweep, same swap acceptance rule — so a
pipeline run is reproducible on either backend; only the speed differs.
"""
from __future__ import annotations

import numpy as np

# Dense n*n float32 work matrix used for triangle counting; above this the
# fallback refuses rather than silently thrashing memory.
_DENSE_NODE_LIMIT = 20_000


def condensed_distances(x: np.ndarray) -> np.ndarray:
    """Upper-triangular Euclidean distances of the rows of x (condensed order)."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    m = x.shape[0]
    out = np.empty(m * (m - 1) // 2, dtype=np.float64)
    pos = 0
    for i in range(m - 1):
        diff = x[i + 1 :] - x[i]
        row = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        out[pos : pos + row.shape[0]] = row
        pos += row.shape[0]
    return out


def triangle_counts(indptr: np.ndarray, indices: np.ndarray) -> np.ndarray:
    """Per-node triangle counts via one dense boolean matmul.

    Exact: entries of A@A are neighbor counts < 2**24, representable in
    float32.
    """
    n = indptr.shape[0] - 1
    if n > _DENSE_NODE_LIMIT:
        raise MemoryError(
            f"pure-Python triangle counting is dense and capped at "
            f"{_DENSE_NODE_LIMIT} nodes (got {n}); build the compiled kernels"
        )
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    adj = np.zeros((n, n), dtype=np.float32)
    rows = np.repeat(np.arange(n), np.diff(indptr))
    adj[rows, indices] = 1.0
    paths2 = adj @ adj
    tri = (paths2 * adj).sum(axis=1) / 2.0
    return tri.astype(np.int64)


def double_edge_swap(
    edges: np.ndarray,
    adj: np.ndarray,
    pick_a: np.ndarray,
    pick_b: np.ndarray,
    side: np.ndarray,
) -> int:
    """In-place double-edge swaps; see the compiled twin for the contract."""
    done = 0
    for t in range(pick_a.shape[0]):
        e1 = pick_a[t]
        e2 = pick_b[t]
        if e1 == e2:
            continue
        a, b = edges[e1]
        c, d = edges[e2]
        if side[t]:
            x1, y1, x2, y2 = a, d, c, b
        else:
            x1, y1, x2, y2 = a, c, b, d
        if x1 == y1 or x2 == y2:
            continue
        if adj[x1, y1] or adj[x2, y2]:
            continue
        adj[a, b] = adj[b, a] = 0
        adj[c, d] = adj[d, c] = 0
        adj[x1, y1] = adj[y1, x1] = 1
        adj[x2, y2] = adj[y2, x2] = 1
        edges[e1] = (x1, y1) if x1 < y1 else (y1, x1)
        edges[e2] = (x2, y2) if x2 < y2 else (y2, x2)
        done += 1
    return done


def louvain_move_pass(
    indptr: np.ndarray,
    indices: np.ndarray,
    weights: np.ndarray,
    order: np.ndarray,
    labels: np.ndarray,
    strength: np.ndarray,
    comm_tot: np.ndarray,
    two_m: float,
    resolution: float,
    nb_weight: np.ndarray,
    touched: np.ndarray,
) -> int:
    """One Louvain local-move sweep; mirrors the compiled twin bit for bit."""
    moves = 0
    for v in order:
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
        nb_weight[touched[:ntouch]] = 0.0
    return moves
