"""Backend parity and correctness of the hot kernels.

Every kernel is exercised under both implementations (skipping the
compiled one when it is not built); the double-edge-swap and Louvain-pass
kernels must agree exactly between backends given identical inputs.
"""
from __future__ import annotations

import numpy as np
import pytest

from tonemine._kernels import _pyfallback
from tonemine.contour_net import ContourGraph

from helpers import oracle_triangle_counts, random_graph

IMPLS = {"python": _pyfallback}
try:
    from tonemine._kernels import _core

    IMPLS["c"] = _core
except ImportError:
    pass


@pytest.fixture(params=sorted(IMPLS), ids=sorted(IMPLS))
def impl(request):
    return IMPLS[request.param]


def test_condensed_distances_small(impl):
    x = np.array([[0.0, 0.0], [3.0, 4.0], [0.0, 1.0]])
    out = impl.condensed_distances(np.ascontiguousarray(x))
    assert out == pytest.approx([5.0, 1.0, np.hypot(3.0, 3.0)])


def test_condensed_distances_backend_agreement():
    if "c" not in IMPLS:
        pytest.skip("compiled backend not built")
    x = np.random.default_rng(0).normal(size=(40, 30))
    a = IMPLS["c"].condensed_distances(np.ascontiguousarray(x))
    b = IMPLS["python"].condensed_distances(x)
    assert np.allclose(a, b, rtol=0, atol=1e-12)


@pytest.mark.parametrize("trial", range(20))
def test_triangle_counts_random_graphs(impl, trial):
    rng = np.random.default_rng(trial)
    n = int(rng.integers(2, 12))
    g = random_graph(n, float(rng.uniform(0.1, 0.9)), rng)
    indptr, indices = g.to_csr()
    got = impl.triangle_counts(indptr, indices)
    assert np.array_equal(got, oracle_triangle_counts(n, g.edges))


def test_double_edge_swap_backends_identical():
    if "c" not in IMPLS:
        pytest.skip("compiled backend not built")
    rng = np.random.default_rng(42)
    g = random_graph(15, 0.4, rng)
    m = g.n_edges
    pick_a = rng.integers(0, m, size=m, dtype=np.int64)
    pick_b = rng.integers(0, m, size=m, dtype=np.int64)
    side = rng.integers(0, 2, size=m, dtype=np.uint8)
    results = {}
    for name, impl in IMPLS.items():
        edges = g.edges.copy()
        adj = g.adjacency()
        done = impl.double_edge_swap(edges, adj, pick_a, pick_b, side)
        results[name] = (edges, adj, done)
    assert np.array_equal(results["c"][0], results["python"][0])
    assert np.array_equal(results["c"][1], results["python"][1])
    assert results["c"][2] == results["python"][2]


def test_double_edge_swap_preserves_degrees(impl):
    rng = np.random.default_rng(7)
    for _ in range(25):
        n = int(rng.integers(4, 20))
        g = random_graph(n, 0.5, rng)
        if g.n_edges < 2:
            continue
        before = g.degrees()
        edges = g.edges.copy()
        adj = g.adjacency()
        m = g.n_edges
        impl.double_edge_swap(
            edges,
            adj,
            rng.integers(0, m, size=2 * m, dtype=np.int64),
            rng.integers(0, m, size=2 * m, dtype=np.int64),
            rng.integers(0, 2, size=2 * m, dtype=np.uint8),
        )
        after = ContourGraph(n, edges, 1.0).degrees()
        assert np.array_equal(before, after)
        # still a simple graph
        assert len({(int(u), int(v)) for u, v in edges}) == m
        assert all(u != v for u, v in edges)


def test_louvain_move_pass_backends_identical():
    if "c" not in IMPLS:
        pytest.skip("compiled backend not built")
    rng = np.random.default_rng(3)
    for _ in range(10):
        n = int(rng.integers(4, 25))
        g = random_graph(n, 0.3, rng)
        if g.n_edges == 0:
            continue
        eu = g.edges[:, 0].astype(np.int64)
        ev = g.edges[:, 1].astype(np.int64)
        src = np.concatenate([eu, ev])
        dst = np.concatenate([ev, eu])
        order_ix = np.lexsort((dst, src))
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
        indices = dst[order_ix]
        weights = np.ones(indices.shape[0], dtype=np.float64)
        strength = np.bincount(src, minlength=n).astype(np.float64)
        order = rng.permutation(n).astype(np.int64)
        states = {}
        for name, impl in IMPLS.items():
            labels = np.arange(n, dtype=np.int64)
            comm_tot = strength.copy()
            moves = impl.louvain_move_pass(
                indptr, indices, weights, order, labels, strength, comm_tot,
                float(2 * g.n_edges), 1.0,
                np.zeros(n, dtype=np.float64), np.zeros(n, dtype=np.int64),
            )
            states[name] = (labels, comm_tot, moves)
        assert np.array_equal(states["c"][0], states["python"][0])
        assert np.array_equal(states["c"][1], states["python"][1])
        assert states["c"][2] == states["python"][2]
