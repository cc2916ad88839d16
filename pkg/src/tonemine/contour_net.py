"""Similarity network over a category's contour vectors.

The fully connected weighted network is held as a condensed distance
table. Thresholding yields an unweighted graph; the threshold itself is
chosen by maximizing the clustering-coefficient gap between the observed
graph and a degree-preserving randomized null model, over an empirical
candidate grid (one grid for unigrams, another for bigrams/trigrams).

Clustering coefficient here is the average local coefficient. The 2m/k(k-1)
density form is invariant under degree-preserving rewiring (the gap would
be identically zero), so it is exposed only as a diagnostic; see
:func:`density`.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .errors import NoConnectiveThreshold, ValidationError
from .preprocess import NgramDataset
from .seeding import derive_seed

DEFAULT_PHI = {
    1: (0.2, 0.4, 0.6, 0.8),
    2: (1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5),
    3: (1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5),
}


@dataclass(eq=False)
class DistanceTable:
    """Condensed upper-triangular pairwise Euclidean distances."""

    n_nodes: int
    condensed: np.ndarray

    def distance(self, i: int, j: int) -> float:
        if i == j:
            return 0.0
        if i > j:
            i, j = j, i
        m = self.n_nodes
        return float(self.condensed[i * m - i * (i + 1) // 2 + j - i - 1])


@dataclass(eq=False)
class ContourGraph:
    """Unweighted graph; edges is an (m, 2) int64 array with u < v per row."""

    n_nodes: int
    edges: np.ndarray
    threshold: float

    @property
    def n_edges(self) -> int:
        return int(self.edges.shape[0])

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n_nodes, dtype=np.int64)
        if self.n_edges:
            np.add.at(deg, self.edges[:, 0], 1)
            np.add.at(deg, self.edges[:, 1], 1)
        return deg

    def to_csr(self) -> tuple[np.ndarray, np.ndarray]:
        """Symmetric CSR (indptr, indices) with sorted neighbor lists."""
        indptr = np.zeros(self.n_nodes + 1, dtype=np.int64)
        if self.n_edges == 0:
            return indptr, np.empty(0, dtype=np.int64)
        src = np.concatenate([self.edges[:, 0], self.edges[:, 1]])
        dst = np.concatenate([self.edges[:, 1], self.edges[:, 0]])
        order = np.lexsort((dst, src))
        np.cumsum(np.bincount(src, minlength=self.n_nodes), out=indptr[1:])
        return indptr, dst[order]

    def adjacency(self) -> np.ndarray:
        adj = np.zeros((self.n_nodes, self.n_nodes), dtype=np.uint8)
        if self.n_edges:
            adj[self.edges[:, 0], self.edges[:, 1]] = 1
            adj[self.edges[:, 1], self.edges[:, 0]] = 1
        return adj


@dataclass(frozen=True)
class PhiDiagnostic:
    phi: float
    edges: int
    cc_observed: float
    cc_random: float
    delta: float


def pairwise_distances(dataset: NgramDataset | np.ndarray) -> DistanceTable:
    """Full pairwise Euclidean distance table (condensed)."""
    matrix = dataset.matrix() if isinstance(dataset, NgramDataset) else np.asarray(dataset)
    if matrix.ndim != 2 or matrix.shape[0] < 2:
        raise ValidationError("need at least 2 instances to build a distance table")
    x = np.ascontiguousarray(matrix, dtype=np.float64)
    return DistanceTable(x.shape[0], _kernels.condensed_distances(x))


def threshold_graph(table: DistanceTable, phi: float) -> ContourGraph:
    """Keep edges with distance <= phi."""
    if phi <= 0:
        raise ValidationError("threshold must be positive")
    m = table.n_nodes
    hits = np.flatnonzero(table.condensed <= phi)
    # map condensed positions back to (i, j)
    row_starts = np.zeros(m, dtype=np.int64)
    np.cumsum(np.arange(m - 1, 0, -1), out=row_starts[1:])
    i = np.searchsorted(row_starts, hits, side="right") - 1
    j = hits - row_starts[i] + i + 1
    edges = np.column_stack([i, j]).astype(np.int64)
    return ContourGraph(m, edges, threshold=phi)


def clustering_coefficient(graph: ContourGraph) -> float:
    """Average local clustering coefficient; degree < 2 nodes contribute 0."""
    if graph.n_nodes == 0:
        raise ValidationError("clustering coefficient of an empty graph")
    if graph.n_edges == 0:
        return 0.0
    indptr, indices = graph.to_csr()
    tri = _kernels.triangle_counts(indptr, indices)
    deg = graph.degrees()
    mask = deg >= 2
    local = np.zeros(graph.n_nodes, dtype=np.float64)
    local[mask] = 2.0 * tri[mask] / (deg[mask] * (deg[mask] - 1.0))
    return float(local.mean())


def density(graph: ContourGraph) -> float:
    """Edge density 2m/(k(k-1)): the saturation diagnostic."""
    k = graph.n_nodes
    if k < 2:
        return 0.0
    return 2.0 * graph.n_edges / (k * (k - 1.0))


def randomize_degree_preserving(
    graph: ContourGraph, swaps: int | None = None, seed: int = 0
) -> ContourGraph:
    """Degree-preserving randomization by attempted double-edge swaps.

    Attempts default to the edge count. Attempts that would create a
    self-loop or duplicate edge are skipped, not retried, so the result is
    a fixed function of (graph, swaps, seed).
    """
    m = graph.n_edges
    edges = graph.edges.copy()
    if m < 2:
        return ContourGraph(graph.n_nodes, edges, graph.threshold)
    if swaps is None:
        swaps = m
    rng = np.random.default_rng(seed)
    pick_a = rng.integers(0, m, size=swaps, dtype=np.int64)
    pick_b = rng.integers(0, m, size=swaps, dtype=np.int64)
    side = rng.integers(0, 2, size=swaps, dtype=np.uint8)
    adj = graph.adjacency()
    _kernels.double_edge_swap(edges, adj, pick_a, pick_b, side)
    return ContourGraph(graph.n_nodes, edges, graph.threshold)


def select_threshold(
    table: DistanceTable,
    phis: Sequence[float],
    seed: int = 0,
    replicates: int = 1,
) -> tuple[float, list[PhiDiagnostic]]:
    """Pick the threshold whose graph most exceeds its null model's
    clustering coefficient.

    For each candidate phi (ascending): build the thresholded graph, build
    a degree-preserving randomization, and score delta = CC(observed) -
    CC(randomized), averaging the null CC over `replicates` draws. Returns
    the argmax phi (ties go to the smaller phi) plus per-phi diagnostics.
    Candidates whose graph has no edges are recorded but not eligible.
    """
    if not phis:
        raise ValidationError("empty threshold candidate set")
    diagnostics: list[PhiDiagnostic] = []
    best_phi: float | None = None
    best_delta = -np.inf
    for k, phi in enumerate(sorted(set(float(p) for p in phis))):
        graph = threshold_graph(table, phi)
        if graph.n_edges == 0:
            diagnostics.append(PhiDiagnostic(phi, 0, 0.0, 0.0, 0.0))
            continue
        cc_obs = clustering_coefficient(graph)
        cc_rand = float(
            np.mean(
                [
                    clustering_coefficient(
                        randomize_degree_preserving(
                            graph, seed=derive_seed(seed, "phi", k, "rep", r)
                        )
                    )
                    for r in range(replicates)
                ]
            )
        )
        delta = cc_obs - cc_rand
        diagnostics.append(PhiDiagnostic(phi, graph.n_edges, cc_obs, cc_rand, delta))
        if delta > best_delta:
            best_delta = delta
            best_phi = phi
    if best_phi is None:
        raise NoConnectiveThreshold("no connective threshold")
    return best_phi, diagnostics


def write_diagnostics_csv(
    rows: Iterable[tuple[str, PhiDiagnostic]], path: str | Path, meta: str | None = None
) -> None:
    """CSV of per-category threshold diagnostics: phi,edges,cc_observed,cc_random,delta."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if meta:
            fh.write(f"# {meta}\n")
        writer = csv.writer(fh)
        writer.writerow(["category", "phi", "edges", "cc_observed", "cc_random", "delta"])
        for category, d in rows:
            writer.writerow([category, repr(d.phi), d.edges, repr(d.cc_observed),
                             repr(d.cc_random), repr(d.delta)])
