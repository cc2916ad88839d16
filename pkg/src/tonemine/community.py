"""Community detection over thresholded contour graphs.

Louvain modularity optimization (local moves + aggregation), resolution
tuning toward a small set of medium-sized communities, pruning of
undersized communities, centroid shape types, and an intrinsic
decision-tree separability check of the resulting labels.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from sklearn.model_selection import StratifiedKFold, cross_val_score
from sklearn.tree import DecisionTreeClassifier

from . import _kernels
from .contour_net import ContourGraph
from .errors import NoSurvivingTypes, ValidationError
from .preprocess import NgramDataset
from .seeding import derive_rng, derive_seed

log = logging.getLogger(__name__)

PRUNED = -1
DEFAULT_PRUNE_THRESHOLD = 10
DEFAULT_RESOLUTIONS = (0.5, 0.75, 1.0, 1.5, 2.0)
MAX_TYPES = 10


@dataclass(eq=False)
class Partition:
    """Node -> community assignment with dense ids and its modularity."""

    assignment: np.ndarray
    modularity: float

    @property
    def n_communities(self) -> int:
        return int(self.assignment.max()) + 1 if self.assignment.size else 0

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.n_communities)


@dataclass(eq=False)
class PrunedPartition:
    """Assignment with PRUNED (-1) markers; surviving ids re-densified."""

    assignment: np.ndarray
    n_types: int
    pruned_count: int


@dataclass(frozen=True)
class ResolutionDiagnostic:
    resolution: float
    n_communities: int
    surviving: int
    modularity: float


@dataclass(eq=False)
class TuneDiagnostics:
    records: list[ResolutionDiagnostic]
    chosen_resolution: float
    fallback: bool


@dataclass(eq=False)
class ShapeType:
    type_id: int
    centroid: np.ndarray
    dispersion: np.ndarray
    member_count: int


@dataclass(eq=False)
class ShapeTypeSet:
    category: tuple[int, ...]
    types: list[ShapeType]
    labels: dict[int, int]  # instance_id -> type_id, PRUNED for outliers


def modularity(graph: ContourGraph, assignment: np.ndarray) -> float:
    """Q = sum_c [ e_c/m - (d_c/2m)^2 ]; 0 for edgeless graphs."""
    assignment = np.asarray(assignment)
    if assignment.shape[0] != graph.n_nodes:
        raise ValidationError("assignment length != node count")
    m = graph.n_edges
    if m == 0:
        return 0.0
    n_comm = int(assignment.max()) + 1
    deg = graph.degrees()
    d_c = np.bincount(assignment, weights=deg, minlength=n_comm)
    intra = assignment[graph.edges[:, 0]] == assignment[graph.edges[:, 1]]
    e_c = np.bincount(assignment[graph.edges[:, 0]][intra], minlength=n_comm)
    return float(np.sum(e_c / m - (d_c / (2.0 * m)) ** 2))


def _densify(labels: np.ndarray) -> np.ndarray:
    """Relabel to 0..k-1 in first-appearance order (deterministic)."""
    _, first_pos, inverse = np.unique(labels, return_index=True, return_inverse=True)
    rank = np.argsort(np.argsort(first_pos))
    return rank[inverse].astype(np.int64)


def _aggregate(
    eu: np.ndarray, ev: np.ndarray, ew: np.ndarray, labels: np.ndarray, n_comm: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Collapse an upper-triangular weighted edge list onto communities."""
    cu = labels[eu]
    cv = labels[ev]
    lo = np.minimum(cu, cv)
    hi = np.maximum(cu, cv)
    keys = lo * n_comm + hi
    uniq, inverse = np.unique(keys, return_inverse=True)
    w = np.bincount(inverse, weights=ew)
    return (uniq // n_comm).astype(np.int64), (uniq % n_comm).astype(np.int64), w


def _csr_from_upper(
    eu: np.ndarray, ev: np.ndarray, ew: np.ndarray, n: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Symmetric weighted CSR from an upper-triangular list (loops stored once).

    Returns (indptr, indices, weights, strength) where strength counts
    self-loop weight twice, so sum(strength) = 2 * total edge weight.
    """
    loops = eu == ev
    src = np.concatenate([eu, ev[~loops]])
    dst = np.concatenate([ev, eu[~loops]])
    w = np.concatenate([ew, ew[~loops]])
    order = np.lexsort((dst, src))
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
    indices = dst[order]
    weights = w[order]
    strength = np.zeros(n, dtype=np.float64)
    np.add.at(strength, src, w)
    np.add.at(strength, eu[loops], ew[loops])
    return indptr, indices, weights, strength


def louvain(graph: ContourGraph, resolution: float = 1.0, seed: int = 0) -> Partition:
    """Greedy two-phase Louvain; deterministic for a fixed seed.

    Local moves sweep nodes in a seeded permutation until no move improves
    modularity, then communities are collapsed into an aggregate graph and
    the process repeats. The reported modularity is the standard (unit
    resolution) value of the final assignment on the input graph.
    """
    n = graph.n_nodes
    if n == 0:
        raise ValidationError("louvain on an empty graph")
    full = np.arange(n, dtype=np.int64)
    if graph.n_edges == 0:
        return Partition(full.copy(), 0.0)

    eu = graph.edges[:, 0].astype(np.int64)
    ev = graph.edges[:, 1].astype(np.int64)
    ew = np.ones(eu.shape[0], dtype=np.float64)
    two_m = float(2.0 * ew.sum())
    rng = derive_rng(seed, "louvain")

    level_n = n
    while True:
        indptr, indices, weights, strength = _csr_from_upper(eu, ev, ew, level_n)
        labels = np.arange(level_n, dtype=np.int64)
        comm_tot = strength.copy()
        order = rng.permutation(level_n).astype(np.int64)
        nb_weight = np.zeros(level_n, dtype=np.float64)
        touched = np.zeros(level_n, dtype=np.int64)
        total_moves = 0
        while True:
            moves = _kernels.louvain_move_pass(
                indptr, indices, weights, order, labels,
                strength, comm_tot, two_m, float(resolution), nb_weight, touched,
            )
            total_moves += int(moves)
            if moves == 0:
                break
        if total_moves == 0:
            break
        labels = _densify(labels)
        full = labels[full]
        n_comm = int(labels.max()) + 1
        if n_comm == level_n:
            break
        eu, ev, ew = _aggregate(eu, ev, ew, labels, n_comm)
        level_n = n_comm

    assignment = _densify(full)
    return Partition(assignment, modularity(graph, assignment))


def prune_small(partition: Partition, t: int = DEFAULT_PRUNE_THRESHOLD) -> PrunedPartition:
    """Mark members of communities smaller than t as pruned; re-densify the rest."""
    if t < 1:
        raise ValidationError("prune threshold must be >= 1")
    sizes = partition.sizes()
    surviving = np.flatnonzero(sizes >= t)
    if surviving.size == 0:
        raise NoSurvivingTypes("no surviving shape types")
    remap = np.full(sizes.shape[0], PRUNED, dtype=np.int64)
    remap[surviving] = np.arange(surviving.size)
    assignment = remap[partition.assignment]
    return PrunedPartition(assignment, int(surviving.size), int((assignment == PRUNED).sum()))


def tune_and_partition(
    graph: ContourGraph,
    seed: int = 0,
    resolutions: tuple[float, ...] = DEFAULT_RESOLUTIONS,
    prune_threshold: int = DEFAULT_PRUNE_THRESHOLD,
    max_types: int = MAX_TYPES,
) -> tuple[Partition, TuneDiagnostics]:
    """Sweep the resolution grid and pick a partition with few, solid
    communities.

    Among partitions whose post-pruning community count lands in
    [1, max_types), the highest-modularity one wins (earlier grid entry on
    ties). If the whole grid overshoots, fall back to the fewest-community
    partition; if pruning wipes out every resolution, keep the
    highest-modularity one and let downstream pruning raise.
    """
    candidates: list[tuple[float, Partition, int]] = []
    records: list[ResolutionDiagnostic] = []
    for k, res in enumerate(resolutions):
        part = louvain(graph, resolution=res, seed=derive_seed(seed, "resolution", k))
        surviving = int((part.sizes() >= prune_threshold).sum())
        candidates.append((res, part, surviving))
        records.append(
            ResolutionDiagnostic(res, part.n_communities, surviving, part.modularity)
        )
    qualified = [c for c in candidates if 1 <= c[2] < max_types]
    if qualified:
        best = max(qualified, key=lambda c: c[1].modularity)
        return best[1], TuneDiagnostics(records, best[0], fallback=False)
    nonempty = [c for c in candidates if c[2] >= 1]
    if nonempty:
        best = min(nonempty, key=lambda c: c[2])
        log.warning(
            "tune_and_partition: no resolution under %d surviving communities; "
            "falling back to %d communities at resolution %s",
            max_types, best[2], best[0],
        )
        return best[1], TuneDiagnostics(records, best[0], fallback=True)
    log.warning("tune_and_partition: pruning removes every community at every resolution")
    best = max(candidates, key=lambda c: c[1].modularity)
    return best[1], TuneDiagnostics(records, best[0], fallback=True)


def shape_types(dataset: NgramDataset, pruned: PrunedPartition) -> ShapeTypeSet:
    """Centroid (mean) and per-sample dispersion (std) of each surviving type."""
    if pruned.n_types < 1:
        raise ValidationError("no surviving communities")
    matrix = dataset.matrix()
    types = []
    for type_id in range(pruned.n_types):
        members = matrix[pruned.assignment == type_id]
        types.append(
            ShapeType(
                type_id=type_id,
                centroid=members.mean(axis=0),
                dispersion=members.std(axis=0),
                member_count=members.shape[0],
            )
        )
    labels = {
        inst.instance_id: int(pruned.assignment[k])
        for k, inst in enumerate(dataset.instances)
    }
    return ShapeTypeSet(dataset.category, types, labels)


def evaluate_separability(
    dataset: NgramDataset, labels: dict[int, int], seed: int = 0, folds: int = 5
) -> float:
    """Mean stratified k-fold CV accuracy of a decision tree predicting the
    type from the contour vector (pruned instances excluded)."""
    keep = [k for k, inst in enumerate(dataset.instances) if labels[inst.instance_id] != PRUNED]
    if not keep:
        raise ValidationError("no labeled instances to evaluate")
    x = dataset.matrix()[keep]
    y = np.array([labels[dataset.instances[k].instance_id] for k in keep])
    if np.unique(y).size < 2:
        raise ValidationError("separability needs at least 2 surviving types")
    tree = DecisionTreeClassifier(random_state=derive_seed(seed, "tree") % (2**32))
    cv = StratifiedKFold(n_splits=folds, shuffle=True,
                         random_state=derive_seed(seed, "folds") % (2**32))
    return float(cross_val_score(tree, x, y, cv=cv).mean())
