"""Shared test oracles and corpus builders.

The oracles here deliberately reimplement graph quantities by brute force
(triple enumeration, set-partition enumeration, direct formula evaluation)
so the fast implementations are checked against independent code paths.
"""
from __future__ import annotations

from itertools import combinations

import numpy as np

from tonemine.contour_net import ContourGraph
from tonemine.ingest import assemble_corpus
from tonemine.preprocess import build_ngram_datasets, clean_corpus
from tonemine.synth import CouplingRule, SpeakerSpec, SynthSpec, ToneTarget, generate_corpus


def oracle_triangle_counts(n: int, edges: np.ndarray) -> np.ndarray:
    """Per-node triangle counts by enumerating every node triple."""
    eset = {(int(u), int(v)) for u, v in edges} | {(int(v), int(u)) for u, v in edges}
    tri = np.zeros(n, dtype=np.int64)
    for a, b, c in combinations(range(n), 3):
        if (a, b) in eset and (b, c) in eset and (a, c) in eset:
            tri[a] += 1
            tri[b] += 1
            tri[c] += 1
    return tri


def oracle_avg_cc(n: int, edges: np.ndarray) -> float:
    tri = oracle_triangle_counts(n, edges)
    deg = np.zeros(n, dtype=np.int64)
    for u, v in edges:
        deg[u] += 1
        deg[v] += 1
    total = 0.0
    for i in range(n):
        if deg[i] >= 2:
            total += 2.0 * tri[i] / (deg[i] * (deg[i] - 1))
    return total / n if n else 0.0


def oracle_modularity(n: int, edges: np.ndarray, assignment) -> float:
    """Direct Q = sum_c [e_c/m - (d_c/2m)^2], written independently."""
    m = len(edges)
    if m == 0:
        return 0.0
    comms = sorted(set(int(c) for c in assignment))
    q = 0.0
    for c in comms:
        members = {i for i in range(n) if assignment[i] == c}
        e_c = sum(1 for u, v in edges if u in members and v in members)
        d_c = sum(1 for u, v in edges for x in (u, v) if x in members)
        q += e_c / m - (d_c / (2.0 * m)) ** 2
    return q


def set_partitions(items: list[int]):
    """All set partitions of `items` (Bell-number many)."""
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        for k in range(len(part)):
            yield part[:k] + [part[k] + [first]] + part[k + 1 :]
        yield part + [[first]]


def best_partition_modularity(n: int, edges: np.ndarray) -> float:
    best = -np.inf
    for part in set_partitions(list(range(n))):
        assignment = np.zeros(n, dtype=np.int64)
        for cid, block in enumerate(part):
            for node in block:
                assignment[node] = cid
        best = max(best, oracle_modularity(n, edges, assignment))
    return best


def random_graph(n: int, p: float, rng: np.random.Generator) -> ContourGraph:
    pairs = np.array(list(combinations(range(n), 2)), dtype=np.int64)
    keep = rng.random(len(pairs)) < p
    return ContourGraph(n, pairs[keep], threshold=1.0)


def complete_graph(n: int) -> ContourGraph:
    pairs = np.array(list(combinations(range(n), 2)), dtype=np.int64)
    return ContourGraph(n, pairs, threshold=1.0)


def graph_from_edges(n: int, edge_list) -> ContourGraph:
    edges = np.array(sorted(tuple(sorted(e)) for e in edge_list), dtype=np.int64)
    edges = edges.reshape(-1, 2)
    return ContourGraph(n, edges, threshold=1.0)


# --- synthetic corpora -------------------------------------------------------

EQUAL_EXIT_TARGETS = {
    0: ToneTarget(0.0, 0.0),
    1: ToneTarget(0.5, -0.5),
    2: ToneTarget(-0.5, 0.5),
    3: ToneTarget(-0.25, 0.25),
    4: ToneTarget(0.25, -0.25),
}

THREE_SPEAKERS = (
    SpeakerSpec("s0", 5.0, 0.18),
    SpeakerSpec("s1", 5.3, 0.22),
    SpeakerSpec("s2", 4.8, 0.20),
)


def make_coupled_spec(utterances: int = 120, seed: int = 11, **overrides) -> SynthSpec:
    """Corpus with four planted clusters per unigram category, driven by
    entity (+1.5) and singleton (+3.0) intercept shifts."""
    kwargs = dict(
        speakers=THREE_SPEAKERS,
        utterances=utterances,
        syllables_per_utterance=(8, 12),
        tone_distribution=(0.0, 0.25, 0.25, 0.25, 0.25),
        targets=EQUAL_EXIT_TARGETS,
        approach_rate=12.0,
        noise_std=0.1,
        coupling=(
            CouplingRule("is_entity", intercept_delta=1.5),
            CouplingRule("is_singleton", intercept_delta=3.0),
        ),
        coupling_scope="utterance",
        profile_balance=True,
        initial_pitch_std=0.1,
        seed=seed,
    )
    kwargs.update(overrides)
    return SynthSpec(**kwargs)


class CorpusBundle:
    """Generated corpus plus everything the pipeline derives from it."""

    def __init__(self, spec: SynthSpec, min_category_size: int = 50, n: int = 1):
        self.spec = spec
        self.result = generate_corpus(spec)
        self.corpus = assemble_corpus(
            self.result.tracks, self.result.syllables, self.result.annotations
        )
        self.cleaned = clean_corpus(self.corpus)
        self.datasets = build_ngram_datasets(self.corpus, self.cleaned, n, min_category_size)
        self.ground_truth = dict(self.result.ground_truth)

    def planted_of(self, instance, n: int = 1) -> str:
        utt, first = instance.source
        return self.ground_truth[f"{utt}:{first}:{n}"]
