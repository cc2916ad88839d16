"""Shape-type prediction from linguistic features.

Per category: balance classes by downsampling, split 90/10 stratified,
train a one-vs-rest hinge-loss linear SVM, and report held-out accuracy.
Feature sets mirror the ablation grid (data / dfp / no_syn / no_Ntone /
no_pitch / random / mle); `random` permutes labels while keeping the
class count, `mle` is the analytic 1/d chance baseline. Feature
importance is the class-summed |weight| per encoded column, re-aggregated
onto raw features and normalized per category.
"""
from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from sklearn.exceptions import ConvergenceWarning
from sklearn.svm import LinearSVC

from .errors import CategorySkipped, ValidationError
from .features import (
    FeatureMatrix,
    FeatureSchema,
    FeatureVector,
    domain_of,
    encode,
    extract_features,
)
from .ingest import Corpus
from .preprocess import NgramDataset
from .seeding import derive_rng, derive_seed

log = logging.getLogger(__name__)

FEATURE_SETS = ("data", "dfp", "no_syn", "no_Ntone", "no_pitch", "random", "mle")
MIN_CLASS_SIZE = 20
PITCH_FEATURES = ("start_pitch", "end_pitch")


@dataclass(frozen=True)
class ExperimentConfig:
    feature_set: str
    split_ratio: float = 0.9
    seed: int = 0
    svm_cost: float = 1.0

    def __post_init__(self) -> None:
        if self.feature_set not in FEATURE_SETS:
            raise ValidationError(f"unknown feature set {self.feature_set!r}")
        if not 0.0 < self.split_ratio < 1.0:
            raise ValidationError("split_ratio must be in (0, 1)")
        if self.svm_cost <= 0:
            raise ValidationError("svm_cost must be positive")


@dataclass(eq=False)
class LinearModel:
    """Per-class weight vectors; prediction is the argmax class score."""

    classes: np.ndarray
    weights: np.ndarray  # (n_classes, n_columns)
    biases: np.ndarray

    def scores(self, x: np.ndarray) -> np.ndarray:
        return x @ self.weights.T + self.biases

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.classes[self.scores(x).argmax(axis=1)]


@dataclass(eq=False)
class CategoryResult:
    category: tuple[int, ...]
    n: int
    feature_set: str
    test_accuracy: float
    d: int
    importance: dict[str, float] = field(default_factory=dict)


def balance_classes(labels: np.ndarray, seed: int = 0) -> np.ndarray:
    """Indices of a class-balanced subsample (majority classes downsampled).

    Raises CategorySkipped when the minority class is under MIN_CLASS_SIZE.
    """
    labels = np.asarray(labels)
    classes, counts = np.unique(labels, return_counts=True)
    if classes.size < 2:
        raise CategorySkipped("need at least 2 classes to balance")
    floor = int(counts.min())
    if floor < MIN_CLASS_SIZE:
        raise CategorySkipped(
            f"minority class has {floor} instances (< {MIN_CLASS_SIZE})"
        )
    rng = derive_rng(seed, "balance")
    kept = []
    for c in classes:
        members = np.flatnonzero(labels == c)
        kept.append(rng.permutation(members)[:floor])
    return np.sort(np.concatenate(kept))


def stratified_split(
    labels: np.ndarray, train_ratio: float, seed: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Per-class shuffled split; every class keeps at least one row on
    each side."""
    rng = derive_rng(seed, "split")
    train_parts, test_parts = [], []
    for c in np.unique(labels):
        members = rng.permutation(np.flatnonzero(labels == c))
        n_test = int(round(len(members) * (1.0 - train_ratio)))
        n_test = min(max(n_test, 1), len(members) - 1)
        test_parts.append(members[:n_test])
        train_parts.append(members[n_test:])
    return np.sort(np.concatenate(train_parts)), np.sort(np.concatenate(test_parts))


def train_linear_svm(
    x: np.ndarray, y: np.ndarray, config: ExperimentConfig
) -> LinearModel:
    """One-vs-rest hinge-loss linear SVM with L2 regularization.

    Backed by liblinear (tol 1e-4, 1000 iterations max, seeded), which is
    exactly the stated training regime; for two classes the single
    decision vector is mirrored so per-class weights always exist.
    """
    if not np.isfinite(x).all():
        raise ValidationError("non-finite feature values")
    svc = LinearSVC(
        loss="hinge",
        C=config.svm_cost,
        tol=1e-4,
        max_iter=1000,
        random_state=derive_seed(config.seed, "svm") % (2**32),
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        svc.fit(x, y)
    if svc.classes_.size == 2:
        w = np.vstack([-svc.coef_[0], svc.coef_[0]])
        b = np.array([-svc.intercept_[0], svc.intercept_[0]])
    else:
        w = svc.coef_.copy()
        b = svc.intercept_.copy()
    return LinearModel(svc.classes_.copy(), w, b)


def feature_importance(model: LinearModel, matrix: FeatureMatrix) -> dict[str, float]:
    """Class-summed |weights| folded onto raw features, normalized to sum 1."""
    col_imp = np.abs(model.weights).sum(axis=0)
    per_feature: dict[str, float] = {}
    for parent, imp in zip(matrix.parents, col_imp):
        per_feature[parent] = per_feature.get(parent, 0.0) + float(imp)
    total = sum(per_feature.values())
    if total > 0:
        per_feature = {k: v / total for k, v in per_feature.items()}
    return per_feature


def _columns_for_set(matrix: FeatureMatrix, feature_set: str) -> np.ndarray:
    parents = np.array(matrix.parents)
    if feature_set in ("data", "random"):
        return np.arange(len(matrix.parents))
    if feature_set == "dfp":
        return np.flatnonzero(np.isin(parents, PITCH_FEATURES))
    if feature_set == "no_syn":
        drop = np.char.startswith(parents, "pos_tag_") | np.char.startswith(
            parents, "dep_func_"
        )
        return np.flatnonzero(~drop)
    if feature_set == "no_Ntone":
        return np.flatnonzero(~np.isin(parents, ("prev_tone", "next_tone")))
    if feature_set == "no_pitch":
        return np.flatnonzero(~np.isin(parents, PITCH_FEATURES))
    raise ValidationError(f"unknown feature set {feature_set!r}")


def run_experiment(
    dataset: NgramDataset,
    labels: Mapping[int, int],
    corpus: Corpus,
    schema: FeatureSchema,
    config: ExperimentConfig,
    vectors: Sequence[FeatureVector] | None = None,
) -> CategoryResult:
    """Train and score one (category, feature_set) cell.

    labels maps instance_id to a surviving type id (negative = pruned,
    excluded here). Pass pre-extracted `vectors` (aligned with
    dataset.instances) to skip re-extraction across feature sets.
    """
    n = len(dataset.category)
    labeled = [
        (k, labels[inst.instance_id])
        for k, inst in enumerate(dataset.instances)
        if labels.get(inst.instance_id, -1) >= 0
    ]
    if not labeled:
        raise CategorySkipped("no labeled instances")
    idx = np.array([k for k, _ in labeled])
    y_all = np.array([t for _, t in labeled])
    d = int(np.unique(y_all).size)

    if config.feature_set == "mle":
        return CategoryResult(dataset.category, n, "mle", 1.0 / d, d)

    seed = derive_seed(config.seed, "category", dataset.category, config.feature_set)
    balanced = balance_classes(y_all, seed=seed)
    idx = idx[balanced]
    y = y_all[balanced]
    if config.feature_set == "random":
        y = derive_rng(seed, "permute").permutation(y)

    train_idx, test_idx = stratified_split(y, config.split_ratio, seed=seed)
    if np.intersect1d(train_idx, test_idx).size:
        raise AssertionError("train/test overlap")

    if vectors is None:
        chosen = [
            extract_features(dataset.instances[k], corpus, schema) for k in idx
        ]
    else:
        chosen = [vectors[k] for k in idx]
    matrix = encode(chosen, schema, train_idx=train_idx)
    cols = _columns_for_set(matrix, config.feature_set)
    x = matrix.x[:, cols]

    model = train_linear_svm(x[train_idx], y[train_idx], config)
    accuracy = float((model.predict(x[test_idx]) == y[test_idx]).mean())

    sub = FeatureMatrix(
        x,
        tuple(matrix.column_names[c] for c in cols),
        tuple(matrix.parents[c] for c in cols),
        matrix.instance_ids,
    )
    importance = feature_importance(model, sub)
    return CategoryResult(dataset.category, n, config.feature_set, accuracy, d, importance)


# --- aggregation and serialization -----------------------------------------


def five_number(values: Sequence[float]) -> dict[str, float]:
    arr = np.asarray(values, dtype=np.float64)
    q = np.percentile(arr, [0, 25, 50, 75, 100])
    return {"min": q[0], "q1": q[1], "median": q[2], "q3": q[3], "max": q[4]}


@dataclass(eq=False)
class ReportBundle:
    accuracy: dict[int, dict[str, dict[str, float]]]
    importance_domains: dict[int, dict[str, dict[str, float]]]
    deltas: dict[int, dict[str, float]]


def aggregate_report(results: Iterable[CategoryResult]) -> ReportBundle:
    """Five-number accuracy summaries per (n, feature_set), per-domain
    importance roll-ups, and per-category no_syn - dfp deltas."""
    acc: dict[int, dict[str, list[float]]] = {}
    dom: dict[int, dict[str, list[float]]] = {}
    by_cat: dict[tuple[int, tuple[int, ...]], dict[str, float]] = {}
    for r in results:
        acc.setdefault(r.n, {}).setdefault(r.feature_set, []).append(r.test_accuracy)
        by_cat.setdefault((r.n, r.category), {})[r.feature_set] = r.test_accuracy
        if r.feature_set == "data" and r.importance:
            sums: dict[str, float] = {}
            for feature, imp in r.importance.items():
                key = domain_of(feature)
                sums[key] = sums.get(key, 0.0) + imp
            for domain, total in sums.items():
                dom.setdefault(r.n, {}).setdefault(domain, []).append(total)

    accuracy = {
        n: {fs: five_number(v) for fs, v in sorted(sets.items())}
        for n, sets in sorted(acc.items())
    }
    importance_domains = {
        n: {d: five_number(v) for d, v in sorted(domains.items())}
        for n, domains in sorted(dom.items())
    }
    deltas: dict[int, dict[str, float]] = {}
    for (n, category), cells in sorted(by_cat.items()):
        if "no_syn" in cells and "dfp" in cells:
            deltas.setdefault(n, {})[category_label(category)] = (
                cells["no_syn"] - cells["dfp"]
            )
    return ReportBundle(accuracy, importance_domains, deltas)


def category_label(category: tuple[int, ...]) -> str:
    return "-".join(str(t) for t in category)


def parse_category_label(label: str) -> tuple[int, ...]:
    return tuple(int(t) for t in label.split("-"))


def write_results_csv(
    results: Sequence[CategoryResult], path: str | Path, meta: str | None = None
) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if meta:
            fh.write(f"# {meta}\n")
        writer = csv.writer(fh)
        writer.writerow(["n", "category", "feature_set", "d", "test_accuracy"])
        for r in results:
            writer.writerow(
                [r.n, category_label(r.category), r.feature_set, r.d, repr(r.test_accuracy)]
            )


def write_importance_csv(
    results: Sequence[CategoryResult], path: str | Path, meta: str | None = None
) -> None:
    """Importance rows for the full-feature (`data`) models only."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if meta:
            fh.write(f"# {meta}\n")
        writer = csv.writer(fh)
        writer.writerow(["n", "category", "feature", "importance"])
        for r in results:
            if r.feature_set != "data":
                continue
            for feature in sorted(r.importance):
                writer.writerow(
                    [r.n, category_label(r.category), feature, repr(r.importance[feature])]
                )


def write_deltas_csv(
    results: Sequence[CategoryResult], path: str | Path, meta: str | None = None
) -> None:
    bundle = aggregate_report(results)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if meta:
            fh.write(f"# {meta}\n")
        writer = csv.writer(fh)
        writer.writerow(["n", "category", "delta_nosyn_dfp"])
        for n, rows in sorted(bundle.deltas.items()):
            for label, delta in sorted(rows.items()):
                writer.writerow([n, label, repr(delta)])
