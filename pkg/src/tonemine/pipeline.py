"""Stage orchestration behind the CLI subcommands.

Every stage writes its artifacts under one output directory with fixed
names, each carrying the config fingerprint + seed, and is a pure
function of (inputs, config): rerunning with the same inputs and seed
reproduces the files byte for byte. Category work parallelizes across a
process pool when jobs > 1; results are merged in category order, so the
outputs do not depend on scheduling.
"""
from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Callable, Iterable, Sequence

from . import community, contour_net, features, predict, preprocess
from .config import PipelineConfig
from .errors import CategorySkipped, PipelineError, ValidationError
from .ingest import Corpus, load_corpus
from .predict import CategoryResult, ExperimentConfig, category_label, parse_category_label
from .seeding import derive_seed

log = logging.getLogger(__name__)

CLUSTER_FILES = {
    "datasets": "datasets_n{n}.jsonl",
    "labels": "labels_n{n}.csv",
    "diagnostics": "threshold_diagnostics_n{n}.csv",
    "shape_types": "shape_types_n{n}.json",
    "histogram": "type_histogram.csv",
}
PREDICT_FILES = {
    "results": "results.csv",
    "importance": "importance.csv",
    "deltas": "deltas.csv",
}
REPORT_FILE = "summary.json"

_worker_payload: dict = {}


def _pool_init(payload: dict) -> None:
    global _worker_payload
    _worker_payload = payload


def _map_in_order(fn: Callable, tasks: Sequence, jobs: int, payload: dict):
    """Run tasks sequentially or in a pool; results come back in task order."""
    if jobs <= 1:
        _pool_init(payload)
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs, initializer=_pool_init,
                             initargs=(payload,)) as pool:
        return list(pool.map(fn, tasks))


# --- cluster stage ----------------------------------------------------------


def _cluster_one(task: tuple[int, tuple[int, ...]]):
    n, category = task
    cfg: PipelineConfig = _worker_payload["cfg"]
    dataset = _worker_payload["datasets"][n][category]
    try:
        table = contour_net.pairwise_distances(dataset)
        phi, diags = contour_net.select_threshold(
            table,
            cfg.phi[n],
            seed=derive_seed(cfg.seed, "threshold", n, category),
            replicates=cfg.replicates,
        )
        graph = contour_net.threshold_graph(table, phi)
        partition, _ = community.tune_and_partition(
            graph,
            seed=derive_seed(cfg.seed, "community", n, category),
            resolutions=cfg.resolutions,
            prune_threshold=cfg.prune_threshold,
        )
        pruned = community.prune_small(partition, cfg.prune_threshold)
        types = community.shape_types(dataset, pruned)
    except PipelineError as exc:
        return exc
    return phi, diags, types


def run_cluster(cfg: PipelineConfig, out_dir: str | Path, jobs: int = 1) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    corpus = load_corpus(cfg.f0_path, cfg.segmentation_path, cfg.annotations_path)
    if not corpus.tracks:
        raise ValidationError("corpus is empty after assembly")
    cleaned = preprocess.clean_corpus(corpus)
    meta = cfg.meta_line()
    histogram_rows: list[tuple[int, str, int]] = []
    summary: dict = {"categories": {}}

    for n in cfg.ns:
        datasets = preprocess.build_ngram_datasets(
            corpus, cleaned, n, cfg.min_category_size
        )
        if not datasets:
            log.warning("no categories of order %d meet the size floor", n)
            continue
        preprocess.save_datasets(datasets, n, out / CLUSTER_FILES["datasets"].format(n=n))

        categories = sorted(datasets)
        payload = {"cfg": cfg, "datasets": {n: datasets}}
        outcomes = _map_in_order(_cluster_one, [(n, c) for c in categories], jobs, payload)

        diag_rows = []
        label_rows = []
        type_payload = []
        for category, outcome in zip(categories, outcomes):
            if isinstance(outcome, PipelineError):
                log.warning("category %s skipped: %s", category, outcome)
                continue
            phi, diags, types = outcome
            label = category_label(category)
            diag_rows.extend((label, d) for d in diags)
            for instance_id in sorted(types.labels):
                label_rows.append((instance_id, types.labels[instance_id]))
            type_payload.append(
                {
                    "category": list(category),
                    "threshold": phi,
                    "types": [
                        {
                            "type_id": t.type_id,
                            "member_count": t.member_count,
                            "centroid": [float(v) for v in t.centroid],
                            "dispersion": [float(v) for v in t.dispersion],
                        }
                        for t in types.types
                    ],
                }
            )
            histogram_rows.append((n, label, len(types.types)))
            summary["categories"][f"{n}:{label}"] = len(types.types)

        contour_net.write_diagnostics_csv(
            diag_rows, out / CLUSTER_FILES["diagnostics"].format(n=n), meta=meta
        )
        with open(out / CLUSTER_FILES["labels"].format(n=n), "w", newline="") as fh:
            fh.write(f"# {meta}\n")
            writer = csv.writer(fh)
            writer.writerow(["instance_id", "type_id"])
            writer.writerows(label_rows)
        with open(out / CLUSTER_FILES["shape_types"].format(n=n), "w") as fh:
            json.dump({"meta": meta, "categories": type_payload}, fh, indent=1)
            fh.write("\n")

    with open(out / CLUSTER_FILES["histogram"], "w", newline="") as fh:
        fh.write(f"# {meta}\n")
        writer = csv.writer(fh)
        writer.writerow(["n", "category", "type_count"])
        writer.writerows(histogram_rows)
    return summary


# --- predict stage ----------------------------------------------------------


def load_labels(path: str | Path) -> dict[int, int]:
    labels = {}
    with open(path, encoding="utf-8") as fh:
        for row in csv.reader(_strip_comments(fh)):
            if row[0] == "instance_id":
                continue
            labels[int(row[0])] = int(row[1])
    return labels


def _strip_comments(lines: Iterable[str]) -> Iterable[str]:
    return (ln for ln in lines if not ln.startswith("#"))


def _predict_one(task: tuple[int, tuple[int, ...]]):
    n, category = task
    cfg: PipelineConfig = _worker_payload["cfg"]
    corpus: Corpus = _worker_payload["corpus"]
    schema = _worker_payload["schemas"][n]
    dataset = _worker_payload["datasets"][n][category]
    labels = _worker_payload["labels"][n]
    vectors = [features.extract_features(inst, corpus, schema) for inst in dataset.instances]
    results = []
    for feature_set in cfg.feature_sets:
        exp = ExperimentConfig(
            feature_set=feature_set,
            split_ratio=cfg.split_ratio,
            seed=cfg.seed,
            svm_cost=cfg.svm_cost,
        )
        try:
            results.append(
                predict.run_experiment(dataset, labels, corpus, schema, exp, vectors)
            )
        except CategorySkipped as exc:
            log.warning("category %s / %s skipped: %s", category, feature_set, exc)
    return results


def run_predict(cfg: PipelineConfig, out_dir: str | Path, jobs: int = 1) -> list[CategoryResult]:
    out = Path(out_dir)
    corpus = load_corpus(cfg.f0_path, cfg.segmentation_path, cfg.annotations_path)
    pos_map = features.load_pos_coarse_map(cfg.pos_coarse_map_path)
    phonemes = features.load_phoneme_attributes(cfg.phoneme_table_path)

    all_results: list[CategoryResult] = []
    tasks: list[tuple[int, tuple[int, ...]]] = []
    payload: dict = {"cfg": cfg, "corpus": corpus, "schemas": {}, "datasets": {}, "labels": {}}
    for n in cfg.ns:
        datasets_path = out / CLUSTER_FILES["datasets"].format(n=n)
        labels_path = out / CLUSTER_FILES["labels"].format(n=n)
        if not datasets_path.exists() or not labels_path.exists():
            raise ValidationError(
                f"missing cluster outputs for n={n} under {out} (run `cluster` first)"
            )
        payload["datasets"][n] = preprocess.load_datasets(datasets_path)
        payload["labels"][n] = load_labels(labels_path)
        payload["schemas"][n] = features.build_schema(
            corpus, n, cfg.min_count, coarse_map=pos_map, phoneme_attrs=phonemes
        )
        tasks.extend((n, category) for category in sorted(payload["datasets"][n]))

    for results in _map_in_order(_predict_one, tasks, jobs, payload):
        all_results.extend(results)

    meta = cfg.meta_line()
    predict.write_results_csv(all_results, out / PREDICT_FILES["results"], meta=meta)
    predict.write_importance_csv(all_results, out / PREDICT_FILES["importance"], meta=meta)
    predict.write_deltas_csv(all_results, out / PREDICT_FILES["deltas"], meta=meta)
    return all_results


# --- report stage -----------------------------------------------------------


def load_results_csv(path: str | Path) -> list[CategoryResult]:
    results = []
    with open(path, encoding="utf-8") as fh:
        for row in csv.reader(_strip_comments(fh)):
            if row[0] == "n":
                continue
            results.append(
                CategoryResult(
                    category=parse_category_label(row[1]),
                    n=int(row[0]),
                    feature_set=row[2],
                    test_accuracy=float(row[4]),
                    d=int(row[3]),
                )
            )
    return results


def _attach_importance(results: list[CategoryResult], path: Path) -> None:
    if not path.exists():
        return
    with open(path, encoding="utf-8") as fh:
        rows = [r for r in csv.reader(_strip_comments(fh)) if r and r[0] != "n"]
    by_key = {(r.n, r.category, r.feature_set): r for r in results}
    for n_s, label, feature, imp in rows:
        key = (int(n_s), parse_category_label(label), "data")
        if key in by_key:
            by_key[key].importance[feature] = float(imp)


def run_report(cfg: PipelineConfig, out_dir: str | Path) -> dict:
    out = Path(out_dir)
    results_path = out / PREDICT_FILES["results"]
    if not results_path.exists():
        raise ValidationError(f"missing {results_path} (run `predict` first)")
    results = load_results_csv(results_path)
    if not results:
        raise ValidationError(f"{results_path} holds no results")
    _attach_importance(results, out / PREDICT_FILES["importance"])
    bundle = predict.aggregate_report(results)
    payload = {
        "meta": cfg.meta_line(),
        "accuracy": {str(n): v for n, v in bundle.accuracy.items()},
        "importance_domains": {str(n): v for n, v in bundle.importance_domains.items()},
        "delta_nosyn_dfp": {str(n): v for n, v in bundle.deltas.items()},
    }
    with open(out / REPORT_FILE, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return payload
