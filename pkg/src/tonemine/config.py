"""Pipeline configuration: one TOML file, explicit seed, stable fingerprint.

The fingerprint (sha256 of the resolved settings) goes into every output
file's metadata line together with the seed, so artifacts are traceable
to the run that produced them and reruns are byte-comparable.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .contour_net import DEFAULT_PHI
from .errors import ValidationError
from .predict import FEATURE_SETS

_TOP_LEVEL_KEYS = {"seed", "paths", "cluster", "predict", "features"}


@dataclass(eq=False)
class PipelineConfig:
    seed: int
    f0_path: str = "f0_tracks.jsonl"
    segmentation_path: str = "segmentation.tsv"
    annotations_path: str = "annotations.tsv"
    ns: tuple[int, ...] = (1, 2, 3)
    phi: dict[int, tuple[float, ...]] = field(
        default_factory=lambda: {n: tuple(v) for n, v in DEFAULT_PHI.items()}
    )
    min_category_size: int = 100
    prune_threshold: int = 10
    resolutions: tuple[float, ...] = (0.5, 0.75, 1.0, 1.5, 2.0)
    replicates: int = 1
    svm_cost: float = 1.0
    split_ratio: float = 0.9
    feature_sets: tuple[str, ...] = FEATURE_SETS
    min_count: int = 5
    pos_coarse_map_path: str | None = None
    phoneme_table_path: str | None = None

    def __post_init__(self) -> None:
        if not set(self.ns) <= {1, 2, 3}:
            raise ValidationError("ns must be a subset of {1, 2, 3}")
        unknown = set(self.feature_sets) - set(FEATURE_SETS)
        if unknown:
            raise ValidationError(f"unknown feature sets {sorted(unknown)}")
        for n in self.ns:
            if n not in self.phi or not self.phi[n]:
                raise ValidationError(f"no threshold candidates for n={n}")

    def fingerprint(self) -> str:
        payload = {
            "seed": self.seed,
            "paths": [self.f0_path, self.segmentation_path, self.annotations_path],
            "ns": list(self.ns),
            "phi": {str(k): list(v) for k, v in sorted(self.phi.items())},
            "min_category_size": self.min_category_size,
            "prune_threshold": self.prune_threshold,
            "resolutions": list(self.resolutions),
            "replicates": self.replicates,
            "svm_cost": self.svm_cost,
            "split_ratio": self.split_ratio,
            "feature_sets": list(self.feature_sets),
            "min_count": self.min_count,
            "pos_coarse_map": self.pos_coarse_map_path,
            "phoneme_table": self.phoneme_table_path,
        }
        blob = json.dumps(payload, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]

    def meta_line(self) -> str:
        return f"tonemine config={self.fingerprint()} seed={self.seed}"


def load_config(path: str | Path) -> PipelineConfig:
    """Parse the TOML config; the seed is mandatory (no wall-clock default)."""
    path = Path(path)
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ValidationError(f"{path}: {exc}") from exc
    unknown = set(raw) - _TOP_LEVEL_KEYS
    if unknown:
        raise ValidationError(f"{path}: unknown config sections {sorted(unknown)}")
    if "seed" not in raw:
        raise ValidationError(f"{path}: seed is mandatory")

    base = path.parent

    def resolve(p: str) -> str:
        q = Path(p)
        return str(q if q.is_absolute() else base / q)

    paths = raw.get("paths", {})
    cluster = raw.get("cluster", {})
    predict = raw.get("predict", {})
    features = raw.get("features", {})

    phi = {n: tuple(v) for n, v in DEFAULT_PHI.items()}
    for key, values in cluster.get("phi", {}).items():
        phi[int(key)] = tuple(float(v) for v in values)

    kwargs = dict(
        seed=int(raw["seed"]),
        ns=tuple(cluster.get("ns", (1, 2, 3))),
        phi=phi,
        min_category_size=int(cluster.get("min_category_size", 100)),
        prune_threshold=int(cluster.get("prune_threshold", 10)),
        resolutions=tuple(cluster.get("resolutions", (0.5, 0.75, 1.0, 1.5, 2.0))),
        replicates=int(cluster.get("replicates", 1)),
        svm_cost=float(predict.get("svm_cost", 1.0)),
        split_ratio=float(predict.get("split_ratio", 0.9)),
        feature_sets=tuple(predict.get("feature_sets", FEATURE_SETS)),
        min_count=int(predict.get("min_count", 5)),
    )
    if "f0" in paths:
        kwargs["f0_path"] = resolve(paths["f0"])
    if "segmentation" in paths:
        kwargs["segmentation_path"] = resolve(paths["segmentation"])
    if "annotations" in paths:
        kwargs["annotations_path"] = resolve(paths["annotations"])
    if "pos_coarse_map" in features:
        kwargs["pos_coarse_map_path"] = resolve(features["pos_coarse_map"])
    if "phoneme_table" in features:
        kwargs["phoneme_table_path"] = resolve(features["phoneme_table"])
    return PipelineConfig(**kwargs)
