"""Synthetic corpus generator with planted contour clusters.

Surface pitch follows a first-order target-approximation process: within
each unit-duration syllable, f(u) = T(u) + (f_entry - T(0)) * exp(-lambda*u)
with a linear per-tone target T(u) = intercept + slope*u, the entry value
chained from the previous syllable so pitch never teleports. Coupling
rules perturb the targets of syllables whose generated annotations carry a
chosen boolean feature (entity, singleton, word boundary), which plants a
discrete, learnable cluster structure; the set of rules active on a
syllable is its ground-truth profile.

Output is exactly the three ingest formats plus ground_truth.csv
(instance_key,cluster_id) with instance_key = "utt:first_syllable:n".
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .ingest import (
    F0Track,
    SyllableRecord,
    TokenAnnotation,
    write_annotations,
    write_f0_tracks,
    write_segmentation,
)
from .seeding import derive_rng

COUPLING_FEATURES = ("is_entity", "is_singleton", "word_initial", "word_final")

# unit-duration syllables mapped to seconds on output
SYLLABLE_SECONDS = 0.2

_DEFAULT_INVENTORY = (
    ("m", "a"), ("m", "a", "n"), ("b", "a"), ("d", "a"), ("t", "i"),
    ("x", "i"), ("h", "ao"), ("l", "i", "ng"), ("w", "o"), ("sh", "u"),
    ("g", "uo"), ("f", "ei"), ("n", "v"), ("zh", "e"), ("k", "ai"),
)

_DEFAULT_POS = ("NN", "VV", "AD", "NR", "P", "JJ")
_DEFAULT_DEP = ("nsubj", "dobj", "advmod", "advmod:loc", "root", "nmod")


@dataclass(frozen=True)
class SpeakerSpec:
    speaker_id: str
    mean_log_f0: float
    std_log_f0: float


@dataclass(frozen=True)
class ToneTarget:
    intercept: float
    slope: float


@dataclass(frozen=True)
class CouplingRule:
    """Perturb the pitch target of syllables where `feature` is true."""

    feature: str
    intercept_delta: float = 0.0
    slope_delta: float = 0.0

    def __post_init__(self) -> None:
        if self.feature not in COUPLING_FEATURES:
            raise ValidationError(f"unknown coupling feature {self.feature!r}")


@dataclass(eq=False)
class SynthSpec:
    speakers: tuple[SpeakerSpec, ...]
    utterances: int
    syllables_per_utterance: tuple[int, int]
    tone_distribution: tuple[float, float, float, float, float]
    targets: dict[int, ToneTarget]
    approach_rate: float
    noise_std: float
    coupling: tuple[CouplingRule, ...]
    seed: int
    samples_per_syllable: int = 20
    token_length_range: tuple[int, int] = (1, 2)
    entity_prob: float = 0.5
    singleton_prob: float = 0.5
    coupling_scope: str = "token"  # or "utterance": flags shared per utterance
    profile_balance: bool = False  # cycle flag combos evenly per speaker
    initial_pitch_std: float = 0.5
    pos_tags: tuple[str, ...] = _DEFAULT_POS
    dep_tags: tuple[str, ...] = _DEFAULT_DEP
    syllable_inventory: tuple[tuple[str, ...], ...] = _DEFAULT_INVENTORY
    ground_truth_ns: tuple[int, ...] = (1,)

    def __post_init__(self) -> None:
        if abs(sum(self.tone_distribution) - 1.0) > 1e-9:
            raise ValidationError("tone_distribution must sum to 1")
        if self.approach_rate <= 0:
            raise ValidationError("approach_rate must be positive")
        if self.noise_std < 0:
            raise ValidationError("noise_std must be non-negative")
        if self.coupling_scope not in ("token", "utterance"):
            raise ValidationError("coupling_scope must be 'token' or 'utterance'")
        if self.profile_balance and self.coupling_scope != "utterance":
            raise ValidationError("profile_balance requires coupling_scope='utterance'")
        if set(self.targets) != {0, 1, 2, 3, 4}:
            raise ValidationError("targets must cover tones 0..4")
        if not self.speakers:
            raise ValidationError("need at least one speaker")

    @classmethod
    def from_json(cls, path: str | Path) -> "SynthSpec":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        try:
            return cls.from_dict(raw)
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"{path}: bad synth spec ({exc})") from exc

    @classmethod
    def from_dict(cls, raw: dict) -> "SynthSpec":
        kwargs = dict(raw)
        kwargs["speakers"] = tuple(SpeakerSpec(**s) for s in raw["speakers"])
        kwargs["syllables_per_utterance"] = tuple(raw["syllables_per_utterance"])
        kwargs["tone_distribution"] = tuple(raw["tone_distribution"])
        kwargs["targets"] = {int(k): ToneTarget(**v) for k, v in raw["targets"].items()}
        kwargs["coupling"] = tuple(CouplingRule(**c) for c in raw.get("coupling", ()))
        for key in ("token_length_range", "pos_tags", "dep_tags", "ground_truth_ns"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        if "syllable_inventory" in kwargs:
            kwargs["syllable_inventory"] = tuple(tuple(s) for s in raw["syllable_inventory"])
        return cls(**kwargs)


@dataclass(frozen=True)
class _Token:
    first: int
    last: int
    pos: str
    dep: str
    entity: bool
    singleton: bool


@dataclass(eq=False)
class SynthResult:
    tracks: list[F0Track]
    syllables: list[SyllableRecord]
    annotations: list[TokenAnnotation]
    ground_truth: list[tuple[str, str]]  # (instance_key, cluster_id)


def syllable_backbone(
    target: ToneTarget, entry: float, rate: float, offsets: np.ndarray
) -> tuple[np.ndarray, float]:
    """Noiseless contour at `offsets` within a unit syllable, plus its exit
    value at u=1 (the next syllable's entry)."""
    t = target.intercept + target.slope * offsets
    values = t + (entry - target.intercept) * np.exp(-rate * offsets)
    exit_value = target.intercept + target.slope + (entry - target.intercept) * math.exp(-rate)
    return values, exit_value


def generate_contour(
    tones: tuple[int, ...],
    start_pitch: float,
    spec: SynthSpec,
    rng: np.random.Generator | None = None,
    perturbations: tuple[tuple[float, float], ...] | None = None,
) -> np.ndarray:
    """Chained target-approximation contour over a tone sequence.

    Samples at u = j/samples_per_syllable within each unit syllable plus a
    final sample at the end of the last syllable. `perturbations` adds
    per-syllable (intercept, slope) deltas; noise requires an rng.
    """
    sps = spec.samples_per_syllable
    offsets = np.arange(sps) / sps
    entry = start_pitch
    chunks = []
    exit_value = entry
    for k, tone in enumerate(tones):
        base = spec.targets[tone]
        if perturbations is not None:
            di, ds = perturbations[k]
            base = ToneTarget(base.intercept + di, base.slope + ds)
        values, exit_value = syllable_backbone(base, entry, spec.approach_rate, offsets)
        chunks.append(values)
        entry = exit_value
    contour = np.concatenate(chunks + [np.array([exit_value])])
    if spec.noise_std > 0 and rng is not None:
        contour = contour + rng.normal(0.0, spec.noise_std, size=contour.shape)
    return contour


def _draw_tokens(
    spec: SynthSpec,
    n_syl: int,
    rng: np.random.Generator,
    forced_flags: tuple[bool, bool] | None = None,
) -> list[_Token]:
    lo, hi = spec.token_length_range
    if forced_flags is not None:
        utt_entity, utt_singleton = forced_flags
    else:
        utt_entity = bool(rng.random() < spec.entity_prob)
        utt_singleton = bool(rng.random() < spec.singleton_prob)
    tokens = []
    first = 0
    while first < n_syl:
        length = int(rng.integers(lo, hi + 1))
        last = min(first + length - 1, n_syl - 1)
        if spec.coupling_scope == "utterance":
            entity, singleton = utt_entity, utt_singleton
        else:
            entity = bool(rng.random() < spec.entity_prob)
            singleton = bool(rng.random() < spec.singleton_prob)
        tokens.append(
            _Token(
                first,
                last,
                str(rng.choice(spec.pos_tags)),
                str(rng.choice(spec.dep_tags)),
                entity,
                singleton,
            )
        )
        first = last + 1
    return tokens


def _syllable_features(tok: _Token, idx: int) -> dict[str, bool]:
    return {
        "is_entity": tok.entity,
        "is_singleton": tok.singleton,
        "word_initial": idx == tok.first,
        "word_final": idx == tok.last,
    }


def generate_corpus(spec: SynthSpec) -> SynthResult:
    """Generate tracks, segmentation, annotations, and planted ground truth."""
    tracks: list[F0Track] = []
    syllables: list[SyllableRecord] = []
    annotations: list[TokenAnnotation] = []
    ground_truth: list[tuple[str, str]] = []
    lo, hi = spec.syllables_per_utterance
    tone_p = np.asarray(spec.tone_distribution)

    for u in range(spec.utterances):
        rng = derive_rng(spec.seed, "utterance", u)
        utt = f"u{u:05d}"
        if spec.profile_balance:
            speaker = spec.speakers[u % len(spec.speakers)]
            combo = (u // len(spec.speakers)) % 4
            forced = (bool(combo & 1), bool(combo & 2))
        else:
            speaker = spec.speakers[int(rng.integers(0, len(spec.speakers)))]
            forced = None
        n_syl = int(rng.integers(lo, hi + 1))
        tones = tuple(int(t) for t in rng.choice(5, size=n_syl, p=tone_p))
        tokens = _draw_tokens(spec, n_syl, rng, forced)

        tok_of: list[_Token] = [None] * n_syl  # type: ignore[list-item]
        for tok in tokens:
            for k in range(tok.first, tok.last + 1):
                tok_of[k] = tok

        perturbations = []
        profiles = []
        for k in range(n_syl):
            feats = _syllable_features(tok_of[k], k)
            di = ds = 0.0
            active = []
            for r, rule in enumerate(spec.coupling):
                if feats[rule.feature]:
                    di += rule.intercept_delta
                    ds += rule.slope_delta
                    active.append(r)
            perturbations.append((di, ds))
            profiles.append("p" + "".join(str(r) for r in active) if active else "p")

        # start on the first syllable's (perturbed) target so there is no
        # utterance-initial approach transient, plus controlled jitter
        first_target = spec.targets[tones[0]].intercept + perturbations[0][0]
        start_pitch = float(first_target + rng.normal(0.0, spec.initial_pitch_std))
        z = generate_contour(tones, start_pitch, spec, rng, tuple(perturbations))
        hz = np.exp(speaker.mean_log_f0 + speaker.std_log_f0 * z)
        step = SYLLABLE_SECONDS / spec.samples_per_syllable
        times = np.arange(z.shape[0]) * step
        tracks.append(F0Track(utt, speaker.speaker_id, step, times, hz))

        for k in range(n_syl):
            phonemes = spec.syllable_inventory[
                int(rng.integers(0, len(spec.syllable_inventory)))
            ]
            syllables.append(
                SyllableRecord(
                    utt, k, tones[k],
                    start=k * SYLLABLE_SECONDS,
                    end=(k + 1) * SYLLABLE_SECONDS,
                    phonemes=phonemes,
                    word_initial=k == tok_of[k].first,
                    word_final=k == tok_of[k].last,
                )
            )
        annotations.extend(
            TokenAnnotation(utt, t.first, t.last, t.pos, t.dep, t.entity, t.singleton)
            for t in tokens
        )
        for n in spec.ground_truth_ns:
            for i in range(n_syl - n + 1):
                window_tones = tones[i : i + n]
                if n > 1 and 0 in window_tones:
                    continue
                cluster = "/".join(profiles[i : i + n])
                ground_truth.append((f"{utt}:{i}:{n}", cluster))

    return SynthResult(tracks, syllables, annotations, ground_truth)


def write_corpus(result: SynthResult, out_dir: str | Path) -> dict[str, Path]:
    """Write the three corpus files plus ground_truth.csv; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "f0": out / "f0_tracks.jsonl",
        "segmentation": out / "segmentation.tsv",
        "annotations": out / "annotations.tsv",
        "ground_truth": out / "ground_truth.csv",
    }
    write_f0_tracks(result.tracks, paths["f0"])
    write_segmentation(result.syllables, paths["segmentation"])
    write_annotations(result.annotations, paths["annotations"])
    with open(paths["ground_truth"], "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["instance_key", "cluster_id"])
        writer.writerows(result.ground_truth)
    return paths
