"""Speaker normalization, track cleaning, and n-gram dataset construction.

Pitch is normalized per speaker as a z-score of log-Hz, computed in two
passes: provisional stats over all voiced samples, then final stats with
|z| > 3 outliers excluded. Cleaning maps a track to z-values, drops
outliers, and linearly interpolates interior gaps; leading/trailing gaps
stay absent. Contours are cut per syllable window and resampled to a
fixed length per n-gram order (30/100/200 for n = 1/2/3).
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import ValidationError
from .ingest import Corpus, F0Track, SyllableRecord

log = logging.getLogger(__name__)

VECTOR_LENGTH = {1: 30, 2: 100, 3: 200}
BOUNDARY_TONE = -1
MIN_VOICED_PER_SPEAKER = 30
MIN_VOICED_PER_CONTOUR = 4
OUTLIER_Z = 3.0

_DATASET_FORMAT = "tonemine-ngram-datasets"
_DATASET_VERSION = 1


@dataclass(frozen=True)
class SpeakerStats:
    speaker_id: str
    mean_log_f0: float
    std_log_f0: float


@dataclass(eq=False)
class CleanTrack:
    """Normalized track between its first and last usable sample.

    ``voiced`` marks samples that were actually measured (not produced by
    gap interpolation); the voiced-sample floor for contours counts these.
    """

    utterance_id: str
    speaker_id: str
    times: np.ndarray
    z: np.ndarray
    voiced: np.ndarray


@dataclass(eq=False)
class Contour:
    times: np.ndarray
    z: np.ndarray


@dataclass(eq=False)
class NgramInstance:
    instance_id: int
    category: tuple[int, ...]
    f0: np.ndarray
    start_pitch: float
    end_pitch: float
    prev_tone: int
    next_tone: int
    sentence_position: float
    source: tuple[str, int]


@dataclass(eq=False)
class NgramDataset:
    category: tuple[int, ...]
    instances: list[NgramInstance]

    def matrix(self) -> np.ndarray:
        return np.stack([inst.f0 for inst in self.instances])

    def __len__(self) -> int:
        return len(self.instances)


def speaker_stats(corpus: Corpus) -> dict[str, SpeakerStats]:
    """Two-pass log-f0 stats per speaker; under-sampled or degenerate
    speakers are excluded (and logged), not errors."""
    samples: dict[str, list[np.ndarray]] = {}
    for utt in corpus.utterance_ids:
        track = corpus.tracks[utt]
        hz = track.hz[track.voiced]
        samples.setdefault(track.speaker_id, []).append(hz)

    stats: dict[str, SpeakerStats] = {}
    for spk in sorted(samples):
        logf = np.log(np.concatenate(samples[spk]))
        if logf.size < MIN_VOICED_PER_SPEAKER:
            log.warning("speaker %s excluded: %d voiced samples", spk, logf.size)
            continue
        mean0, std0 = float(np.mean(logf)), float(np.std(logf))
        if std0 == 0.0:
            log.warning("speaker %s excluded: zero pitch variance", spk)
            continue
        keep = np.abs((logf - mean0) / std0) <= OUTLIER_Z
        mean1, std1 = float(np.mean(logf[keep])), float(np.std(logf[keep]))
        if std1 == 0.0:
            log.warning("speaker %s excluded: zero variance after outlier removal", spk)
            continue
        stats[spk] = SpeakerStats(spk, mean1, std1)
    return stats


def clean_track(track: F0Track, stats: SpeakerStats) -> CleanTrack | None:
    """Normalize to z, remove |z| > 3 outliers, interpolate interior gaps.

    Returns None when nothing usable remains.
    """
    z = (np.log(track.hz, where=track.voiced, out=np.full_like(track.hz, np.nan))
         - stats.mean_log_f0) / stats.std_log_f0
    good = track.voiced & (np.abs(np.where(track.voiced, z, 0.0)) <= OUTLIER_Z)
    if not good.any():
        return None
    first, last = np.flatnonzero(good)[[0, -1]]
    times = track.times[first : last + 1]
    voiced = good[first : last + 1]
    kept_z = z[first : last + 1]
    filled = np.interp(times, times[voiced], kept_z[voiced])
    return CleanTrack(track.utterance_id, track.speaker_id, times, filled, voiced)


def cut_contour(track: CleanTrack, window: Sequence[SyllableRecord]) -> Contour | None:
    """Samples inside [start of first syllable, end of last], or None when
    fewer than MIN_VOICED_PER_CONTOUR measured samples fall in the window."""
    start, end = window[0].start, window[-1].end
    sel = (track.times >= start - 1e-12) & (track.times <= end + 1e-12)
    if int(np.count_nonzero(track.voiced & sel)) < MIN_VOICED_PER_CONTOUR:
        return None
    return Contour(track.times[sel], track.z[sel])


def downsample(contour: Contour, n: int) -> np.ndarray:
    """Linear resample onto the fixed per-order length, spanning the contour."""
    length = VECTOR_LENGTH[n]
    if contour.times.size < MIN_VOICED_PER_CONTOUR:
        raise ValidationError(f"contour too short to resample ({contour.times.size} samples)")
    grid = np.linspace(contour.times[0], contour.times[-1], length)
    return np.interp(grid, contour.times, contour.z)


def clean_corpus(corpus: Corpus) -> dict[str, CleanTrack]:
    """Clean every track whose speaker has stats; returns utt -> CleanTrack."""
    stats = speaker_stats(corpus)
    cleaned: dict[str, CleanTrack] = {}
    for utt in corpus.utterance_ids:
        track = corpus.tracks[utt]
        st = stats.get(track.speaker_id)
        if st is None:
            continue
        ct = clean_track(track, st)
        if ct is not None:
            cleaned[utt] = ct
    return cleaned


def iter_windows(
    syllables: Sequence[SyllableRecord], n: int
) -> Iterator[tuple[int, tuple[SyllableRecord, ...]]]:
    for i in range(len(syllables) - n + 1):
        yield i, tuple(syllables[i : i + n])


def build_ngram_datasets(
    corpus: Corpus,
    cleaned: dict[str, CleanTrack],
    n: int,
    min_category_size: int = 100,
) -> dict[tuple[int, ...], NgramDataset]:
    """Sliding-window n-gram datasets over the cleaned corpus.

    For n > 1, windows containing the neutral tone are excluded, and so are
    categories below min_category_size. Instance ids follow (utterance,
    window index) sort order, independent of any parallel scheduling.
    """
    if n not in VECTOR_LENGTH:
        raise ValidationError(f"unsupported n-gram order {n}")
    datasets: dict[tuple[int, ...], NgramDataset] = {}
    next_id = 0
    for utt in sorted(cleaned):
        track = cleaned[utt]
        syllables = corpus.syllables[utt]
        count = corpus.utterance_lengths[utt]
        for i, window in iter_windows(syllables, n):
            category = tuple(s.tone for s in window)
            if n > 1 and 0 in category:
                continue
            contour = cut_contour(track, window)
            if contour is None:
                continue
            vector = downsample(contour, n)
            inst = NgramInstance(
                instance_id=next_id,
                category=category,
                f0=vector,
                start_pitch=float(vector[0]),
                end_pitch=float(vector[-1]),
                prev_tone=syllables[i - 1].tone if i > 0 else BOUNDARY_TONE,
                next_tone=syllables[i + n].tone if i + n < count else BOUNDARY_TONE,
                sentence_position=i / (count - 1) if count > 1 else 0.0,
                source=(utt, i),
            )
            next_id += 1
            datasets.setdefault(category, NgramDataset(category, [])).instances.append(inst)

    sparse = [cat for cat, ds in datasets.items() if len(ds) < min_category_size]
    for cat in sparse:
        log.info("category %s excluded: %d instances", cat, len(datasets[cat]))
        del datasets[cat]
    return dict(sorted(datasets.items()))


# --- dataset (de)serialization: versioned JSONL, one instance per line ---


def save_datasets(datasets: dict[tuple[int, ...], NgramDataset], n: int, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        header = {"format": _DATASET_FORMAT, "version": _DATASET_VERSION, "n": n}
        fh.write(json.dumps(header, separators=(",", ":")) + "\n")
        for cat in sorted(datasets):
            for inst in datasets[cat].instances:
                rec = {
                    "id": inst.instance_id,
                    "category": list(inst.category),
                    "f0": [float(v) for v in inst.f0],
                    "start_pitch": inst.start_pitch,
                    "end_pitch": inst.end_pitch,
                    "prev_tone": inst.prev_tone,
                    "next_tone": inst.next_tone,
                    "sentence_position": inst.sentence_position,
                    "utt": inst.source[0],
                    "first": inst.source[1],
                }
                fh.write(json.dumps(rec, separators=(",", ":")) + "\n")


def load_datasets(path: str | Path) -> dict[tuple[int, ...], NgramDataset]:
    datasets: dict[tuple[int, ...], NgramDataset] = {}
    with open(path, encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        if header.get("format") != _DATASET_FORMAT:
            raise ValidationError(f"{path}: not a {_DATASET_FORMAT} file")
        if header.get("version") != _DATASET_VERSION:
            raise ValidationError(f"{path}: unsupported version {header.get('version')}")
        for line in fh:
            rec = json.loads(line)
            cat = tuple(rec["category"])
            inst = NgramInstance(
                instance_id=rec["id"],
                category=cat,
                f0=np.array(rec["f0"], dtype=np.float64),
                start_pitch=rec["start_pitch"],
                end_pitch=rec["end_pitch"],
                prev_tone=rec["prev_tone"],
                next_tone=rec["next_tone"],
                sentence_position=rec["sentence_position"],
                source=(rec["utt"], rec["first"]),
            )
            datasets.setdefault(cat, NgramDataset(cat, [])).instances.append(inst)
    return datasets
