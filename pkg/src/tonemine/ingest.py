"""Corpus file formats and assembly.

Three neutral formats feed the pipeline, so any pitch tracker / NLP stack
can produce them:

* f0 tracks           JSONL, one utterance per line:
                      ``{"utt": str, "spk": str, "f0": [[t, hz|null], ...]}``
                      (null marks an unvoiced sample)
* segmentation        TSV ``utt idx tone start end phonemes word_flags``
                      with word_flags in {I, F, IF, -} and phonemes
                      space-separated symbols
* token annotations   TSV ``utt first_syl last_syl pos dep entity(0/1)
                      singleton(0/1)``

All numeric fields are decimal, files UTF-8, column order fixed. Loaders
validate per-record invariants; :func:`assemble_corpus` cross-checks the
layers and drops (not fails on) utterances that are missing a layer or
whose syllables fall outside the track's time range.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ParseError, ValidationError

log = logging.getLogger(__name__)

TONES = (0, 1, 2, 3, 4)

_WORD_FLAGS = {
    "I": (True, False),
    "F": (False, True),
    "IF": (True, True),
    "-": (False, False),
}


@dataclass(eq=False)
class F0Track:
    """Raw per-utterance pitch track; hz is NaN where unvoiced."""

    utterance_id: str
    speaker_id: str
    sample_period: float
    times: np.ndarray
    hz: np.ndarray

    @property
    def voiced(self) -> np.ndarray:
        return ~np.isnan(self.hz)


@dataclass(frozen=True)
class SyllableRecord:
    utterance_id: str
    index: int
    tone: int
    start: float
    end: float
    phonemes: tuple[str, ...]
    word_initial: bool
    word_final: bool


@dataclass(frozen=True)
class TokenAnnotation:
    utterance_id: str
    first_syllable: int
    last_syllable: int
    pos_tag: str
    dep_function: str
    in_named_entity: bool
    is_singleton: bool


@dataclass(eq=False)
class Corpus:
    """Aligned, validated view of the three layers. Immutable once built."""

    tracks: dict[str, F0Track]
    syllables: dict[str, tuple[SyllableRecord, ...]]
    annotations: dict[str, tuple[TokenAnnotation, ...]]
    utterance_lengths: dict[str, int]
    dropped: dict[str, str] = field(default_factory=dict)

    @property
    def utterance_ids(self) -> tuple[str, ...]:
        return tuple(sorted(self.tracks))


def load_f0_tracks(path: str | Path) -> list[F0Track]:
    """Parse the f0 JSONL file; unvoiced markers become NaN."""
    tracks = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                utt = rec["utt"]
                spk = rec["spk"]
                samples = rec["f0"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ParseError(f"{path}: line {lineno}: bad f0 record ({exc})") from exc
            times = np.array([s[0] for s in samples], dtype=np.float64)
            hz = np.array(
                [np.nan if s[1] is None else float(s[1]) for s in samples],
                dtype=np.float64,
            )
            if times.size == 0:
                raise ParseError(f"{path}: line {lineno}: empty f0 track for {utt!r}")
            if np.any(np.diff(times) <= 0):
                raise ValidationError(
                    f"{path}: line {lineno}: sample times not strictly increasing in {utt!r}"
                )
            voiced = hz[~np.isnan(hz)]
            if np.any(voiced <= 0):
                raise ValidationError(
                    f"{path}: line {lineno}: non-positive f0 value in {utt!r}"
                )
            period = float(np.median(np.diff(times))) if times.size > 1 else 0.01
            tracks.append(F0Track(utt, spk, period, times, hz))
    return tracks


def load_segmentation(path: str | Path) -> list[SyllableRecord]:
    """Parse the segmentation TSV, grouped per utterance and ordered by start."""
    by_utt: dict[str, list[SyllableRecord]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            cols = line.split("\t")
            if len(cols) != 7:
                raise ParseError(f"{path}: line {lineno}: expected 7 columns, got {len(cols)}")
            utt, idx_s, tone_s, start_s, end_s, phon_s, flags = cols
            try:
                idx, tone = int(idx_s), int(tone_s)
                start, end = float(start_s), float(end_s)
            except ValueError as exc:
                raise ParseError(f"{path}: line {lineno}: bad numeric field") from exc
            if tone not in TONES:
                raise ValidationError(
                    f"{path}: line {lineno}: tone {tone} outside {{0..4}} in {utt!r}"
                )
            if not start < end:
                raise ValidationError(
                    f"{path}: line {lineno}: start >= end for syllable {idx} of {utt!r}"
                )
            if flags not in _WORD_FLAGS:
                raise ValidationError(
                    f"{path}: line {lineno}: word flags {flags!r} not in I/F/IF/-"
                )
            initial, final = _WORD_FLAGS[flags]
            rec = SyllableRecord(
                utt, idx, tone, start, end, tuple(phon_s.split()), initial, final
            )
            by_utt.setdefault(utt, []).append(rec)

    out: list[SyllableRecord] = []
    for utt in sorted(by_utt):
        recs = sorted(by_utt[utt], key=lambda r: r.start)
        for pos, rec in enumerate(recs):
            if rec.index != pos:
                raise ValidationError(
                    f"{path}: utterance {utt!r}: syllable indexes not contiguous "
                    f"(found {rec.index} at position {pos})"
                )
            if pos and recs[pos - 1].end > rec.start + 1e-12:
                raise ValidationError(
                    f"{path}: utterance {utt!r}: syllables {pos - 1} and {pos} overlap"
                )
        out.extend(recs)
    return out


def load_annotations(path: str | Path) -> list[TokenAnnotation]:
    """Parse the token-annotation TSV. Span coverage is checked at assembly."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            cols = line.split("\t")
            if len(cols) != 7:
                raise ParseError(f"{path}: line {lineno}: expected 7 columns, got {len(cols)}")
            utt, first_s, last_s, pos_tag, dep, ent_s, single_s = cols
            try:
                first, last = int(first_s), int(last_s)
                ent, single = int(ent_s), int(single_s)
            except ValueError as exc:
                raise ParseError(f"{path}: line {lineno}: bad numeric field") from exc
            if first > last or first < 0:
                raise ValidationError(
                    f"{path}: line {lineno}: bad span {first}..{last} in {utt!r}"
                )
            if ent not in (0, 1) or single not in (0, 1):
                raise ValidationError(f"{path}: line {lineno}: entity/singleton must be 0/1")
            out.append(TokenAnnotation(utt, first, last, pos_tag, dep, bool(ent), bool(single)))
    return out


def assemble_corpus(
    tracks: Iterable[F0Track],
    syllables: Iterable[SyllableRecord],
    annotations: Iterable[TokenAnnotation],
) -> Corpus:
    """Align the three layers into a Corpus.

    Utterances missing any layer, or whose syllables stick out of the
    track's time range, are dropped and counted. Annotation spans that do
    not cover the syllable index set exactly once are an error (they point
    at a broken annotation file, not a ragged corpus).
    """
    track_map = {t.utterance_id: t for t in tracks}
    syl_map: dict[str, list[SyllableRecord]] = {}
    for s in syllables:
        syl_map.setdefault(s.utterance_id, []).append(s)
    ann_map: dict[str, list[TokenAnnotation]] = {}
    for a in annotations:
        ann_map.setdefault(a.utterance_id, []).append(a)

    kept_tracks: dict[str, F0Track] = {}
    kept_syl: dict[str, tuple[SyllableRecord, ...]] = {}
    kept_ann: dict[str, tuple[TokenAnnotation, ...]] = {}
    lengths: dict[str, int] = {}
    dropped: dict[str, str] = {}

    for utt in sorted(set(track_map) | set(syl_map) | set(ann_map)):
        track = track_map.get(utt)
        syls = syl_map.get(utt)
        anns = ann_map.get(utt)
        if track is None or not syls or not anns:
            missing = [
                name
                for name, layer in (("f0", track), ("segmentation", syls), ("annotations", anns))
                if not layer
            ]
            dropped[utt] = f"missing {'/'.join(missing)}"
            continue

        syls = sorted(syls, key=lambda r: r.index)
        t_lo, t_hi = float(track.times[0]), float(track.times[-1])
        if syls[0].start < t_lo - 1e-9 or syls[-1].end > t_hi + 1e-9:
            dropped[utt] = "syllable span outside track time range"
            continue

        n_syl = len(syls)
        covered = np.zeros(n_syl, dtype=np.int64)
        for a in anns:
            if a.last_syllable >= n_syl:
                raise ValidationError(
                    f"utterance {utt!r}: annotation span {a.first_syllable}.."
                    f"{a.last_syllable} exceeds {n_syl} syllables"
                )
            covered[a.first_syllable : a.last_syllable + 1] += 1
        bad = np.flatnonzero(covered != 1)
        if bad.size:
            raise ValidationError(
                f"utterance {utt!r}: syllable {int(bad[0])} covered "
                f"{int(covered[bad[0]])} times by annotations"
            )

        kept_tracks[utt] = track
        kept_syl[utt] = tuple(syls)
        kept_ann[utt] = tuple(sorted(anns, key=lambda a: a.first_syllable))
        lengths[utt] = n_syl

    if dropped:
        log.warning("assemble_corpus: dropped %d utterance(s)", len(dropped))
    return Corpus(kept_tracks, kept_syl, kept_ann, lengths, dropped)


def load_corpus(f0_path: str | Path, seg_path: str | Path, ann_path: str | Path) -> Corpus:
    return assemble_corpus(
        load_f0_tracks(f0_path), load_segmentation(seg_path), load_annotations(ann_path)
    )


# --- writers (synth emits corpora through these; also round-trip tested) ---


def write_f0_tracks(tracks: Sequence[F0Track], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in sorted(tracks, key=lambda t: t.utterance_id):
            samples = [
                [float(ti), None if np.isnan(h) else float(h)]
                for ti, h in zip(t.times, t.hz)
            ]
            fh.write(
                json.dumps(
                    {"utt": t.utterance_id, "spk": t.speaker_id, "f0": samples},
                    separators=(",", ":"),
                )
                + "\n"
            )


def write_segmentation(records: Sequence[SyllableRecord], path: str | Path) -> None:
    flag_of = {v: k for k, v in _WORD_FLAGS.items()}
    with open(path, "w", encoding="utf-8") as fh:
        for r in sorted(records, key=lambda r: (r.utterance_id, r.index)):
            flags = flag_of[(r.word_initial, r.word_final)]
            fh.write(
                f"{r.utterance_id}\t{r.index}\t{r.tone}\t{r.start!r}\t{r.end!r}\t"
                f"{' '.join(r.phonemes)}\t{flags}\n"
            )


def write_annotations(records: Sequence[TokenAnnotation], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for a in sorted(records, key=lambda a: (a.utterance_id, a.first_syllable)):
            fh.write(
                f"{a.utterance_id}\t{a.first_syllable}\t{a.last_syllable}\t"
                f"{a.pos_tag}\t{a.dep_function}\t{int(a.in_named_entity)}\t"
                f"{int(a.is_singleton)}\n"
            )
