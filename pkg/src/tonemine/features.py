"""Linguistic feature extraction and encoding.

Per instance the raw feature set has 10n + 7 entries: per-syllable POS
tag, dependency function, token-boundary flag, and seven phonological
booleans, plus n-gram-level entity/singleton flags, previous/next tone,
sentence position, and start/end pitch. Entity and singleton use
bag-of-features semantics: the flag fires when any syllable of the n-gram
is covered by a token carrying the property.

Tag sets are collapsed corpus-wide before encoding: dependency tags lose
their colon subcategory, POS tags go through a configurable 33 -> 5 coarse
table, and anything rarer than min_count becomes OTHER.
"""
from __future__ import annotations

import hashlib
import json
from bisect import bisect_right
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import ValidationError
from .ingest import Corpus, TokenAnnotation
from .preprocess import BOUNDARY_TONE, NgramInstance

OTHER = "OTHER"
TONE_ALPHABET = ("0", "1", "2", "3", "4", "B")
PHONO_ATTRS = ("nasal", "dipthong", "round", "front", "back", "high", "low")

DOMAINS = ("syntactic", "morphological", "semantic", "phonological", "other")


def load_phoneme_attributes(path: str | Path | None = None) -> dict[str, frozenset[str]]:
    """Phoneme -> attribute set; ships with a pinyin-style default table."""
    if path is None:
        text = resources.files("tonemine.data").joinpath("phoneme_attributes.json").read_text()
    else:
        text = Path(path).read_text(encoding="utf-8")
    raw = json.loads(text)
    table = {}
    for phoneme, attrs in raw.items():
        unknown = set(attrs) - set(PHONO_ATTRS)
        if unknown:
            raise ValidationError(f"unknown phoneme attributes {sorted(unknown)} for {phoneme!r}")
        table[phoneme] = frozenset(attrs)
    return table


def load_pos_coarse_map(path: str | Path | None = None) -> dict[str, str]:
    if path is None:
        text = resources.files("tonemine.data").joinpath("pos_coarse_map.json").read_text()
    else:
        text = Path(path).read_text(encoding="utf-8")
    return dict(json.loads(text))


def collapse_tagset(
    counts: Mapping[str, int],
    min_count: int = 5,
    coarse_map: Mapping[str, str] | None = None,
    strip_subcategory: bool = False,
) -> tuple[tuple[str, ...], dict[str, str]]:
    """Collapse a tag vocabulary; returns (vocabulary, raw -> collapsed map).

    Stage 1 applies the coarse table (tags already in its image pass
    through) and/or strips colon subcategories; stage 2 sends tags whose
    collapsed corpus count is below min_count to OTHER. Idempotent: running
    the output counts through again changes nothing.
    """
    if min_count < 1:
        raise ValidationError("min_count must be >= 1")
    coarse_image = set(coarse_map.values()) if coarse_map else set()

    def stage1(tag: str) -> str:
        if strip_subcategory:
            tag = tag.split(":", 1)[0]
        if coarse_map is not None:
            if tag in coarse_map:
                tag = coarse_map[tag]
            elif tag not in coarse_image and tag != OTHER:
                tag = OTHER
        return tag

    collapsed_counts: dict[str, int] = {}
    for tag, count in counts.items():
        t1 = stage1(tag)
        collapsed_counts[t1] = collapsed_counts.get(t1, 0) + count

    mapping = {}
    for tag in counts:
        t1 = stage1(tag)
        if t1 != OTHER and collapsed_counts[t1] < min_count:
            t1 = OTHER
        mapping[tag] = t1
    vocabulary = tuple(sorted(set(mapping.values()) | {OTHER}))
    return vocabulary, mapping


@dataclass(eq=False)
class FeatureSchema:
    """Vocabularies and naming for one n-gram order."""

    n: int
    pos_vocabulary: tuple[str, ...]
    dep_vocabulary: tuple[str, ...]
    pos_mapping: dict[str, str]
    dep_mapping: dict[str, str]
    coarse_map: dict[str, str]
    phoneme_attrs: dict[str, frozenset[str]]

    @property
    def feature_names(self) -> tuple[str, ...]:
        n = self.n
        names: list[str] = []
        names += [f"pos_tag_{i}" for i in range(1, n + 1)]
        names += [f"dep_func_{i}" for i in range(1, n + 1)]
        names += [f"tok_bound_{i}" for i in range(1, n + 1)]
        names += ["is_entity", "is_singleton"]
        for attr in PHONO_ATTRS:
            names += [f"is_{attr}_{i}" for i in range(1, n + 1)]
        names += ["sent_position", "start_pitch", "end_pitch", "prev_tone", "next_tone"]
        return tuple(names)

    def map_pos(self, tag: str) -> str:
        found = self.pos_mapping.get(tag)
        if found is not None:
            return found
        coarse = self.coarse_map.get(tag, tag)
        return coarse if coarse in self.pos_vocabulary else OTHER

    def map_dep(self, tag: str) -> str:
        found = self.dep_mapping.get(tag)
        if found is not None:
            return found
        stem = tag.split(":", 1)[0]
        return stem if stem in self.dep_vocabulary else OTHER

    def to_json(self) -> str:
        payload = {
            "n": self.n,
            "pos_vocabulary": list(self.pos_vocabulary),
            "dep_vocabulary": list(self.dep_vocabulary),
            "pos_mapping": self.pos_mapping,
            "dep_mapping": self.dep_mapping,
            "coarse_map": self.coarse_map,
            "phoneme_table_sha256": hashlib.sha256(
                json.dumps(
                    {k: sorted(v) for k, v in sorted(self.phoneme_attrs.items())}
                ).encode()
            ).hexdigest(),
        }
        return json.dumps(payload, indent=2, sort_keys=True)


def build_schema(
    corpus: Corpus,
    n: int,
    min_count: int = 5,
    coarse_map: Mapping[str, str] | None = None,
    phoneme_attrs: Mapping[str, frozenset[str]] | None = None,
) -> FeatureSchema:
    """Corpus-wide tag collapsing into a fixed schema for order n."""
    if coarse_map is None:
        coarse_map = load_pos_coarse_map()
    if phoneme_attrs is None:
        phoneme_attrs = load_phoneme_attributes()
    pos_counts: dict[str, int] = {}
    dep_counts: dict[str, int] = {}
    for anns in corpus.annotations.values():
        for a in anns:
            pos_counts[a.pos_tag] = pos_counts.get(a.pos_tag, 0) + 1
            dep_counts[a.dep_function] = dep_counts.get(a.dep_function, 0) + 1
    pos_vocab, pos_map = collapse_tagset(pos_counts, min_count, coarse_map=dict(coarse_map))
    dep_vocab, dep_map = collapse_tagset(dep_counts, min_count, strip_subcategory=True)
    return FeatureSchema(
        n, pos_vocab, dep_vocab, pos_map, dep_map, dict(coarse_map), dict(phoneme_attrs)
    )


@dataclass(eq=False)
class FeatureVector:
    instance_id: int
    values: dict[str, object]


def _annotation_for(anns: Sequence[TokenAnnotation], syl_index: int) -> TokenAnnotation:
    # anns sorted by first_syllable and covering exactly (corpus invariant)
    starts = [a.first_syllable for a in anns]
    a = anns[bisect_right(starts, syl_index) - 1]
    if not (a.first_syllable <= syl_index <= a.last_syllable):
        raise ValidationError(
            f"utterance {a.utterance_id!r}: no annotation covers syllable {syl_index}"
        )
    return a


def _tone_symbol(tone: int) -> str:
    return "B" if tone == BOUNDARY_TONE else str(tone)


def extract_features(
    instance: NgramInstance, corpus: Corpus, schema: FeatureSchema
) -> FeatureVector:
    """Raw (un-encoded) feature vector for one labeled instance."""
    utt, first = instance.source
    n = schema.n
    syllables = corpus.syllables[utt][first : first + n]
    anns = corpus.annotations[utt]
    values: dict[str, object] = {}

    covering = [_annotation_for(anns, first + k) for k in range(n)]
    for k in range(n):
        i = k + 1
        values[f"pos_tag_{i}"] = schema.map_pos(covering[k].pos_tag)
        values[f"dep_func_{i}"] = schema.map_dep(covering[k].dep_function)
        # a word boundary falls inside the n-gram before syllable i
        values[f"tok_bound_{i}"] = bool(k > 0 and syllables[k].word_initial)
        attrs: set[str] = set()
        for phoneme in syllables[k].phonemes:
            try:
                attrs |= schema.phoneme_attrs[phoneme]
            except KeyError:
                raise ValidationError(
                    f"phoneme {phoneme!r} not in the attribute table "
                    f"(utterance {utt!r}, syllable {first + k})"
                ) from None
        for attr in PHONO_ATTRS:
            values[f"is_{attr}_{i}"] = attr in attrs

    values["is_entity"] = any(a.in_named_entity for a in covering)
    values["is_singleton"] = any(a.is_singleton for a in covering)
    values["sent_position"] = float(instance.sentence_position)
    values["start_pitch"] = float(instance.start_pitch)
    values["end_pitch"] = float(instance.end_pitch)
    values["prev_tone"] = _tone_symbol(instance.prev_tone)
    values["next_tone"] = _tone_symbol(instance.next_tone)

    assert len(values) == 10 * n + 7
    return FeatureVector(instance.instance_id, values)


@dataclass(eq=False)
class FeatureMatrix:
    """Encoded design matrix with per-column provenance."""

    x: np.ndarray
    column_names: tuple[str, ...]
    parents: tuple[str, ...]  # raw feature behind each encoded column
    instance_ids: np.ndarray

    def columns_for(self, feature: str) -> np.ndarray:
        return np.flatnonzero(np.array(self.parents) == feature)


def _alphabet_of(schema: FeatureSchema, feature: str) -> tuple[str, ...]:
    if feature.startswith("pos_tag_"):
        return schema.pos_vocabulary
    if feature.startswith("dep_func_"):
        return schema.dep_vocabulary
    if feature in ("prev_tone", "next_tone"):
        return TONE_ALPHABET
    raise ValidationError(f"{feature} is not categorical")


NUMERIC_FEATURES = ("sent_position", "start_pitch", "end_pitch")


def encode(
    vectors: Sequence[FeatureVector],
    schema: FeatureSchema,
    train_idx: np.ndarray | None = None,
) -> FeatureMatrix:
    """One-hot categoricals, 0/1 booleans, z-scored numerics.

    Numeric columns are standardized with statistics from the rows in
    train_idx only (all rows when omitted), so a held-out split never
    leaks into the scaler.
    """
    if not vectors:
        raise ValidationError("nothing to encode")
    rows = len(vectors)
    if train_idx is None:
        train_idx = np.arange(rows)
    cols: list[np.ndarray] = []
    names: list[str] = []
    parents: list[str] = []
    for feature in schema.feature_names:
        sample = vectors[0].values[feature]
        if feature in NUMERIC_FEATURES:
            col = np.array([float(v.values[feature]) for v in vectors])
            mean = col[train_idx].mean()
            std = col[train_idx].std()
            col = (col - mean) / (std if std > 0 else 1.0)
            cols.append(col)
            names.append(feature)
            parents.append(feature)
        elif isinstance(sample, bool):
            cols.append(np.array([float(v.values[feature]) for v in vectors]))
            names.append(feature)
            parents.append(feature)
        else:
            alphabet = _alphabet_of(schema, feature)
            raw = [str(v.values[feature]) for v in vectors]
            for symbol in alphabet:
                cols.append(np.array([1.0 if r == symbol else 0.0 for r in raw]))
                names.append(f"{feature}={symbol}")
                parents.append(feature)
    x = np.column_stack(cols)
    ids = np.array([v.instance_id for v in vectors], dtype=np.int64)
    return FeatureMatrix(x, tuple(names), tuple(parents), ids)


def decode_categorical(matrix: FeatureMatrix, feature: str) -> list[str]:
    """Invert one-hot columns back to symbols (round-trip checks)."""
    idx = matrix.columns_for(feature)
    if idx.size == 0:
        raise ValidationError(f"no columns for {feature}")
    block = matrix.x[:, idx]
    symbols = [matrix.column_names[i].split("=", 1)[1] for i in idx]
    return [symbols[k] for k in block.argmax(axis=1)]


def domain_of(feature: str) -> str:
    """Table-1 domain of a raw feature name."""
    if feature.startswith(("pos_tag_", "dep_func_")):
        return "syntactic"
    if feature.startswith("tok_bound_"):
        return "morphological"
    if feature in ("is_entity", "is_singleton"):
        return "semantic"
    if feature.startswith(tuple(f"is_{a}_" for a in PHONO_ATTRS)):
        return "phonological"
    return "other"
