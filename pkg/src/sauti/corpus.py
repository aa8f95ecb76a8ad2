"""Utterance metadata: line-delimited JSON manifests, class filtering,
distribution counts, and seeded speaker-disjoint train/dev/test splits.

Manifests are immutable values; every operation returns a new one.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, replace

import numpy as np

from .errors import ArgumentError, InsufficientSpeakersError, ValidationError

ACCENTS = ("edo", "yoruba", "igbo", "efik_ibibio", "igala")
GENDERS = ("female", "male")
SPLITS = ("train", "dev", "test")
SENTENCE_ID_MAX = 1132  # size of the phonetically balanced prompt set


@dataclass(frozen=True)
class UtteranceRecord:
    path: str
    speaker_id: str
    accent: str
    gender: str
    sentence_id: int
    split: str | None = None

    def to_json(self) -> str:
        obj = {
            "path": self.path,
            "speaker_id": self.speaker_id,
            "accent": self.accent,
            "gender": self.gender,
            "sentence_id": self.sentence_id,
        }
        if self.split is not None:
            obj["split"] = self.split
        return json.dumps(obj, separators=(",", ":"))


@dataclass(frozen=True)
class Manifest:
    records: tuple[UtteranceRecord, ...]
    class_set: tuple[str, ...]

    def __len__(self):
        return len(self.records)

    def with_records(self, records, class_set=None) -> "Manifest":
        records = tuple(records)
        if class_set is None:
            present = {r.accent for r in records}
            class_set = tuple(a for a in ACCENTS if a in present)
        return Manifest(records=records, class_set=tuple(class_set))

    def subset(self, split: str) -> "Manifest":
        if split not in SPLITS:
            raise ArgumentError("unknown split %r" % split)
        return Manifest(
            records=tuple(r for r in self.records if r.split == split),
            class_set=self.class_set,
        )


def _validate_record(obj: dict, lineno: int) -> UtteranceRecord:
    for field in ("path", "speaker_id", "accent", "gender", "sentence_id"):
        if field not in obj:
            raise ValidationError("line %d: missing field %r" % (lineno, field))
    accent = obj["accent"]
    if accent not in ACCENTS:
        raise ValidationError("line %d: unknown accent label %r" % (lineno, accent))
    gender = obj["gender"]
    if gender not in GENDERS:
        raise ValidationError("line %d: unknown gender %r" % (lineno, gender))
    sid = obj["sentence_id"]
    if not isinstance(sid, int) or not (1 <= sid <= SENTENCE_ID_MAX):
        raise ValidationError(
            "line %d: sentence_id %r outside 1..%d" % (lineno, sid, SENTENCE_ID_MAX))
    split = obj.get("split")
    if split is not None and split not in SPLITS:
        raise ValidationError("line %d: unknown split %r" % (lineno, split))
    if not obj["path"] or not obj["speaker_id"]:
        raise ValidationError("line %d: path and speaker_id must be non-empty" % lineno)
    return UtteranceRecord(
        path=obj["path"], speaker_id=obj["speaker_id"], accent=accent,
        gender=gender, sentence_id=sid, split=split,
    )


def load_manifest(path) -> Manifest:
    """Read a UTF-8, one-JSON-object-per-line manifest.

    Each record is validated (fields present, accent/gender/split in their
    enums, sentence_id in range, paths unique, speakers confined to one
    split); errors name the offending line.
    """
    records = []
    seen_paths = {}
    speaker_split: dict[str, str | None] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError("line %d: invalid JSON (%s)" % (lineno, exc)) from exc
            rec = _validate_record(obj, lineno)
            if rec.path in seen_paths:
                raise ValidationError(
                    "line %d: duplicate path %r (first seen on line %d)"
                    % (lineno, rec.path, seen_paths[rec.path]))
            seen_paths[rec.path] = lineno
            prev = speaker_split.get(rec.speaker_id, rec.split)
            if prev != rec.split:
                raise ValidationError(
                    "line %d: speaker %r appears in more than one split"
                    % (lineno, rec.speaker_id))
            speaker_split[rec.speaker_id] = rec.split
            records.append(rec)
    present = {r.accent for r in records}
    return Manifest(records=tuple(records),
                    class_set=tuple(a for a in ACCENTS if a in present))


def save_manifest(manifest: Manifest, path) -> None:
    """Write records one JSON object per line, keys in a fixed order, so
    identical manifests serialize byte-for-byte identically."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in manifest.records:
            fh.write(rec.to_json())
            fh.write("\n")


def filter_classes(manifest: Manifest, keep) -> Manifest:
    """Keep only records whose accent is in `keep`; class_set becomes the
    kept labels in canonical order."""
    keep = set(keep)
    if not keep:
        raise ArgumentError("keep set must not be empty")
    unknown = keep - set(ACCENTS)
    if unknown:
        raise ArgumentError("unknown accent labels: %s" % sorted(unknown))
    return Manifest(
        records=tuple(r for r in manifest.records if r.accent in keep),
        class_set=tuple(a for a in ACCENTS if a in keep),
    )


def class_distribution(manifest: Manifest) -> dict[str, int]:
    return dict(Counter(r.accent for r in manifest.records))


def speaker_disjoint_split(manifest: Manifest, fractions=(0.8, 0.1, 0.1),
                           seed: int = 0) -> Manifest:
    """Assign every speaker (and hence all their records) to exactly one of
    train/dev/test, stratified per accent class.

    Per class: shuffle that class's speakers with the seeded generator,
    then cut the shuffled sequence at the two points whose cumulative
    utterance counts are closest to the target fractions, keeping each
    split non-empty. Deterministic for a fixed (manifest, fractions, seed).
    """
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3 or any(f <= 0 for f in fractions):
        raise ArgumentError("fractions must be three positive numbers")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ArgumentError("fractions must sum to 1, got %r" % (fractions,))

    by_class: dict[str, dict[str, int]] = {}
    for rec in manifest.records:
        by_class.setdefault(rec.accent, Counter())[rec.speaker_id] += 1
    for accent in manifest.class_set:
        if len(by_class.get(accent, ())) < 3:
            raise InsufficientSpeakersError(
                "class %r has %d distinct speakers; a disjoint split needs >= 3"
                % (accent, len(by_class.get(accent, ()))))

    rng = np.random.default_rng(seed)
    assignment: dict[str, str] = {}
    for accent in manifest.class_set:
        counts = by_class[accent]
        speakers = sorted(counts)  # fixed order before the seeded shuffle
        rng.shuffle(speakers)
        masses = np.array([counts[s] for s in speakers], dtype=np.float64)
        cums = np.cumsum(masses)
        total = cums[-1]
        n = len(speakers)

        def best_cut(target, lo, hi):
            # cut index k means k speakers fall before the boundary
            ks = np.arange(lo, hi + 1)
            return int(ks[np.argmin(np.abs(cums[ks - 1] - target))])

        cut1 = best_cut(fractions[0] * total, 1, n - 2)
        cut2 = best_cut((fractions[0] + fractions[1]) * total, cut1 + 1, n - 1)
        for s in speakers[:cut1]:
            assignment[s] = "train"
        for s in speakers[cut1:cut2]:
            assignment[s] = "dev"
        for s in speakers[cut2:]:
            assignment[s] = "test"

    records = tuple(replace(r, split=assignment[r.speaker_id]) for r in manifest.records)
    return Manifest(records=records, class_set=manifest.class_set)
