"""Bridges between manifests on disk and the in-memory datasets consumed
by training, evaluation, and embedding extraction.

Record paths are resolved relative to the manifest's directory. For the
"external" frontend, the feature file for a record lives under the
features directory at the record's relative path with its extension
replaced by ".sft1" (the layout `featurize` produces).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .audio import AudioClip, read_wav, resample
from .corpus import Manifest
from .errors import ArgumentError, ShapeError
from .features import (
    FeatureSequence,
    load_external_features,
    mel_spectrogram,
    random_chunk,
    random_frame_chunk,
)

FEATURE_SUFFIX = ".sft1"
MEL_CHANNELS = 80
MEL_SAMPLE_RATE = 16000


def feature_path(features_dir, record_path) -> Path:
    return Path(features_dir) / Path(record_path).with_suffix(FEATURE_SUFFIX)


class Dataset:
    """One split held in memory: waveforms for the mel frontend, feature
    sequences for the external frontend, plus labels and speaker ids."""

    def __init__(self, names, labels, payloads, speakers, class_set, frontend):
        if not (len(names) == len(labels) == len(payloads) == len(speakers)):
            raise ArgumentError("names, labels, payloads, speakers must align")
        if frontend not in ("mel", "external"):
            raise ArgumentError("frontend must be 'mel' or 'external'")
        self.names = list(names)
        self.labels = np.asarray(labels, dtype=np.int64)
        self.payloads = list(payloads)
        self.speakers = list(speakers)
        self.class_set = tuple(class_set)
        self.frontend = frontend

    def __len__(self):
        return len(self.names)

    @property
    def n_channels(self) -> int:
        if self.frontend == "mel":
            return MEL_CHANNELS
        return self.payloads[0].n_channels

    def chunk_features(self, i: int, seconds: float, rng) -> np.ndarray:
        """Features of one fresh random chunk of sample i."""
        if self.frontend == "mel":
            return mel_spectrogram(random_chunk(self.payloads[i], seconds, rng)).frames
        return random_frame_chunk(self.payloads[i], seconds, rng).frames

    def eval_features(self, i: int, seconds: float) -> np.ndarray:
        """Deterministic chunk at offset 0 (zero-padded when short), used
        for per-epoch development scoring and chunked evaluation."""
        if self.frontend == "mel":
            clip = self.payloads[i]
            n = int(round(seconds * clip.sample_rate_hz))
            out = np.zeros(n)
            out[:min(n, len(clip))] = clip.samples[:n]
            return mel_spectrogram(AudioClip(out, clip.sample_rate_hz)).frames
        seq = self.payloads[i]
        n = int(round(seconds * seq.frame_rate_hz))
        out = np.zeros((n, seq.n_channels))
        out[:min(n, seq.n_frames)] = seq.frames[:n]
        return out

    def full_features(self, i: int) -> np.ndarray:
        """Features of the entire utterance (no cropping)."""
        if self.frontend == "mel":
            return mel_spectrogram(self.payloads[i]).frames
        return self.payloads[i].frames


def load_clip_for_record(record, manifest_dir) -> AudioClip:
    clip = read_wav(Path(manifest_dir) / record.path)
    if clip.sample_rate_hz != MEL_SAMPLE_RATE:
        clip = resample(clip, MEL_SAMPLE_RATE)
    return clip


def build_dataset(manifest: Manifest, split, manifest_dir, frontend: str,
                  features_dir=None, strict: bool = True):
    """Materialize one split (or the whole manifest when split is None).

    Returns (dataset, failures); with strict=True a missing or unreadable
    file raises immediately, otherwise it lands in `failures` as a
    (path, reason) pair and the record is skipped.
    """
    records = manifest.records if split is None else manifest.subset(split).records
    if frontend == "external" and features_dir is None:
        raise ArgumentError("external frontend needs a features directory")
    label_of = {accent: i for i, accent in enumerate(manifest.class_set)}

    names, labels, payloads, speakers = [], [], [], []
    failures = []
    expected_channels = None
    for rec in records:
        if rec.accent not in label_of:
            raise ArgumentError("record %r has accent outside the manifest class_set" % rec.path)
        try:
            if frontend == "mel":
                payload = load_clip_for_record(rec, manifest_dir)
            else:
                payload = load_external_features(feature_path(features_dir, rec.path))
                if expected_channels is None:
                    expected_channels = payload.n_channels
                elif payload.n_channels != expected_channels:
                    raise ShapeError(
                        "feature file for %r has %d channels, expected %d"
                        % (rec.path, payload.n_channels, expected_channels))
        except Exception as exc:
            if strict:
                raise
            failures.append((rec.path, str(exc)))
            continue
        names.append(rec.path)
        labels.append(label_of[rec.accent])
        payloads.append(payload)
        speakers.append(rec.speaker_id)
    dataset = Dataset(names, labels, payloads, speakers,
                      class_set=manifest.class_set, frontend=frontend)
    return dataset, failures
