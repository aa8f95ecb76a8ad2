"""Synthetic labeled mini-corpora for exercising the pipeline end-to-end.

Each accent class is a signature of sine components (frequency, tremolo
depth); class bands are deliberately spaced far apart on the mel scale.
Every utterance mixes its own class's components at full level with the
other classes' dominant tones at a random lower level, over a noise floor
with a random smooth spectral tilt, at 20 dB (+-3) SNR and a random 2-5 s
duration. Speakers of a class share the signature but carry their own
random phases and a small frequency offset; tremolo rate and phase,
context-band levels, and the tilt are drawn per utterance.

The point of the shared bands and the tilt is to mirror real speech: the
class cue (which band dominates) is small next to the utterance-level
variation, so an untrained encoder scores near chance, while frame-level
band comparison stays trivially learnable. Accents here are stand-ins for
test purposes, not a phonetic model.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio import AudioClip, write_wav
from .corpus import ACCENTS, Manifest, UtteranceRecord, save_manifest
from .errors import ArgumentError

# (frequency Hz, tremolo depth) pairs; the first component is dominant.
# Tremolo depth 0.15 keeps the dominant band above the context bands even
# in the modulation trough: (1-0.15)/(1+0.15) = 0.74 > CONTEXT_LEVEL max.
DEFAULT_SIGNATURES = (
    ((500.0, 0.15), (900.0, 0.3)),
    ((1300.0, 0.15), (2100.0, 0.3)),
    ((2900.0, 0.15), (4100.0, 0.3)),
    ((5000.0, 0.15), (6200.0, 0.3)),
    ((7000.0, 0.15), (3500.0, 0.3)),
)
TREMOLO_HZ = 3.0
CONTEXT_LEVEL = (0.4, 0.65)  # per-utterance level of other classes' bands
TILT_RANGE = 1.4  # log-amplitude knots of the noise-floor tilt


@dataclass(frozen=True)
class SynthSpec:
    n_classes: int = 3
    speakers_per_class: int = 10
    utterances_per_speaker: int = 10
    seed: int = 0
    class_signatures: tuple = DEFAULT_SIGNATURES
    sample_rate_hz: int = 16000
    min_seconds: float = 2.0
    max_seconds: float = 5.0
    snr_db: float = 20.0

    def __post_init__(self):
        if not (1 <= self.n_classes <= len(ACCENTS)):
            raise ArgumentError("n_classes must lie in 1..%d" % len(ACCENTS))
        if self.n_classes > len(self.class_signatures):
            raise ArgumentError("need a signature per class")
        sigs = self.class_signatures[:self.n_classes]
        if len(set(sigs)) != len(sigs):
            raise ArgumentError("class signatures must be pairwise distinct")
        for sig in sigs:
            for freq, _depth in sig:
                if not (0 < freq < 8000):
                    raise ArgumentError("signature frequency %g outside (0, 8000) Hz" % freq)
        if self.speakers_per_class < 1 or self.utterances_per_speaker < 1:
            raise ArgumentError("need at least one speaker and utterance per class")
        if not (0 < self.min_seconds <= self.max_seconds):
            raise ArgumentError("bad duration range")


def _derived_rng(base_seed: int, tag: str) -> np.random.Generator:
    # stable across platforms and processes, so files can be generated in
    # parallel (or re-generated individually) with identical bytes
    digest = hashlib.sha256(("%d:%s" % (base_seed, tag)).encode("utf-8")).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little"))


def render_utterance(spec: SynthSpec, class_idx: int, speaker_tag: str,
                     utt_tag: str) -> AudioClip:
    """Deterministically synthesize one utterance of a class."""
    signature = spec.class_signatures[class_idx]
    speaker_rng = _derived_rng(spec.seed, speaker_tag)
    phases = speaker_rng.uniform(0.0, 2.0 * np.pi, size=len(signature))
    speaker_shift = speaker_rng.uniform(0.93, 1.07)  # ~2 mel filters

    utt_rng = _derived_rng(spec.seed, utt_tag)
    seconds = utt_rng.uniform(spec.min_seconds, spec.max_seconds)
    utt_shift = utt_rng.uniform(0.97, 1.03)
    secondary_amp = utt_rng.uniform(0.35, 0.65)
    snr_db = spec.snr_db + utt_rng.uniform(-4.0, 4.0)
    tremolo_hz = TREMOLO_HZ * utt_rng.uniform(0.7, 1.3)
    tremolo_phase = utt_rng.uniform(0.0, 2.0 * np.pi)
    n = int(round(seconds * spec.sample_rate_hz))
    t = np.arange(n) / spec.sample_rate_hz

    signal = np.zeros(n)
    for j, (freq, depth) in enumerate(signature):
        amp = 1.0 if j == 0 else secondary_amp
        tone = np.sin(2.0 * np.pi * freq * speaker_shift * utt_shift * t + phases[j])
        if depth > 0:
            mod = np.sin(2.0 * np.pi * tremolo_hz * t + tremolo_phase)
            tone *= (1.0 + depth * mod) / (1.0 + depth)
        signal += amp * tone

    # context: every other class's bands at a random lower level that
    # wanders slowly within the utterance. All bands are audible in every
    # utterance; class identity is which band dominates, not which exists.
    for other in range(spec.n_classes):
        if other == class_idx:
            continue
        for j, (freq, _depth) in enumerate(spec.class_signatures[other]):
            level = utt_rng.uniform(*CONTEXT_LEVEL) * (1.0 if j == 0 else 0.7)
            phase = utt_rng.uniform(0.0, 2.0 * np.pi)
            wander_depth = utt_rng.uniform(0.3, 0.7)
            wander = np.sin(2.0 * np.pi * utt_rng.uniform(0.2, 1.5) * t
                            + utt_rng.uniform(0.0, 2.0 * np.pi))
            envelope = level * (1.0 + wander_depth * wander) / (1.0 + wander_depth)
            signal += envelope * np.sin(2.0 * np.pi * freq * utt_shift * t + phase)
    signal *= 0.5 / np.max(np.abs(signal))

    # noise floor with a random smooth spectral tilt per utterance: the
    # floor varies utterance to utterance in every mel channel while
    # staying far below the tone bands
    noise = utt_rng.normal(0.0, 1.0, size=n)
    spectrum = np.fft.rfft(noise)
    knots = utt_rng.uniform(-TILT_RANGE, TILT_RANGE, size=6)
    envelope = np.interp(np.linspace(0.0, 5.0, len(spectrum)), np.arange(6.0), knots)
    noise = np.fft.irfft(spectrum * np.exp(envelope), n)

    rms = np.sqrt(np.mean(signal ** 2))
    target_rms = rms / 10.0 ** (snr_db / 20.0)
    noise *= target_rms / np.sqrt(np.mean(noise ** 2))
    x = signal + noise
    peak = np.max(np.abs(x))
    if peak > 0.999:
        x *= 0.999 / peak
    return AudioClip(x, spec.sample_rate_hz)


def generate(spec: SynthSpec, out_dir) -> Manifest:
    """Write WAV files under out_dir/wav/ and a manifest.jsonl next to
    them; returns the manifest. Bit-identical for a fixed spec."""
    out_dir = Path(out_dir)
    (out_dir / "wav").mkdir(parents=True, exist_ok=True)

    records = []
    sentence = 0
    for ci in range(spec.n_classes):
        accent = ACCENTS[ci]
        for si in range(spec.speakers_per_class):
            speaker = "%s_s%02d" % (accent, si)
            gender = "female" if si % 2 == 0 else "male"
            for ui in range(spec.utterances_per_speaker):
                rel = "wav/%s_u%03d.wav" % (speaker, ui)
                clip = render_utterance(spec, ci, speaker_tag=speaker, utt_tag=rel)
                write_wav(clip, out_dir / rel)
                sentence += 1
                records.append(UtteranceRecord(
                    path=rel, speaker_id=speaker, accent=accent, gender=gender,
                    sentence_id=(sentence - 1) % 1132 + 1))
    manifest = Manifest(records=tuple(records),
                        class_set=tuple(ACCENTS[:spec.n_classes]))
    save_manifest(manifest, out_dir / "manifest.jsonl")
    return manifest
