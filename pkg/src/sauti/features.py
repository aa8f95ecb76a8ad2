"""Feature frontends: the native 80-channel log-mel-spectrogram and a
binary container (SFT1) for externally precomputed feature sequences.

A feature sequence is a (u, n) time-major matrix: u frames, n channels.
The mel pipeline is Hann window -> power FFT -> per-bin floor at 1e-10 ->
triangular mel filterbank -> natural log. Frame rate is 1000 / hop_ms Hz.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .audio import AudioClip
from .errors import ArgumentError, ConfigurationError, FormatError

SFT1_MAGIC = b"SFT1"
POWER_FLOOR = 1e-10


@dataclass(frozen=True)
class FeatureSequence:
    """frames: (u, n) float64 matrix; source is "mel" or "external"."""

    frames: np.ndarray
    frame_rate_hz: float
    source: str

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float64)
        object.__setattr__(self, "frames", frames)
        if frames.ndim != 2 or frames.shape[0] < 1 or frames.shape[1] < 1:
            raise ArgumentError("frames must be a non-empty (u, n) matrix")
        if not np.all(np.isfinite(frames)):
            raise ArgumentError("frames contain non-finite values")
        if self.source not in ("mel", "external"):
            raise ArgumentError("source must be 'mel' or 'external'")

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def n_channels(self) -> int:
        return self.frames.shape[1]


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(n_fft: int = 512, n_mels: int = 80, f_min: float = 0.0,
                   f_max: float = 8000.0, sample_rate: int = 16000) -> np.ndarray:
    """Triangular filters on the mel scale, as an (n_mels, n_fft/2+1) matrix.

    Peaks sit at n_mels + 2 equally-mel-spaced points between f_min and
    f_max; filter m rises from point m to m+1 and falls to m+2. A filter
    whose sampled support is empty means the resolution is too coarse for
    the requested n_mels and raises ConfigurationError.
    """
    if not (0 <= f_min < f_max <= sample_rate / 2):
        raise ArgumentError("need 0 <= f_min < f_max <= sample_rate/2")
    n_bins = n_fft // 2 + 1
    bin_hz = np.arange(n_bins) * sample_rate / n_fft
    peaks_hz = mel_to_hz(np.linspace(hz_to_mel(f_min), hz_to_mel(f_max), n_mels + 2))

    fb = np.zeros((n_mels, n_bins))
    for m in range(n_mels):
        left, center, right = peaks_hz[m], peaks_hz[m + 1], peaks_hz[m + 2]
        rising = (bin_hz - left) / (center - left)
        falling = (right - bin_hz) / (right - center)
        fb[m] = np.maximum(0.0, np.minimum(rising, falling))
        if not fb[m].any():
            raise ConfigurationError(
                "mel filter %d is empty: n_mels=%d too large for n_fft=%d at %d Hz"
                % (m, n_mels, n_fft, sample_rate))
    return fb


def mel_spectrogram(clip: AudioClip, win_ms: float = 25.0, hop_ms: float = 10.0,
                    n_fft: int = 512, n_mels: int = 80) -> FeatureSequence:
    """Log-mel features of a 16 kHz clip.

    u = 1 + floor((t - win) / hop) full windows, no padding at the edges.
    The power spectrum is floored at 1e-10 per bin before the filterbank,
    so the output is finite for any finite input.
    """
    if clip.sample_rate_hz != 16000:
        raise ArgumentError("mel frontend expects 16 kHz audio, got %d Hz"
                            % clip.sample_rate_hz)
    win = int(round(win_ms * clip.sample_rate_hz / 1000.0))
    hop = int(round(hop_ms * clip.sample_rate_hz / 1000.0))
    if win > n_fft:
        raise ArgumentError("window of %d samples exceeds n_fft=%d" % (win, n_fft))
    x = clip.samples
    if len(x) < win:
        raise ArgumentError("clip of %d samples is shorter than one %d-sample window"
                            % (len(x), win))

    u = 1 + (len(x) - win) // hop
    starts = np.arange(u) * hop
    frames = x[starts[:, None] + np.arange(win)[None, :]]
    window = 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(win) / win)  # periodic Hann
    spectrum = np.fft.rfft(frames * window, n=n_fft, axis=1)
    power = np.maximum(spectrum.real ** 2 + spectrum.imag ** 2, POWER_FLOOR)

    fb = mel_filterbank(n_fft=n_fft, n_mels=n_mels, f_min=0.0,
                        f_max=clip.sample_rate_hz / 2, sample_rate=clip.sample_rate_hz)
    mel = np.log(power @ fb.T)
    return FeatureSequence(frames=mel, frame_rate_hz=1000.0 / hop_ms, source="mel")


def save_features(seq: FeatureSequence, path) -> None:
    """Write the SFT1 container: magic "SFT1", u and n as u32 LE, the frame
    rate as f32 LE, then u*n f32 LE values row-major (time-major)."""
    u, n = seq.frames.shape
    with open(path, "wb") as fh:
        fh.write(SFT1_MAGIC)
        fh.write(struct.pack("<IIf", u, n, seq.frame_rate_hz))
        fh.write(seq.frames.astype("<f4").tobytes())


def load_external_features(path) -> FeatureSequence:
    """Read an SFT1 file produced by any frontend; source becomes "external".

    Bad magic, truncated or oversized payloads, and non-finite values all
    raise FormatError.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 16 or data[:4] != SFT1_MAGIC:
        raise FormatError("not an SFT1 feature file: %s" % path)
    u, n, frame_rate = struct.unpack_from("<IIf", data, 4)
    if u < 1 or n < 1:
        raise FormatError("SFT1 header declares an empty %dx%d matrix" % (u, n))
    expected = 16 + 4 * u * n
    if len(data) != expected:
        raise FormatError("SFT1 payload is %d bytes, expected %d for %dx%d floats"
                          % (len(data) - 16, expected - 16, u, n))
    frames = np.frombuffer(data, dtype="<f4", offset=16).reshape(u, n).astype(np.float64)
    if not np.all(np.isfinite(frames)):
        raise FormatError("SFT1 payload contains non-finite values")
    return FeatureSequence(frames=frames, frame_rate_hz=float(frame_rate), source="external")


def random_chunk(clip: AudioClip, seconds: float = 3.0,
                 rng: np.random.Generator | None = None) -> AudioClip:
    """Contiguous random slice of exactly `seconds`, start offset uniform
    over valid positions. Clips shorter than the chunk are zero-padded at
    the end instead."""
    if seconds <= 0:
        raise ArgumentError("seconds must be positive")
    n = int(round(seconds * clip.sample_rate_hz))
    x = clip.samples
    if len(x) <= n:
        out = np.zeros(n, dtype=np.float64)
        out[:len(x)] = x
        return AudioClip(out, clip.sample_rate_hz)
    rng = np.random.default_rng() if rng is None else rng
    start = int(rng.integers(0, len(x) - n + 1))
    return AudioClip(x[start:start + n], clip.sample_rate_hz)


def random_frame_chunk(seq: FeatureSequence, seconds: float = 3.0,
                       rng: np.random.Generator | None = None) -> FeatureSequence:
    """Frame-domain analogue of random_chunk for precomputed features:
    a round(seconds * frame_rate)-frame slice, zero-padded if short."""
    if seconds <= 0:
        raise ArgumentError("seconds must be positive")
    n = int(round(seconds * seq.frame_rate_hz))
    frames = seq.frames
    if len(frames) <= n:
        out = np.zeros((n, frames.shape[1]), dtype=np.float64)
        out[:len(frames)] = frames
        return FeatureSequence(out, seq.frame_rate_hz, seq.source)
    rng = np.random.default_rng() if rng is None else rng
    start = int(rng.integers(0, len(frames) - n + 1))
    return FeatureSequence(frames[start:start + n], seq.frame_rate_hz, seq.source)
