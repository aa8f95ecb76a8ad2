"""Raw speech post-processing: WAV decode/encode, peak normalization,
silence trimming, and sample-rate conversion.

All DSP runs in float64; WAV files store 16-bit PCM. Every function is
pure (returns a new clip), so batches of files can be processed in
parallel without shared state.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    ArgumentError,
    DegenerateSignalError,
    FormatError,
    UnsupportedFormatError,
)

INT16_SCALE = 32768.0


@dataclass(frozen=True)
class AudioClip:
    """Mono waveform with amplitudes in [-1, 1].

    samples: float64 vector, non-empty.
    sample_rate_hz: positive integer (48000 on ingest, 16000 after resample).
    """

    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 1 or samples.size == 0:
            raise ArgumentError("clip must hold a non-empty 1-D sample vector")
        if not np.all(np.isfinite(samples)):
            raise ArgumentError("clip contains non-finite samples")
        if np.max(np.abs(samples)) > 1.0 + 1e-12:
            raise ArgumentError("clip samples exceed full scale [-1, 1]")
        if int(self.sample_rate_hz) <= 0:
            raise ArgumentError("sample rate must be positive")
        object.__setattr__(self, "sample_rate_hz", int(self.sample_rate_hz))

    def __len__(self):
        return len(self.samples)

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz


def decode_wav(data: bytes) -> AudioClip:
    """Decode a RIFF/WAVE byte stream (PCM, mono, 16-bit little-endian).

    Integer samples are scaled to [-1, 1] by dividing by 32768. Malformed
    containers raise FormatError; well-formed containers with a different
    encoding (channels != 1, bit depth != 16, non-PCM) raise
    UnsupportedFormatError.
    """
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise FormatError("not a RIFF/WAVE stream")

    fmt = None
    payload = None
    pos = 12
    while pos + 8 <= len(data):
        chunk_id = data[pos:pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        body = data[pos + 8:pos + 8 + size]
        if len(body) < size:
            raise FormatError("truncated chunk %r" % chunk_id)
        if chunk_id == b"fmt ":
            if size < 16:
                raise FormatError("fmt chunk too short")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif chunk_id == b"data":
            payload = body
        # chunks are word-aligned: odd sizes carry one pad byte
        pos += 8 + size + (size % 2)

    if fmt is None or payload is None:
        raise FormatError("missing fmt or data chunk")

    audio_format, channels, sample_rate, _byte_rate, _block_align, bits = fmt
    if audio_format != 1:
        raise UnsupportedFormatError("only PCM (format tag 1) is supported")
    if channels != 1:
        raise UnsupportedFormatError("only mono audio is supported, got %d channels" % channels)
    if bits != 16:
        raise UnsupportedFormatError("only 16-bit samples are supported, got %d" % bits)
    if sample_rate == 0:
        raise FormatError("sample rate is zero")
    if len(payload) % 2 != 0:
        raise FormatError("data chunk length is not a whole number of samples")
    if len(payload) == 0:
        raise FormatError("data chunk holds no samples")

    samples = np.frombuffer(payload, dtype="<i2").astype(np.float64) / INT16_SCALE
    return AudioClip(samples=samples, sample_rate_hz=int(sample_rate))


def encode_wav(clip: AudioClip) -> bytes:
    """Encode a clip as mono 16-bit PCM with the canonical 44-byte header.

    Quantization is round-to-nearest with clamping at int16 range, so
    decode_wav(encode_wav(clip)) is exact for 16-bit-quantized input.
    """
    ints = np.clip(np.round(clip.samples * INT16_SCALE), -32768, 32767).astype("<i2")
    payload = ints.tobytes()
    rate = clip.sample_rate_hz
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF", 36 + len(payload), b"WAVE",
        b"fmt ", 16, 1, 1, rate, rate * 2, 2, 16,
        b"data", len(payload),
    )
    return header + payload


def read_wav(path) -> AudioClip:
    with open(path, "rb") as fh:
        return decode_wav(fh.read())


def write_wav(clip: AudioClip, path) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_wav(clip))


def peak_normalize(clip: AudioClip, target_dbfs: float = -0.1) -> AudioClip:
    """Scale the clip so its peak amplitude equals 10^(target_dbfs/20).

    Sample ratios are preserved; an all-zero clip is rejected rather than
    divided by zero. Idempotent to within float rounding.
    """
    peak = float(np.max(np.abs(clip.samples)))
    if peak == 0.0:
        raise DegenerateSignalError("cannot normalize an all-zero clip")
    target = 10.0 ** (target_dbfs / 20.0)
    if target > 1.0:
        raise ArgumentError("target peak above full scale: %g dBFS" % target_dbfs)
    return AudioClip(clip.samples * (target / peak), clip.sample_rate_hz)


def trim_silence(clip: AudioClip, threshold_dbfs: float = -40.0,
                 frame_ms: float = 10.0) -> AudioClip:
    """Drop leading and trailing frames whose RMS falls below the threshold.

    Frames are contiguous frame_ms windows anchored at the clip start; the
    trailing frame may be shorter. Interior samples are untouched, and
    because cuts land on frame boundaries the operation is idempotent.
    A clip that is silent throughout raises DegenerateSignalError.
    """
    if frame_ms <= 0:
        raise ArgumentError("frame_ms must be positive")
    flen = max(1, int(round(frame_ms * clip.sample_rate_hz / 1000.0)))
    x = clip.samples
    n_frames = (len(x) + flen - 1) // flen
    threshold = 10.0 ** (threshold_dbfs / 20.0)

    loud = np.empty(n_frames, dtype=bool)
    for i in range(n_frames):
        frame = x[i * flen:(i + 1) * flen]
        loud[i] = math.sqrt(float(np.mean(frame * frame))) >= threshold

    if not loud.any():
        raise DegenerateSignalError("entire clip is below the silence threshold")

    first = int(np.argmax(loud))
    last = int(len(loud) - 1 - np.argmax(loud[::-1]))
    out = x[first * flen:min((last + 1) * flen, len(x))]
    return AudioClip(out, clip.sample_rate_hz)


def resample(clip: AudioClip, target_hz: int = 16000,
             zero_crossings: int = 32) -> AudioClip:
    """Convert the sample rate with windowed-sinc low-pass interpolation.

    The kernel is a Hann-windowed sinc with `zero_crossings` zero crossings
    per side at the lower of the two Nyquist rates, i.e. a half-width of
    ceil(zero_crossings / cutoff) input samples. Output length is
    round(len * target_hz / source_hz), rounding half up.
    """
    if target_hz <= 0:
        raise ArgumentError("target_hz must be positive")
    src = clip.sample_rate_hz
    if src == target_hz:
        return AudioClip(clip.samples.copy(), src)

    x = clip.samples
    n_out = int(math.floor(len(x) * target_hz / src + 0.5))
    if n_out == 0:
        raise ArgumentError("resampled clip would be empty")

    cutoff = min(1.0, target_hz / src)  # relative to the source Nyquist
    half = int(math.ceil(zero_crossings / cutoff))
    xpad = np.concatenate([np.zeros(half), x, np.zeros(half)])
    offsets = np.arange(1 - half, half + 1, dtype=np.float64)

    out = np.empty(n_out, dtype=np.float64)
    step = src / target_hz
    block = max(1, (1 << 22) // (2 * half))  # cap scratch memory per block
    for start in range(0, n_out, block):
        j = np.arange(start, min(start + block, n_out), dtype=np.float64)
        t = j * step
        base = np.floor(t).astype(np.int64)
        frac = (t - base)[:, None]
        u = offsets[None, :] - frac  # kernel argument in input samples
        taps = cutoff * np.sinc(cutoff * u) * (0.5 + 0.5 * np.cos(np.pi * u / half))
        idx = base[:, None] + offsets.astype(np.int64)[None, :] + half
        out[start:start + len(j)] = np.sum(xpad[idx] * taps, axis=1)

    np.clip(out, -1.0, 1.0, out=out)
    return AudioClip(out, int(target_hz))
