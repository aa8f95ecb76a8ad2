"""Post-processing a raw recording: decode, peak-normalize, trim, resample.

Synthesizes a "recording" (silence + tone + silence at 48 kHz), round-trips
it through the WAV codec, and walks it through the same cleanup applied to
corpus audio before feature extraction.
"""

import numpy as np

from sauti.audio import (
    decode_wav,
    encode_wav,
    peak_normalize,
    resample,
    trim_silence,
    AudioClip,
)

rate = 48000
t = np.arange(2 * rate) / rate
voiced = 0.31 * np.sin(2 * np.pi * 220.0 * t) * (1 + 0.2 * np.sin(2 * np.pi * 2.0 * t))
raw = np.concatenate([np.zeros(rate // 2), voiced, np.zeros(rate // 4)])
clip = AudioClip(raw, rate)
print("raw:        %d samples at %d Hz, peak %.3f, %.2f s"
      % (len(clip), clip.sample_rate_hz, np.max(np.abs(clip.samples)), clip.duration_s))

# the codec stores mono 16-bit PCM; quantized data round-trips exactly
wav_bytes = encode_wav(clip)
decoded = decode_wav(wav_bytes)
print("wav codec:  %d header+payload bytes, max round-trip error %.2e"
      % (len(wav_bytes), np.max(np.abs(decoded.samples - clip.samples))))

# peak normalization to -0.1 dBFS: every corpus file gets the same headroom
normalized = peak_normalize(decoded)
print("normalized: peak %.6f (target %.6f)"
      % (np.max(np.abs(normalized.samples)), 10 ** (-0.1 / 20)))

# leading/trailing silence removal (-40 dBFS RMS over 10 ms frames)
trimmed = trim_silence(normalized)
print("trimmed:    %.2f s -> %.2f s" % (normalized.duration_s, trimmed.duration_s))

# the feature frontend runs at 16 kHz; resampling is windowed-sinc
downsampled = resample(trimmed, 16000)
print("resampled:  %d samples at %d Hz" % (len(downsampled), downsampled.sample_rate_hz))

spectrum = np.abs(np.fft.rfft(downsampled.samples))
peak_hz = np.argmax(spectrum) * downsampled.sample_rate_hz / len(downsampled)
print("tone after resample: %.1f Hz (expected 220.0)" % peak_hz)
