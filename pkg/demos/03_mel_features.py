"""The mel-spectrogram frontend and the SFT1 feature container.

Shows the filterbank geometry, featurizes a two-tone signal, and
round-trips the result through the binary feature format that external
(precomputed) frontends also use.
"""

from pathlib import Path

import numpy as np

from sauti.audio import AudioClip
from sauti.features import (
    hz_to_mel,
    load_external_features,
    mel_filterbank,
    mel_spectrogram,
    mel_to_hz,
    random_chunk,
    save_features,
)

fb = mel_filterbank()  # 80 triangles over 0..8 kHz at 16 kHz / 512 FFT
print("filterbank: %d filters x %d bins, all nonnegative: %s"
      % (fb.shape[0], fb.shape[1], bool(np.all(fb >= 0))))
centers = mel_to_hz(np.linspace(hz_to_mel(0), hz_to_mel(8000), 82))[1:-1]
print("first/last filter centers: %.1f Hz ... %.1f Hz" % (centers[0], centers[-1]))

rate = 16000
t = np.arange(4 * rate) / rate
signal = 0.5 * np.sin(2 * np.pi * 700.0 * t) + 0.2 * np.sin(2 * np.pi * 3200.0 * t)
clip = AudioClip(signal / np.max(np.abs(signal)) * 0.9, rate)

features = mel_spectrogram(clip)
print("mel features: %d frames x %d channels at %.0f frames/s"
      % (features.n_frames, features.n_channels, features.frame_rate_hz))
hot = int(np.bincount(np.argmax(features.frames, axis=1)).argmax())
print("hottest channel %d, center %.1f Hz (dominant tone at 700 Hz)"
      % (hot, centers[hot]))

# training samples are 3-second random crops drawn in the waveform domain
rng = np.random.default_rng(5)
chunk = random_chunk(clip, seconds=3.0, rng=rng)
print("random chunk: %.1f s -> %d frames" % (chunk.duration_s,
                                             mel_spectrogram(chunk).n_frames))

out = Path(__file__).parent / "_out"
out.mkdir(exist_ok=True)
save_features(features, out / "demo.sft1")
back = load_external_features(out / "demo.sft1")
print("SFT1 round trip: bit-exact = %s (%d bytes)"
      % (bool(np.array_equal(back.frames, features.frames.astype(np.float32))),
         (out / "demo.sft1").stat().st_size))
