"""sauti: accent classification and accent-embedding toolkit.

Pipeline stages: post-process raw WAV recordings, manage utterance
manifests with speaker-disjoint splits, extract mel-spectrogram (or ingest
precomputed) features, train a GRU encoder-classifier with exact analytic
gradients, evaluate against a random-weight baseline, and project learned
embeddings to 2-D with PCA.
"""

__version__ = "0.1.0"
