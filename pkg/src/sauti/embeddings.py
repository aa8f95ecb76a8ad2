"""Per-utterance embeddings (the GRU's final hidden state) and their 2-D
PCA projection, exported as CSV or a simple SVG scatter plot.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import ACCENTS
from .errors import ArgumentError, FormatError, ShapeError
from .model import ModelParams, embed_sequence

PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd")


@dataclass(frozen=True)
class EmbeddingSet:
    paths: tuple
    accents: tuple
    vectors: np.ndarray  # (N, m)

    def __post_init__(self):
        vectors = np.asarray(self.vectors, dtype=np.float64)
        object.__setattr__(self, "vectors", vectors)
        if vectors.ndim != 2:
            raise ArgumentError("vectors must be an (N, m) matrix")
        if not (len(self.paths) == len(self.accents) == vectors.shape[0]):
            raise ArgumentError("paths, accents, vectors must align")
        if not np.all(np.isfinite(vectors)):
            raise ArgumentError("embedding vectors contain non-finite values")

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # (k, m); zero rows pad a rank-deficient fit
    explained_variance: np.ndarray  # (k,) descending
    rank_deficient: bool = False


def extract_embeddings(params: ModelParams, dataset) -> EmbeddingSet:
    """One embedding per utterance: eval-mode final hidden state over the
    full feature sequence (the same h the classifier head consumes)."""
    vectors = np.empty((len(dataset), params.hidden_size))
    accents = []
    for i in range(len(dataset)):
        vectors[i] = embed_sequence(params, dataset.full_features(i))
        accents.append(dataset.class_set[dataset.labels[i]])
    return EmbeddingSet(paths=tuple(dataset.names), accents=tuple(accents),
                        vectors=vectors)


def pca_fit(emb: EmbeddingSet, k: int = 2) -> PcaModel:
    """PCA via SVD of the mean-centered data matrix.

    explained_variance is (singular value)^2 / (N - 1). When the data has
    fewer than k informative directions, the available components are
    returned, the rest are zero-padded, and rank_deficient is set. Sign
    convention: the largest-magnitude coordinate of each component is
    positive, so fits are reproducible.
    """
    X = emb.vectors
    n_rows, dim = X.shape
    if n_rows < 2:
        raise ArgumentError("PCA needs at least 2 rows, got %d" % n_rows)
    if k < 1 or k > dim:
        raise ArgumentError("k must lie in 1..%d" % dim)

    mean = X.mean(axis=0)
    centered = X - mean
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    if s.size and s[0] > 0:
        rank = int(np.sum(s > s[0] * max(n_rows, dim) * np.finfo(np.float64).eps))
    else:
        rank = 0
    avail = min(k, rank, n_rows - 1)

    components = np.zeros((k, dim))
    explained = np.zeros(k)
    components[:avail] = vt[:avail]
    explained[:avail] = s[:avail] ** 2 / (n_rows - 1)
    for row in components[:avail]:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    return PcaModel(mean=mean, components=components,
                    explained_variance=explained, rank_deficient=avail < k)


def pca_project(model: PcaModel, emb: EmbeddingSet) -> np.ndarray:
    """Project embeddings onto the fitted components: p = C (h - mean)."""
    if emb.dim != model.mean.shape[0]:
        raise ShapeError("embeddings have dim %d, PCA model has %d"
                         % (emb.dim, model.mean.shape[0]))
    return (emb.vectors - model.mean) @ model.components.T


# ---------------------------------------------------------------------------
# file formats

def save_embeddings_csv(emb: EmbeddingSet, path) -> None:
    """CSV with header path,accent,h0..h{m-1}; %.17g keeps float64 exact."""
    m = emb.dim
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("path,accent," + ",".join("h%d" % j for j in range(m)) + "\n")
        for i in range(len(emb.paths)):
            values = ",".join("%.17g" % v for v in emb.vectors[i])
            fh.write("%s,%s,%s\n" % (emb.paths[i], emb.accents[i], values))


def load_embeddings_csv(path) -> EmbeddingSet:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split(",")
        if header[:2] != ["path", "accent"] or len(header) < 3:
            raise FormatError("not an embedding CSV: %s" % path)
        m = len(header) - 2
        paths, accents, rows = [], [], []
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != m + 2:
                raise FormatError("line %d: expected %d fields, got %d"
                                  % (lineno, m + 2, len(parts)))
            paths.append(parts[0])
            accents.append(parts[1])
            rows.append([float(v) for v in parts[2:]])
    return EmbeddingSet(paths=tuple(paths), accents=tuple(accents),
                        vectors=np.array(rows, dtype=np.float64))


def export_scatter(paths, accents, projected, out_path, format: str = "csv") -> None:
    """Write the 2-D projection: CSV columns path,accent,pc1,pc2, or an SVG
    scatter with one circle marker per row colored per accent."""
    projected = np.asarray(projected, dtype=np.float64)
    if projected.ndim != 2 or projected.shape[1] != 2:
        raise ArgumentError("projected rows must be (N, 2)")
    if len(paths) != projected.shape[0] or len(accents) != projected.shape[0]:
        raise ArgumentError("paths, accents, projection must align")
    if projected.shape[0] < 1:
        raise ArgumentError("nothing to export")
    if format == "csv":
        _scatter_csv(paths, accents, projected, out_path)
    elif format == "svg":
        _scatter_svg(paths, accents, projected, out_path)
    else:
        raise ArgumentError("format must be 'csv' or 'svg'")


def _scatter_csv(paths, accents, projected, out_path):
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write("path,accent,pc1,pc2\n")
        for path, accent, (p1, p2) in zip(paths, accents, projected):
            fh.write("%s,%s,%.17g,%.17g\n" % (path, accent, p1, p2))


def _scatter_svg(paths, accents, projected, out_path,
                 width: int = 640, height: int = 480, margin: int = 40):
    present = [a for a in ACCENTS if a in set(accents)]
    present += sorted(set(accents) - set(present))  # tolerate non-canonical labels
    color = {a: PALETTE[i % len(PALETTE)] for i, a in enumerate(present)}

    lo = projected.min(axis=0)
    hi = projected.max(axis=0)
    span = np.where(hi - lo > 0, hi - lo, 1.0)

    def to_px(p):
        x = margin + (p[0] - lo[0]) / span[0] * (width - 2 * margin)
        y = height - margin - (p[1] - lo[1]) / span[1] * (height - 2 * margin)
        return x, y

    parts = [
        '<svg xmlns="http://www.w3.org/2000/svg" width="%d" height="%d" '
        'viewBox="0 0 %d %d">' % (width, height, width, height),
        '<rect width="%d" height="%d" fill="white"/>' % (width, height),
    ]
    for accent, p in zip(accents, projected):
        x, y = to_px(p)
        parts.append('<circle cx="%.2f" cy="%.2f" r="3.5" fill="%s" '
                     'fill-opacity="0.75"/>' % (x, y, color[accent]))
    for i, accent in enumerate(present):
        y = margin + 18 * i
        parts.append('<rect x="%d" y="%d" width="10" height="10" fill="%s"/>'
                     % (width - margin - 110, y, color[accent]))
        parts.append('<text x="%d" y="%d" font-family="sans-serif" '
                     'font-size="12">%s</text>'
                     % (width - margin - 95, y + 9, accent))
    parts.append("</svg>")
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")
