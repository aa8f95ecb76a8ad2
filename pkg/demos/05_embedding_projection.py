"""Accent embeddings and their 2-D PCA projection.

Loads the checkpoint produced by 04_train_and_evaluate.py (runs it first
if needed), extracts the per-utterance embedding h for the test split,
fits a 2-component PCA, and exports the scatter as CSV and SVG.
"""

import runpy
from pathlib import Path

import numpy as np

from sauti.corpus import load_manifest
from sauti.data import build_dataset
from sauti.embeddings import export_scatter, extract_embeddings, pca_fit, pca_project
from sauti.model import load_checkpoint

out = Path(__file__).parent / "_out" / "train_demo"
if not (out / "best.sckp").exists():
    print("running the training demo first...")
    runpy.run_path(str(Path(__file__).parent / "04_train_and_evaluate.py"))

params = load_checkpoint(out / "best.sckp")
manifest = load_manifest(out / "manifest.jsonl")
test_set, _ = build_dataset(manifest, "test", out, params.frontend)

embeddings = extract_embeddings(params, test_set)
print("extracted %d embeddings of size %d" % (len(embeddings.paths), embeddings.dim))

model = pca_fit(embeddings, k=2)
projected = pca_project(model, embeddings)
print("explained variance: %.4f, %.4f (orthonormal components: %s)"
      % (model.explained_variance[0], model.explained_variance[1],
         bool(abs(model.components[0] @ model.components[1]) < 1e-9)))

labels = np.array([test_set.class_set.index(a) for a in embeddings.accents])
dist = np.sqrt(((projected[:, None, :] - projected[None, :, :]) ** 2).sum(axis=2))
same = labels[:, None] == labels[None, :]
upper = np.triu(np.ones_like(same), k=1)
print("mean intra-class distance %.3f vs inter-class %.3f"
      % (dist[same & upper].mean(), dist[~same & upper].mean()))

export_scatter(embeddings.paths, embeddings.accents, projected,
               out / "proj.csv", format="csv")
export_scatter(embeddings.paths, embeddings.accents, projected,
               out / "proj.svg", format="svg")
print("wrote %s and %s" % (out / "proj.csv", out / "proj.svg"))
