"""Test-set scoring: accuracy, macro F1, per-class F1, confusion matrix,
and the untrained random-weight baseline the trained models are compared
against.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError
from .model import ModelParams, init_model, predict_logits


@dataclass
class EvalReport:
    accuracy: float
    f1_macro: float
    per_class_f1: dict
    confusion: np.ndarray  # (C, C) ints, rows = true, cols = predicted
    n_samples: int
    class_set: tuple
    failures: list = field(default_factory=list)

    def to_json(self) -> str:
        obj = {
            "accuracy": self.accuracy,
            "f1_macro": self.f1_macro,
            "per_class_f1": {k: self.per_class_f1[k] for k in sorted(self.per_class_f1)},
            "confusion": self.confusion.tolist(),
            "n_samples": self.n_samples,
            "classes": list(self.class_set),
            "failures": [list(f) for f in self.failures],
        }
        return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def confusion_matrix(y_true, y_pred, n_classes: int) -> np.ndarray:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise ArgumentError("y_true and y_pred must align")
    conf = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(conf, (y_true, y_pred), 1)
    return conf


def metrics_from_confusion(conf: np.ndarray, class_set) -> "EvalReport":
    """Assemble the report from a confusion matrix alone.

    Per-class F1 uses the zero-division -> 0 convention; classes absent
    from both the truth and the predictions are excluded from the macro
    mean (they carry no information) but still appear in the map as 0.
    """
    conf = np.asarray(conf, dtype=np.int64)
    n = int(conf.sum())
    tp = np.diag(conf).astype(np.float64)
    actual = conf.sum(axis=1).astype(np.float64)
    predicted = conf.sum(axis=0).astype(np.float64)

    f1 = np.zeros(len(class_set))
    counted = []
    for i in range(len(class_set)):
        if actual[i] == 0 and predicted[i] == 0:
            continue
        denom = actual[i] + predicted[i]  # 2*tp + fp + fn
        f1[i] = 2.0 * tp[i] / denom if denom > 0 else 0.0
        counted.append(i)
    f1_macro = float(np.mean(f1[counted])) if counted else 0.0
    accuracy = float(tp.sum() / n) if n else 0.0
    return EvalReport(
        accuracy=accuracy, f1_macro=f1_macro,
        per_class_f1={label: float(f1[i]) for i, label in enumerate(class_set)},
        confusion=conf, n_samples=n, class_set=tuple(class_set))


def predict_dataset(params: ModelParams, dataset, chunked: bool = False,
                    chunk_seconds: float = 3.0) -> np.ndarray:
    """Argmax predictions, one per utterance, scored in eval mode on the
    full feature sequence (or the deterministic offset-0 chunk when
    chunked=True)."""
    preds = np.empty(len(dataset), dtype=np.int64)
    for i in range(len(dataset)):
        frames = (dataset.eval_features(i, chunk_seconds) if chunked
                  else dataset.full_features(i))
        preds[i] = int(np.argmax(predict_logits(params, frames)))
    return preds


def evaluate(params: ModelParams, dataset, chunked: bool = False,
             chunk_seconds: float = 3.0, failures=None) -> EvalReport:
    """Score a dataset and assemble the EvalReport."""
    if tuple(params.class_set) != tuple(dataset.class_set):
        raise ArgumentError(
            "checkpoint classes %r do not match dataset classes %r"
            % (params.class_set, dataset.class_set))
    if len(dataset) == 0:
        raise ArgumentError("cannot evaluate an empty dataset")
    preds = predict_dataset(params, dataset, chunked, chunk_seconds)
    conf = confusion_matrix(dataset.labels, preds, len(dataset.class_set))
    report = metrics_from_confusion(conf, dataset.class_set)
    report.failures = list(failures or [])
    return report


def base_model(n_channels: int, hidden_size: int, class_set, seed: int = 42,
               use_batchnorm: bool = False, frontend: str = "mel") -> ModelParams:
    """The untrained baseline: randomly initialized GRU and head (identity
    batch norm when enabled), reproducible from the seed."""
    return init_model(n_channels=n_channels, hidden_size=hidden_size,
                      class_set=class_set, use_batchnorm=use_batchnorm,
                      seed=seed, frontend=frontend)
