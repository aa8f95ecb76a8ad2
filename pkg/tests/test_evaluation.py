import json

import numpy as np
import pytest

from sauti.data import Dataset
from sauti.errors import ArgumentError
from sauti.evaluation import (
    base_model,
    confusion_matrix,
    evaluate,
    metrics_from_confusion,
    predict_dataset,
)
from sauti.features import FeatureSequence
from sauti.model import predict_logits

CLASSES = ("edo", "yoruba", "igbo")


def dataset_from_frames(frames_list, labels, prefix="x"):
    payloads = [FeatureSequence(f, 10.0, "external") for f in frames_list]
    names = ["%s_%d" % (prefix, i) for i in range(len(frames_list))]
    speakers = ["%s_s%d" % (prefix, i) for i in range(len(frames_list))]
    return Dataset(names, labels, payloads, speakers, CLASSES, "external")


class TestMetrics:
    def test_perfect_predictions(self):
        conf = confusion_matrix([0, 1, 2, 0], [0, 1, 2, 0], 3)
        report = metrics_from_confusion(conf, CLASSES)
        assert report.accuracy == 1.0
        assert report.f1_macro == 1.0

    def test_hand_worked_example(self):
        # true [0,0,1,2], pred [0,1,1,2]:
        #   class 0: tp=1 fp=0 fn=1 -> P=1,   R=1/2 -> F1=2/3
        #   class 1: tp=1 fp=1 fn=0 -> P=1/2, R=1   -> F1=2/3
        #   class 2: tp=1 fp=0 fn=0 -> F1=1
        conf = confusion_matrix([0, 0, 1, 2], [0, 1, 1, 2], 3)
        report = metrics_from_confusion(conf, CLASSES)
        assert report.accuracy == 0.75
        np.testing.assert_allclose(
            [report.per_class_f1[c] for c in CLASSES], [2 / 3, 2 / 3, 1.0])
        assert abs(report.f1_macro - 7 / 9) < 1e-12

    def test_constant_predictor_on_balanced_set(self):
        y_true = [0] * 10 + [1] * 10 + [2] * 10
        y_pred = [0] * 30
        report = metrics_from_confusion(confusion_matrix(y_true, y_pred, 3), CLASSES)
        assert abs(report.accuracy - 1 / 3) < 1e-12
        assert abs(report.f1_macro - 1 / 6) < 1e-12  # (0.5 + 0 + 0) / 3

    def test_f1_recomputable_from_confusion(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            conf = rng.integers(0, 20, (3, 3))
            report = metrics_from_confusion(conf, CLASSES)
            tp = np.diag(conf)
            f1 = []
            for i in range(3):
                denom = conf[i].sum() + conf[:, i].sum()
                f1.append(2 * tp[i] / denom if denom else 0.0)
            present = [i for i in range(3) if conf[i].sum() or conf[:, i].sum()]
            want = np.mean([f1[i] for i in present]) if present else 0.0
            assert abs(report.f1_macro - want) < 1e-12

    def test_accuracy_invariant_to_relabeling(self):
        rng = np.random.default_rng(2)
        y_true = rng.integers(0, 3, 60)
        y_pred = rng.integers(0, 3, 60)
        base = metrics_from_confusion(confusion_matrix(y_true, y_pred, 3), CLASSES)
        for perm in ([1, 2, 0], [2, 0, 1], [1, 0, 2]):
            p = np.array(perm)
            permuted = metrics_from_confusion(
                confusion_matrix(p[y_true], p[y_pred], 3), CLASSES)
            assert permuted.accuracy == base.accuracy

    def test_absent_class_skipped_from_macro(self):
        # class 2 never appears in truth or predictions; for the others,
        # F1 = 2*tp / (actual + predicted)
        conf = confusion_matrix([0, 0, 1], [0, 1, 1], 3)
        report = metrics_from_confusion(conf, CLASSES)
        f1_0 = 2 * 1 / (2 + 1)
        f1_1 = 2 * 1 / (1 + 2)
        assert abs(report.f1_macro - (f1_0 + f1_1) / 2) < 1e-12
        assert report.per_class_f1["igbo"] == 0.0

    def test_confusion_invariants(self):
        rng = np.random.default_rng(3)
        y_true = rng.integers(0, 3, 50)
        y_pred = rng.integers(0, 3, 50)
        conf = confusion_matrix(y_true, y_pred, 3)
        report = metrics_from_confusion(conf, CLASSES)
        assert conf.sum() == report.n_samples == 50
        assert report.accuracy == np.trace(conf) / 50


class TestEvaluate:
    def make_identity_setup(self):
        """Model whose prediction equals the dominant input channel."""
        params = base_model(n_channels=3, hidden_size=8, class_set=CLASSES, seed=0)
        rng = np.random.default_rng(4)
        frames, labels = [], []
        for c in range(3):
            for _ in range(5):
                f = rng.normal(0, 0.2, (12, 3))
                f[:, c] += 3.0
                frames.append(f)
                labels.append(c)
        return params, dataset_from_frames(frames, labels)

    def test_predictions_match_manual_forward(self):
        params, dataset = self.make_identity_setup()
        preds = predict_dataset(params, dataset)
        for i in range(len(dataset)):
            manual = int(np.argmax(predict_logits(params, dataset.full_features(i))))
            assert preds[i] == manual

    def test_report_assembled_from_predictions(self):
        params, dataset = self.make_identity_setup()
        preds = predict_dataset(params, dataset)
        report = evaluate(params, dataset)
        want = metrics_from_confusion(
            confusion_matrix(dataset.labels, preds, 3), CLASSES)
        assert report.accuracy == want.accuracy
        assert report.f1_macro == want.f1_macro

    def test_class_mismatch_rejected(self):
        params = base_model(n_channels=3, hidden_size=4, class_set=("edo", "igbo"), seed=0)
        _, dataset = self.make_identity_setup()
        with pytest.raises(ArgumentError):
            evaluate(params, dataset)

    def test_report_json_is_deterministic_and_parseable(self):
        params, dataset = self.make_identity_setup()
        report = evaluate(params, dataset)
        a, b = report.to_json(), report.to_json()
        assert a == b
        obj = json.loads(a)
        assert obj["n_samples"] == 15
        assert len(obj["confusion"]) == 3
        assert set(obj["per_class_f1"]) == set(CLASSES)

    def test_chunked_eval_uses_offset_zero(self):
        params, dataset = self.make_identity_setup()
        chunked = evaluate(params, dataset, chunked=True, chunk_seconds=1.0)
        again = evaluate(params, dataset, chunked=True, chunk_seconds=1.0)
        assert chunked.accuracy == again.accuracy


class TestBaseModel:
    def test_same_seed_identical(self):
        a = base_model(5, 8, CLASSES, seed=42)
        b = base_model(5, 8, CLASSES, seed=42)
        for (name, ta), (_, tb) in zip(a.trainable(), b.trainable()):
            assert np.array_equal(ta, tb), name

    def test_different_seed_differs(self):
        a = base_model(5, 8, CLASSES, seed=42)
        c = base_model(5, 8, CLASSES, seed=43)
        assert any(not np.array_equal(ta, tc)
                   for (_, ta), (_, tc) in zip(a.trainable(), c.trainable()))

    def test_batchnorm_identity_initialized(self):
        params = base_model(5, 8, CLASSES, seed=42, use_batchnorm=True)
        assert np.all(params.bn.gamma == 1.0)
        assert np.all(params.bn.beta == 0.0)
        assert np.all(params.bn.running_mean == 0.0)
        assert np.all(params.bn.running_var == 1.0)
