import numpy as np
import pytest

from sauti.data import Dataset
from sauti.embeddings import (
    EmbeddingSet,
    export_scatter,
    extract_embeddings,
    load_embeddings_csv,
    pca_fit,
    pca_project,
    save_embeddings_csv,
)
from sauti.errors import ArgumentError
from sauti.evaluation import base_model, predict_dataset
from sauti.features import FeatureSequence
from sauti.model import head_forward

CLASSES = ("edo", "yoruba", "igbo")


def embedding_set(vectors, accents=None):
    vectors = np.asarray(vectors, dtype=np.float64)
    n = vectors.shape[0]
    accents = accents or tuple(CLASSES[i % 3] for i in range(n))
    paths = tuple("utt_%03d.wav" % i for i in range(n))
    return EmbeddingSet(paths=paths, accents=tuple(accents), vectors=vectors)


def toy_dataset(seed=0):
    rng = np.random.default_rng(seed)
    frames, labels = [], []
    for c in range(3):
        for _ in range(4):
            f = rng.normal(0, 0.3, (10, 3))
            f[:, c] += 2.5
            frames.append(f)
            labels.append(c)
    payloads = [FeatureSequence(f, 10.0, "external") for f in frames]
    names = ["u%d" % i for i in range(len(frames))]
    speakers = ["s%d" % i for i in range(len(frames))]
    return Dataset(names, labels, payloads, speakers, CLASSES, "external")


class TestExtractEmbeddings:
    def test_zero_weight_model_gives_zero_embeddings(self):
        params = base_model(3, 6, CLASSES, seed=0)
        for _name, t in params.trainable():
            t[...] = 0.0
        emb = extract_embeddings(params, toy_dataset())
        assert np.all(emb.vectors == 0.0)

    def test_identical_inputs_identical_rows(self):
        params = base_model(3, 6, CLASSES, seed=1)
        frames = np.random.default_rng(2).normal(0, 1, (8, 3))
        payloads = [FeatureSequence(frames, 10.0, "external")] * 3
        ds = Dataset(["a", "b", "c"], [0, 0, 0], payloads, ["s1", "s2", "s3"],
                     CLASSES, "external")
        emb = extract_embeddings(params, ds)
        assert np.array_equal(emb.vectors[0], emb.vectors[1])
        assert np.array_equal(emb.vectors[0], emb.vectors[2])

    def test_embedding_reproduces_eval_prediction(self):
        # cross-module consistency: argmax(W_o h + b_o) == evaluate's pred
        params = base_model(3, 6, CLASSES, seed=3)
        ds = toy_dataset(seed=4)
        emb = extract_embeddings(params, ds)
        preds = predict_dataset(params, ds)
        logits = head_forward(emb.vectors, params)
        np.testing.assert_array_equal(np.argmax(logits, axis=1), preds)

    def test_accent_labels_attached(self):
        params = base_model(3, 4, CLASSES, seed=5)
        ds = toy_dataset(seed=6)
        emb = extract_embeddings(params, ds)
        assert emb.accents[:4] == ("edo",) * 4


class TestPcaFit:
    def test_collinear_points_have_one_component(self):
        direction = np.array([1.0, 2.0, -2.0]) / 3.0
        ts = np.array([-3.0, -1.0, 0.5, 2.0, 4.0])
        emb = embedding_set(np.outer(ts, direction) + 7.0, accents=["edo"] * 5)
        model = pca_fit(emb, k=2)
        assert model.rank_deficient
        assert model.explained_variance[1] == 0.0
        assert model.explained_variance[0] > 0
        total = model.explained_variance.sum()
        assert model.explained_variance[0] / total == 1.0
        np.testing.assert_allclose(np.abs(model.components[0] @ direction), 1.0,
                                   atol=1e-12)

    def test_axis_aligned_variances(self):
        # construct data whose right singular vectors are exactly the axes
        rng = np.random.default_rng(7)
        n = 40
        basis, _ = np.linalg.qr(rng.normal(size=(n, 3)))
        sigmas = np.sqrt(np.array([4.0, 1.0, 0.25]) * (n - 1))
        data = basis[:, :3] * sigmas
        data -= data.mean(axis=0)  # qr columns are zero-mean only approximately
        # re-orthonormalize exactly after centering
        basis, _ = np.linalg.qr(data)
        data = basis * sigmas
        emb = embedding_set(data, accents=["edo"] * n)
        model = pca_fit(emb, k=2)
        np.testing.assert_allclose(model.explained_variance, [4.0, 1.0], atol=1e-9)
        np.testing.assert_allclose(np.abs(model.components),
                                   [[1, 0, 0], [0, 1, 0]], atol=1e-9)

    def test_rank2_reconstruction_exact(self):
        rng = np.random.default_rng(8)
        coords = rng.normal(0, 2, (12, 2))
        frame = np.linalg.qr(rng.normal(size=(5, 2)))[0].T  # (2, 5) orthonormal
        data = coords @ frame + rng.normal(0, 1, 5)
        emb = embedding_set(data, accents=["edo"] * 12)
        model = pca_fit(emb, k=2)
        projected = pca_project(model, emb)
        rebuilt = projected @ model.components + model.mean
        np.testing.assert_allclose(rebuilt, data, atol=1e-9)

    def test_orthonormal_and_ordered_on_random_data(self):
        for seed in range(5):
            rng = np.random.default_rng(seed)
            emb = embedding_set(rng.normal(0, 1, (30, 6)), accents=["edo"] * 30)
            model = pca_fit(emb, k=2)
            c = model.components
            assert abs(c[0] @ c[0] - 1) < 1e-9
            assert abs(c[1] @ c[1] - 1) < 1e-9
            assert abs(c[0] @ c[1]) < 1e-9
            assert model.explained_variance[0] >= model.explained_variance[1] >= 0

    def test_sign_convention_deterministic(self):
        rng = np.random.default_rng(9)
        data = rng.normal(0, 1, (20, 4))
        emb = embedding_set(data, accents=["edo"] * 20)
        a = pca_fit(emb, k=2)
        b = pca_fit(embedding_set(data, accents=["edo"] * 20), k=2)
        assert np.array_equal(a.components, b.components)
        for row in a.components:
            assert row[np.argmax(np.abs(row))] > 0

    def test_translation_invariance(self):
        rng = np.random.default_rng(10)
        data = rng.normal(0, 1, (25, 5))
        emb = embedding_set(data, accents=["edo"] * 25)
        shifted = embedding_set(data + np.arange(5), accents=["edo"] * 25)
        a, b = pca_fit(emb, k=2), pca_fit(shifted, k=2)
        np.testing.assert_allclose(b.components, a.components, atol=1e-9)
        np.testing.assert_allclose(b.explained_variance, a.explained_variance,
                                   atol=1e-9)
        np.testing.assert_allclose(b.mean - a.mean, np.arange(5), atol=1e-9)

    def test_too_few_rows_rejected(self):
        with pytest.raises(ArgumentError):
            pca_fit(embedding_set(np.zeros((1, 3)), accents=["edo"]), k=2)


class TestPcaProject:
    def test_mean_maps_to_origin(self):
        rng = np.random.default_rng(11)
        emb = embedding_set(rng.normal(0, 1, (15, 4)), accents=["edo"] * 15)
        model = pca_fit(emb, k=2)
        at_mean = embedding_set(model.mean[None, :].repeat(2, axis=0),
                                accents=["edo", "edo"])
        np.testing.assert_allclose(pca_project(model, at_mean), 0.0, atol=1e-12)

    def test_projection_variance_equals_explained(self):
        rng = np.random.default_rng(12)
        emb = embedding_set(rng.normal(0, 2, (40, 6)), accents=["edo"] * 40)
        model = pca_fit(emb, k=2)
        projected = pca_project(model, emb)
        np.testing.assert_allclose(projected.var(axis=0, ddof=1),
                                   model.explained_variance, atol=1e-6)

    def test_held_out_point_matches_matrix_arithmetic(self):
        rng = np.random.default_rng(13)
        emb = embedding_set(rng.normal(0, 1, (20, 5)), accents=["edo"] * 20)
        model = pca_fit(emb, k=2)
        point = rng.normal(0, 1, 5)
        held = embedding_set(point[None, :], accents=["edo"])
        want = model.components @ (point - model.mean)
        np.testing.assert_allclose(pca_project(model, held)[0], want, rtol=1e-12)


class TestExports:
    def test_embeddings_csv_round_trip(self, tmp_path):
        rng = np.random.default_rng(14)
        emb = embedding_set(rng.normal(0, 1, (6, 4)))
        p = tmp_path / "emb.csv"
        save_embeddings_csv(emb, p)
        back = load_embeddings_csv(p)
        assert back.paths == emb.paths
        assert back.accents == emb.accents
        np.testing.assert_array_equal(back.vectors, emb.vectors)

    def test_scatter_csv_single_row(self, tmp_path):
        p = tmp_path / "proj.csv"
        export_scatter(("a.wav",), ("edo",), np.array([[1.25, -3.5]]), p, "csv")
        lines = p.read_text().splitlines()
        assert lines[0] == "path,accent,pc1,pc2"
        assert len(lines) == 2

    def test_scatter_csv_round_trip_9_digits(self, tmp_path):
        rng = np.random.default_rng(15)
        proj = rng.normal(0, 1, (8, 2))
        paths = tuple("u%d.wav" % i for i in range(8))
        accents = tuple(CLASSES[i % 3] for i in range(8))
        p = tmp_path / "proj.csv"
        export_scatter(paths, accents, proj, p, "csv")
        rows = [line.split(",") for line in p.read_text().splitlines()[1:]]
        back = np.array([[float(r[2]), float(r[3])] for r in rows])
        np.testing.assert_allclose(back, proj, rtol=1e-9)

    def test_svg_marker_count(self, tmp_path):
        rng = np.random.default_rng(16)
        n = 17
        proj = rng.normal(0, 1, (n, 2))
        paths = tuple("u%d.wav" % i for i in range(n))
        accents = tuple(CLASSES[i % 3] for i in range(n))
        p = tmp_path / "proj.svg"
        export_scatter(paths, accents, proj, p, "svg")
        svg = p.read_text()
        assert svg.count("<circle") == n
        for accent in CLASSES:
            assert accent in svg  # legend entries

    def test_empty_export_rejected(self, tmp_path):
        with pytest.raises(ArgumentError):
            export_scatter((), (), np.zeros((0, 2)), tmp_path / "x.csv", "csv")
