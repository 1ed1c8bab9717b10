import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from floodgate.dataset import (
    NUM_FEATURES,
    Dataset,
    LabeledRecord,
    NormalizationStats,
    TrafficClass,
)
from floodgate.errors import (
    BadMagic,
    CorruptModel,
    DimensionMismatch,
    EmptyBatch,
    EmptyDataset,
    NonFiniteLoss,
    VersionMismatch,
)
from floodgate.mlp import (
    ACT_SOFTMAX,
    ACT_TANH,
    HIDDEN_UNITS,
    INPUT_UNITS,
    OUTPUT_UNITS,
    DenseLayer,
    MlpModel,
    TrainConfig,
    cross_entropy_loss,
    forward,
    glorot_limit,
    gradients,
    init_model,
    load_model,
    predict,
    predict_batch,
    save_model,
    softmax,
    tanh_activate,
    train,
)

UNIT_NORM = NormalizationStats(np.zeros(NUM_FEATURES), np.ones(NUM_FEATURES))


def random_model(seed):
    return init_model(seed, UNIT_NORM)


def random_batch(rng, size):
    return [
        LabeledRecord(rng.normal(size=NUM_FEATURES), TrafficClass(int(rng.integers(0, 5))))
        for _ in range(size)
    ]


def batch_loss(model, batch):
    return float(
        np.mean([cross_entropy_loss(forward(model, r.features), r.label) for r in batch])
    )


def finite_difference_check(model, batch, h=1e-5, tol=1e-6):
    """Central-difference oracle over every parameter; returns worst relative error."""
    grads = gradients(model, batch)
    worst = 0.0
    for arr, grad in (
        (model.hidden.weights, grads.hidden_w),
        (model.hidden.biases, grads.hidden_b),
        (model.output.weights, grads.output_w),
        (model.output.biases, grads.output_b),
    ):
        flat = arr.reshape(-1)
        gflat = grad.reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + h
            up = batch_loss(model, batch)
            flat[i] = keep - h
            down = batch_loss(model, batch)
            flat[i] = keep
            numeric = (up - down) / (2 * h)
            rel = abs(gflat[i] - numeric) / max(1.0, abs(gflat[i]))
            worst = max(worst, rel)
            assert rel < tol, f"param {i}: analytic {gflat[i]} vs numeric {numeric}"
    return worst


class TestInit:
    def test_deterministic(self):
        a, b = random_model(42), random_model(42)
        assert np.array_equal(a.hidden.weights, b.hidden.weights)
        assert np.array_equal(a.output.weights, b.output.weights)

    def test_seeds_differ(self):
        a, b = random_model(1), random_model(2)
        assert not np.array_equal(a.hidden.weights, b.hidden.weights)

    def test_biases_zero(self):
        m = random_model(0)
        assert np.all(m.hidden.biases == 0)
        assert np.all(m.output.biases == 0)

    def test_glorot_bounds(self):
        m = random_model(5)
        l1 = math.sqrt(6 / (INPUT_UNITS + HIDDEN_UNITS))
        l2 = math.sqrt(6 / (HIDDEN_UNITS + OUTPUT_UNITS))
        assert glorot_limit(INPUT_UNITS, HIDDEN_UNITS) == pytest.approx(l1)
        assert glorot_limit(INPUT_UNITS, HIDDEN_UNITS) == pytest.approx(0.21483, abs=1e-5)
        assert np.abs(m.hidden.weights).max() <= l1
        assert np.abs(m.output.weights).max() <= l2
        # With thousands of uniform draws the max should approach the bound.
        assert np.abs(m.hidden.weights).max() > 0.9 * l1

    def test_shape_validation(self):
        with pytest.raises(ValueError):
            MlpModel(
                hidden=DenseLayer(np.zeros((10, INPUT_UNITS)), np.zeros(10), ACT_TANH),
                output=DenseLayer(np.zeros((OUTPUT_UNITS, 10)), np.zeros(OUTPUT_UNITS), ACT_SOFTMAX),
                norm=UNIT_NORM,
            )


class TestActivations:
    def test_tanh_zero(self):
        assert tanh_activate(0.0) == 0.0

    def test_tanh_reference_value(self):
        assert tanh_activate(1.0) == pytest.approx(0.7615941559557649, abs=1e-15)

    @given(x=st.floats(-50, 50, allow_nan=False))
    def test_tanh_odd_and_bounded(self, x):
        assert tanh_activate(-x) == -tanh_activate(x)
        assert -1.0 < tanh_activate(x) < 1.0

    def test_tanh_strict_bounds_when_saturated(self):
        assert tanh_activate(1000.0) < 1.0
        assert tanh_activate(-1000.0) > -1.0

    def test_softmax_uniform_on_constant(self):
        for c in (-3.0, 0.0, 7.5):
            assert np.allclose(softmax([c] * 5), 0.2, atol=1e-15)

    def test_softmax_reference_value(self):
        # Direct evaluation: p0 = e / (e + 4), others 1 / (e + 4).
        p = softmax([1.0, 0.0, 0.0, 0.0, 0.0])
        e = math.exp(1.0)
        assert p[0] == pytest.approx(e / (e + 4), abs=1e-12)
        assert p[1] == pytest.approx(1 / (e + 4), abs=1e-12)

    @given(
        z=st.lists(st.floats(-100, 100, allow_nan=False), min_size=5, max_size=5),
        shift=st.floats(-200, 200, allow_nan=False),
    )
    def test_softmax_contract(self, z, shift):
        p = softmax(z)
        assert abs(p.sum() - 1.0) <= 1e-12
        assert np.all(p > 0) and np.all(p < 1)
        assert np.allclose(softmax(np.asarray(z) + shift), p, atol=1e-12)

    def test_softmax_extreme_logits_stable(self):
        p = softmax([800.0, 0.0, -800.0, 0.0, 0.0])
        assert np.isfinite(p).all()
        assert p.sum() == pytest.approx(1.0, abs=1e-12)


class TestForwardPredict:
    def test_zero_model_is_uniform(self):
        m = random_model(0)
        m.hidden.weights[:] = 0
        m.output.weights[:] = 0
        p = forward(m, np.zeros(NUM_FEATURES))
        assert np.allclose(p, 0.2, atol=1e-15)
        assert predict(m, np.zeros(NUM_FEATURES)) is TrafficClass.NORMAL

    def test_wrong_length_rejected(self):
        m = random_model(0)
        with pytest.raises(DimensionMismatch):
            forward(m, np.zeros(23))

    def test_probability_contract(self, rng):
        m = random_model(3)
        for _ in range(20):
            p = forward(m, rng.normal(size=NUM_FEATURES))
            assert abs(p.sum() - 1.0) <= 1e-12
            assert np.all(p > 0) and np.all(p < 1)

    def test_argmax_semantics(self):
        m = random_model(0)
        m.hidden.weights[:] = 0
        m.output.weights[:] = 0
        m.output.biases[:] = [0.1, 2.0, 0.1, 0.1, 0.1]
        assert predict(m, np.zeros(NUM_FEATURES)) is TrafficClass.SYN_FLOOD

    def test_monotone_logit_transform_preserves_predictions(self, rng):
        m = random_model(9)
        scaled = MlpModel(
            hidden=DenseLayer(m.hidden.weights.copy(), m.hidden.biases.copy(), ACT_TANH),
            output=DenseLayer(3.0 * m.output.weights, 3.0 * m.output.biases + 0.7, ACT_SOFTMAX),
            norm=m.norm,
        )
        for _ in range(30):
            x = rng.normal(size=NUM_FEATURES)
            assert predict(m, x) is predict(scaled, x)

    def test_predict_batch_matches_predict(self, rng):
        m = random_model(4)
        xs = rng.normal(size=(40, NUM_FEATURES))
        batched = predict_batch(m, xs)
        assert [int(predict(m, x)) for x in xs] == batched.tolist()


class TestCrossEntropy:
    def test_uniform_is_ln5(self):
        assert cross_entropy_loss([0.2] * 5, TrafficClass.ACK_FLOOD) == pytest.approx(
            math.log(5), abs=1e-9
        )

    def test_perfect_prediction(self):
        assert cross_entropy_loss([0, 1, 0, 0, 0], TrafficClass.SYN_FLOOD) == 0.0

    def test_zero_probability_clamped(self):
        loss = cross_entropy_loss([1, 0, 0, 0, 0], TrafficClass.UDP_FLOOD)
        assert loss == pytest.approx(-math.log(1e-15), abs=1e-9)
        assert loss == pytest.approx(34.538776394910684, abs=1e-9)


class TestGradients:
    def test_empty_batch(self):
        with pytest.raises(EmptyBatch):
            gradients(random_model(0), [])

    def test_finite_difference_small_sweep(self, rng):
        # The full sweep over >=5 models lives in the acceptance suite; keep
        # one pair here so module tests stay fast.
        model = random_model(11)
        batch = random_batch(rng, 6)
        worst = finite_difference_check(model, batch)
        assert worst < 1e-6

    def test_duplicated_batch_mean_invariance(self, rng):
        model = random_model(12)
        batch = random_batch(rng, 5)
        g1 = gradients(model, batch)
        g2 = gradients(model, batch + batch)
        for a, b in (
            (g1.hidden_w, g2.hidden_w),
            (g1.hidden_b, g2.hidden_b),
            (g1.output_w, g2.output_w),
            (g1.output_b, g2.output_b),
        ):
            assert np.allclose(a, b, rtol=1e-12, atol=1e-12)

    def test_saturated_correct_prediction_has_zero_output_bias_gradient(self, rng):
        model = random_model(13)
        model.hidden.weights[:] = 0
        model.output.weights[:] = 0
        model.output.biases[:] = [-800, -800, 800, -800, -800]
        batch = [
            LabeledRecord(rng.normal(size=NUM_FEATURES), TrafficClass.ACK_FLOOD)
            for _ in range(4)
        ]
        grads = gradients(model, batch)
        assert np.allclose(grads.output_b, 0.0, atol=1e-12)


def separable_dataset(rng, n, spread=0.4):
    """Two well-separated clusters labeled normal / SYN flood."""
    feats = np.zeros((n, NUM_FEATURES))
    labels = np.zeros(n, dtype=np.int64)
    half = n // 2
    feats[:half] = rng.normal(-2.0, spread, size=(half, NUM_FEATURES))
    feats[half:] = rng.normal(2.0, spread, size=(n - half, NUM_FEATURES))
    labels[half:] = int(TrafficClass.SYN_FLOOD)
    order = rng.permutation(n)
    return Dataset(feats[order], labels[order])


def nearest_centroid_accuracy(train_ds, val_ds):
    c0 = train_ds.features[train_ds.labels == 0].mean(axis=0)
    c1 = train_ds.features[train_ds.labels == 1].mean(axis=0)
    d0 = np.linalg.norm(val_ds.features - c0, axis=1)
    d1 = np.linalg.norm(val_ds.features - c1, axis=1)
    predicted = (d1 < d0).astype(np.int64)
    return float(np.mean(predicted == val_ds.labels))


class TestTrain:
    def test_separable_two_class_reaches_99_percent(self, rng):
        train_ds = separable_dataset(rng, 150)
        val_ds = separable_dataset(rng, 50)
        # The clusters really are separable: a nearest-centroid classifier
        # built only from the training data gets validation exactly right.
        assert nearest_centroid_accuracy(train_ds, val_ds) == 1.0
        cfg = TrainConfig(epochs=50, seed=7)
        model, history = train(train_ds, val_ds, cfg)
        assert max(history.val_accuracy) >= 0.99
        normalized = (val_ds.features - model.norm.mean) / model.norm.std
        accuracy = float(np.mean(predict_batch(model, normalized) == val_ds.labels))
        assert accuracy >= 0.99

    def test_deterministic(self, rng):
        train_ds = separable_dataset(rng, 80)
        val_ds = separable_dataset(rng, 30)
        cfg = TrainConfig(epochs=5, seed=21)
        m1, h1 = train(train_ds, val_ds, cfg)
        m2, h2 = train(train_ds, val_ds, cfg)
        assert np.array_equal(m1.hidden.weights, m2.hidden.weights)
        assert np.array_equal(m1.output.weights, m2.output.weights)
        assert np.array_equal(m1.output.biases, m2.output.biases)
        assert h1.train_loss == h2.train_loss

    def test_huge_learning_rate_diverges(self, rng):
        train_ds = separable_dataset(rng, 60)
        val_ds = separable_dataset(rng, 20)
        with pytest.raises(NonFiniteLoss):
            train(train_ds, val_ds, TrainConfig(learning_rate=1e6, epochs=5, seed=0))

    def test_empty_dataset(self, rng):
        with pytest.raises(EmptyDataset):
            train(Dataset(), separable_dataset(rng, 20), TrainConfig(epochs=1))

    def test_small_lr_decreases_loss(self, rng):
        train_ds = separable_dataset(rng, 100, spread=1.5)
        val_ds = separable_dataset(rng, 40, spread=1.5)
        _, history = train(train_ds, val_ds, TrainConfig(learning_rate=1e-4, epochs=20, seed=3))
        assert history.train_loss[-1] < history.train_loss[0]

    def test_history_one_entry_per_epoch(self, rng):
        train_ds = separable_dataset(rng, 60)
        val_ds = separable_dataset(rng, 20)
        cfg = TrainConfig(epochs=4, seed=1, patience=100)
        _, history = train(train_ds, val_ds, cfg)
        assert len(history) == 4
        assert len(history.val_loss) == len(history.val_accuracy) == 4

    def test_early_stopping_can_shorten_training(self, rng):
        train_ds = separable_dataset(rng, 60)
        val_ds = separable_dataset(rng, 20)
        cfg = TrainConfig(epochs=400, seed=1, patience=3)
        _, history = train(train_ds, val_ds, cfg)
        assert len(history) < 400

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(learning_rate=0)
        with pytest.raises(ValueError):
            TrainConfig(epochs=0)
        with pytest.raises(ValueError):
            TrainConfig(batch_size=0)
        with pytest.raises(ValueError):
            TrainConfig(patience=-1)


class TestPersistence:
    def trained_fixture(self, rng):
        train_ds = separable_dataset(rng, 60)
        val_ds = separable_dataset(rng, 20)
        model, _ = train(train_ds, val_ds, TrainConfig(epochs=3, seed=5))
        return model

    def test_round_trip_exact(self, tmp_path, rng):
        model = self.trained_fixture(rng)
        path = tmp_path / "m.model"
        save_model(model, path)
        loaded = load_model(path)
        assert np.array_equal(loaded.hidden.weights, model.hidden.weights)
        assert np.array_equal(loaded.hidden.biases, model.hidden.biases)
        assert np.array_equal(loaded.output.weights, model.output.weights)
        assert np.array_equal(loaded.output.biases, model.output.biases)
        assert np.array_equal(loaded.norm.mean, model.norm.mean)
        assert np.array_equal(loaded.norm.std, model.norm.std)

    def test_round_trip_forward_bit_identical(self, tmp_path, rng):
        model = self.trained_fixture(rng)
        path = tmp_path / "m.model"
        save_model(model, path)
        loaded = load_model(path)
        for _ in range(100):
            x = rng.normal(size=NUM_FEATURES)
            assert np.array_equal(forward(model, x), forward(loaded, x))

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "m.model"
        path.write_text("NOT-A-MODEL v1\nlayers 24 106 5\n")
        with pytest.raises(BadMagic):
            load_model(path)

    def test_version_mismatch(self, tmp_path, rng):
        model = self.trained_fixture(rng)
        path = tmp_path / "m.model"
        save_model(model, path)
        lines = path.read_text().splitlines()
        lines[0] = "FLOODGATE-MLP v2"
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(VersionMismatch):
            load_model(path)

    def test_wrong_input_count(self, tmp_path, rng):
        model = self.trained_fixture(rng)
        path = tmp_path / "m.model"
        save_model(model, path)
        text = path.read_text().replace("layers 24 106 5", "layers 23 106 5", 1)
        path.write_text(text)
        with pytest.raises(CorruptModel):
            load_model(path)

    def test_truncated_file(self, tmp_path, rng):
        model = self.trained_fixture(rng)
        path = tmp_path / "m.model"
        save_model(model, path)
        content = path.read_text()
        path.write_text(content[: len(content) // 2])
        with pytest.raises(CorruptModel):
            load_model(path)

    def test_trailing_garbage(self, tmp_path, rng):
        model = self.trained_fixture(rng)
        path = tmp_path / "m.model"
        save_model(model, path)
        path.write_text(path.read_text() + "0.5 0.5\n")
        with pytest.raises(CorruptModel):
            load_model(path)

    def test_non_numeric_value(self, tmp_path, rng):
        model = self.trained_fixture(rng)
        path = tmp_path / "m.model"
        save_model(model, path)
        text = path.read_text()
        token = repr(float(model.hidden.weights[0, 0]))
        path.write_text(text.replace(token, "bogus", 1))
        with pytest.raises(CorruptModel):
            load_model(path)

    def test_bad_activations(self, tmp_path, rng):
        model = self.trained_fixture(rng)
        path = tmp_path / "m.model"
        save_model(model, path)
        path.write_text(path.read_text().replace("activations tanh softmax", "activations relu softmax"))
        with pytest.raises(CorruptModel):
            load_model(path)

    def test_non_positive_std(self, tmp_path, rng):
        model = self.trained_fixture(rng)
        model.norm.std[0] = 1.0
        path = tmp_path / "m.model"
        save_model(model, path)
        lines = path.read_text().splitlines()
        idx = next(i for i, l in enumerate(lines) if l.startswith("norm_std"))
        parts = lines[idx].split()
        parts[1] = "-1.0"
        lines[idx] = " ".join(parts)
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(CorruptModel):
            load_model(path)
