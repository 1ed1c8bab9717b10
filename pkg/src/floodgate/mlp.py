"""The 24-106-5 feed-forward classifier: forward pass, training, persistence.

One hidden layer of 106 tanh units, a 5-unit softmax output, categorical
cross-entropy, and Adam over seeded mini-batches. All arithmetic is float64
and every operation is deterministic for a given seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dataset import (
    NUM_CLASSES,
    NUM_FEATURES,
    Dataset,
    LabeledRecord,
    NormalizationStats,
    TrafficClass,
    apply_normalization,
    fit_normalization,
)
from .errors import (
    BadMagic,
    CorruptModel,
    DimensionMismatch,
    EmptyBatch,
    EmptyDataset,
    NonFiniteLoss,
    VersionMismatch,
)
from .ioutil import atomic_write

INPUT_UNITS = NUM_FEATURES
HIDDEN_UNITS = 106
OUTPUT_UNITS = NUM_CLASSES

ACT_TANH = "tanh"
ACT_SOFTMAX = "softmax"

MODEL_MAGIC = "FLOODGATE-MLP"
MODEL_VERSION = 1

LOSS_CLAMP = 1e-15


@dataclass
class DenseLayer:
    """Weights (out x in), biases (out,) and the activation applied on top."""

    weights: np.ndarray
    biases: np.ndarray
    activation: str

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.biases = np.asarray(self.biases, dtype=np.float64)
        if self.weights.ndim != 2 or self.biases.shape != (self.weights.shape[0],):
            raise ValueError("weight/bias shapes are inconsistent")
        if self.activation not in (ACT_TANH, ACT_SOFTMAX):
            raise ValueError(f"unknown activation {self.activation!r}")
        if not (np.isfinite(self.weights).all() and np.isfinite(self.biases).all()):
            raise ValueError("layer parameters must be finite")


@dataclass
class MlpModel:
    """The fixed 24-106-5 network plus the normalization fitted with it."""

    hidden: DenseLayer
    output: DenseLayer
    norm: NormalizationStats
    version: int = MODEL_VERSION

    def __post_init__(self):
        if self.hidden.weights.shape != (HIDDEN_UNITS, INPUT_UNITS):
            raise ValueError(f"hidden layer must be {HIDDEN_UNITS}x{INPUT_UNITS}")
        if self.hidden.activation != ACT_TANH:
            raise ValueError("hidden activation must be tanh")
        if self.output.weights.shape != (OUTPUT_UNITS, HIDDEN_UNITS):
            raise ValueError(f"output layer must be {OUTPUT_UNITS}x{HIDDEN_UNITS}")
        if self.output.activation != ACT_SOFTMAX:
            raise ValueError("output activation must be softmax")


def glorot_limit(fan_in: int, fan_out: int) -> float:
    return math.sqrt(6.0 / (fan_in + fan_out))


def init_model(seed: int, norm: NormalizationStats) -> MlpModel:
    """Fresh model: Glorot-uniform weights, zero biases, deterministic per seed."""
    rng = np.random.default_rng(seed)
    l1 = glorot_limit(INPUT_UNITS, HIDDEN_UNITS)
    l2 = glorot_limit(HIDDEN_UNITS, OUTPUT_UNITS)
    w1 = rng.uniform(-l1, l1, size=(HIDDEN_UNITS, INPUT_UNITS))
    w2 = rng.uniform(-l2, l2, size=(OUTPUT_UNITS, HIDDEN_UNITS))
    return MlpModel(
        hidden=DenseLayer(w1, np.zeros(HIDDEN_UNITS), ACT_TANH),
        output=DenseLayer(w2, np.zeros(OUTPUT_UNITS), ACT_SOFTMAX),
        norm=norm,
    )


def tanh_activate(x: float) -> float:
    """Hyperbolic tangent, kept strictly inside (-1, 1) even when saturated."""
    y = math.tanh(x)
    if y >= 1.0:
        return math.nextafter(1.0, 0.0)
    if y <= -1.0:
        return math.nextafter(-1.0, 0.0)
    return y


_OPEN_LO = 5e-324
_OPEN_HI = math.nextafter(1.0, 0.0)


def softmax(z) -> np.ndarray:
    """Max-shifted softmax: outputs strictly inside (0, 1), summing to 1.

    Extreme logit gaps would otherwise round entries to exactly 0 or 1;
    those are nudged to the nearest representable value inside the interval.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 1:
        raise DimensionMismatch("softmax expects a 1-d logit vector")
    e = np.exp(z - z.max())
    return np.clip(e / e.sum(), _OPEN_LO, _OPEN_HI)


def forward(m: MlpModel, x) -> np.ndarray:
    """Class probabilities for one already-normalized feature vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (INPUT_UNITS,):
        raise DimensionMismatch(f"expected {INPUT_UNITS} inputs, got shape {x.shape}")
    h = np.tanh(m.hidden.weights @ x + m.hidden.biases)
    return softmax(m.output.weights @ h + m.output.biases)


def predict(m: MlpModel, x) -> TrafficClass:
    """Argmax class; ties resolve to the lowest ordinal."""
    return TrafficClass(int(np.argmax(forward(m, x))))


def predict_batch(m: MlpModel, x_rows: np.ndarray) -> np.ndarray:
    """Vectorized predict over an (n, 24) matrix of normalized features."""
    x_rows = np.asarray(x_rows, dtype=np.float64)
    if x_rows.ndim != 2 or x_rows.shape[1] != INPUT_UNITS:
        raise DimensionMismatch(f"expected (n, {INPUT_UNITS}), got {x_rows.shape}")
    _, probs = _forward_batch(m.hidden.weights, m.hidden.biases, m.output.weights, m.output.biases, x_rows)
    return probs.argmax(axis=1)


def cross_entropy_loss(p, label: TrafficClass) -> float:
    """-ln of the probability assigned to the true class, clamped at 1e-15."""
    p = np.asarray(p, dtype=np.float64)
    return -math.log(max(float(p[int(label)]), LOSS_CLAMP))


@dataclass
class Gradients:
    """Mean-over-batch gradient for every parameter array."""

    hidden_w: np.ndarray
    hidden_b: np.ndarray
    output_w: np.ndarray
    output_b: np.ndarray


def _forward_batch(w1, b1, w2, b2, x_rows):
    h = np.tanh(x_rows @ w1.T + b1)
    z = h @ w2.T + b2
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=1, keepdims=True)
    return h, p


def _batch_gradients(w1, b1, w2, b2, x_rows, y):
    n = x_rows.shape[0]
    h, p = _forward_batch(w1, b1, w2, b2, x_rows)
    d2 = p.copy()
    d2[np.arange(n), y] -= 1.0
    d2 /= n
    gw2 = d2.T @ h
    gb2 = d2.sum(axis=0)
    d1 = (d2 @ w2) * (1.0 - h * h)
    gw1 = d1.T @ x_rows
    gb1 = d1.sum(axis=0)
    return gw1, gb1, gw2, gb2


def gradients(m: MlpModel, batch) -> Gradients:
    """Backprop gradients of the mean cross-entropy over a batch of records."""
    batch = list(batch)
    if not batch:
        raise EmptyBatch("gradient computation needs at least one record")
    x_rows = np.stack([r.features for r in batch])
    y = np.array([int(r.label) for r in batch], dtype=np.int64)
    gw1, gb1, gw2, gb2 = _batch_gradients(
        m.hidden.weights, m.hidden.biases, m.output.weights, m.output.biases, x_rows, y
    )
    return Gradients(hidden_w=gw1, hidden_b=gb1, output_w=gw2, output_b=gb2)


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 100
    batch_size: int = 64
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    patience: int = 10

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("beta1/beta2 must be in [0, 1)")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.patience < 0:
            raise ValueError("patience must be non-negative")


@dataclass
class TrainHistory:
    """Per-epoch training loss, validation loss, and validation accuracy."""

    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    val_accuracy: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.train_loss)


def _checked_loss(p, y, where: str) -> float:
    """Mean cross-entropy; raises NonFiniteLoss if any true-class prob hit zero."""
    true_p = p[np.arange(len(y)), y]
    if not np.isfinite(true_p).all() or true_p.min() <= 0.0:
        raise NonFiniteLoss(f"training diverged ({where}): true-class probability underflowed")
    return float(np.mean(-np.log(np.maximum(true_p, LOSS_CLAMP))))


def train(train_ds: Dataset, val_ds: Dataset, cfg: TrainConfig | None = None) -> tuple[MlpModel, TrainHistory]:
    """Fit the network on raw records; normalization is fitted on train only.

    Mini-batch Adam with a seeded per-epoch shuffle and early stopping on
    validation loss; returns the weights of the best validation epoch.
    """
    if cfg is None:
        cfg = TrainConfig()
    if len(train_ds) == 0 or len(val_ds) == 0:
        raise EmptyDataset("train and validation datasets must be non-empty")

    norm = fit_normalization(train_ds)
    x_train = apply_normalization(train_ds.features, norm)
    y_train = train_ds.labels
    x_val = apply_normalization(val_ds.features, norm)
    y_val = val_ds.labels

    model = init_model(cfg.seed, norm)
    params = [
        model.hidden.weights.copy(),
        model.hidden.biases.copy(),
        model.output.weights.copy(),
        model.output.biases.copy(),
    ]
    m_state = [np.zeros_like(p) for p in params]
    v_state = [np.zeros_like(p) for p in params]
    step = 0

    shuffle_rng = np.random.default_rng((cfg.seed, 0x5F10AD))
    history = TrainHistory()
    best_val = math.inf
    best_params = [p.copy() for p in params]
    epochs_since_best = 0

    n = len(y_train)
    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(n)
        batch_losses = []
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            xb, yb = x_train[idx], y_train[idx]
            w1, b1, w2, b2 = params
            h, p = _forward_batch(w1, b1, w2, b2, xb)
            batch_losses.append(_checked_loss(p, yb, f"epoch {epoch + 1}"))

            nb = len(yb)
            d2 = p
            d2[np.arange(nb), yb] -= 1.0
            d2 /= nb
            gw2 = d2.T @ h
            gb2 = d2.sum(axis=0)
            d1 = (d2 @ w2) * (1.0 - h * h)
            gw1 = d1.T @ xb
            gb1 = d1.sum(axis=0)

            step += 1
            bias1 = 1.0 - cfg.beta1**step
            bias2 = 1.0 - cfg.beta2**step
            for param, grad, m_acc, v_acc in zip(params, (gw1, gb1, gw2, gb2), m_state, v_state):
                m_acc *= cfg.beta1
                m_acc += (1.0 - cfg.beta1) * grad
                v_acc *= cfg.beta2
                v_acc += (1.0 - cfg.beta2) * (grad * grad)
                param -= cfg.learning_rate * (m_acc / bias1) / (np.sqrt(v_acc / bias2) + cfg.epsilon)

        w1, b1, w2, b2 = params
        _, p_val = _forward_batch(w1, b1, w2, b2, x_val)
        val_loss = _checked_loss(p_val, y_val, f"validation after epoch {epoch + 1}")
        val_acc = float(np.mean(p_val.argmax(axis=1) == y_val))
        history.train_loss.append(float(np.mean(batch_losses)))
        history.val_loss.append(val_loss)
        history.val_accuracy.append(val_acc)

        if val_loss < best_val:
            best_val = val_loss
            best_params = [p.copy() for p in params]
            epochs_since_best = 0
        else:
            epochs_since_best += 1
            if epochs_since_best > cfg.patience:
                break

    w1, b1, w2, b2 = best_params
    best_model = MlpModel(
        hidden=DenseLayer(w1, b1, ACT_TANH),
        output=DenseLayer(w2, b2, ACT_SOFTMAX),
        norm=norm,
    )
    return best_model, history


def _fmt(value: float) -> str:
    return repr(float(value))


def save_model(m: MlpModel, path) -> None:
    """Write the model as whitespace-separated text with exact float round-trip."""
    with atomic_write(path, "w") as fh:
        fh.write(f"{MODEL_MAGIC} v{m.version}\n")
        fh.write(f"layers {INPUT_UNITS} {HIDDEN_UNITS} {OUTPUT_UNITS}\n")
        fh.write(f"activations {ACT_TANH} {ACT_SOFTMAX}\n")
        fh.write("norm_mean " + " ".join(_fmt(v) for v in m.norm.mean) + "\n")
        fh.write("norm_std " + " ".join(_fmt(v) for v in m.norm.std) + "\n")
        for layer in (m.hidden, m.output):
            rows, cols = layer.weights.shape
            fh.write(f"weights {rows} {cols}\n")
            for row in layer.weights:
                fh.write(" ".join(_fmt(v) for v in row) + "\n")
            fh.write(f"biases {rows}\n")
            fh.write(" ".join(_fmt(v) for v in layer.biases) + "\n")


def load_model(path) -> MlpModel:
    """Read a model file written by save_model, validating structure throughout."""
    with open(path) as fh:
        first = fh.readline().split()
        if len(first) != 2 or first[0] != MODEL_MAGIC:
            raise BadMagic(f"{path}: not a {MODEL_MAGIC} model file")
        if first[1] != f"v{MODEL_VERSION}":
            raise VersionMismatch(f"{path}: unsupported version {first[1]!r}")
        tokens = fh.read().split()

    pos = 0

    def take() -> str:
        nonlocal pos
        if pos >= len(tokens):
            raise CorruptModel(f"{path}: file ends prematurely")
        tok = tokens[pos]
        pos += 1
        return tok

    def expect(word: str) -> None:
        tok = take()
        if tok != word:
            raise CorruptModel(f"{path}: expected {word!r}, found {tok!r}")

    def take_int() -> int:
        tok = take()
        try:
            return int(tok)
        except ValueError:
            raise CorruptModel(f"{path}: expected an integer, found {tok!r}") from None

    def take_floats(count: int) -> np.ndarray:
        nonlocal pos
        if pos + count > len(tokens):
            raise CorruptModel(f"{path}: expected {count} values, file ends prematurely")
        chunk = tokens[pos : pos + count]
        pos += count
        try:
            return np.array([float(t) for t in chunk], dtype=np.float64)
        except ValueError:
            raise CorruptModel(f"{path}: non-numeric parameter value") from None

    expect("layers")
    dims = (take_int(), take_int(), take_int())
    if dims != (INPUT_UNITS, HIDDEN_UNITS, OUTPUT_UNITS):
        raise CorruptModel(f"{path}: unsupported layer sizes {dims}")
    expect("activations")
    acts = (take(), take())
    if acts != (ACT_TANH, ACT_SOFTMAX):
        raise CorruptModel(f"{path}: unsupported activations {acts}")
    expect("norm_mean")
    mean = take_floats(INPUT_UNITS)
    expect("norm_std")
    std = take_floats(INPUT_UNITS)

    layers = []
    for expected_shape, activation in (
        ((HIDDEN_UNITS, INPUT_UNITS), ACT_TANH),
        ((OUTPUT_UNITS, HIDDEN_UNITS), ACT_SOFTMAX),
    ):
        expect("weights")
        rows, cols = take_int(), take_int()
        if (rows, cols) != expected_shape:
            raise CorruptModel(f"{path}: weights declared {rows}x{cols}, expected {expected_shape}")
        weights = take_floats(rows * cols).reshape(rows, cols)
        expect("biases")
        count = take_int()
        if count != rows:
            raise CorruptModel(f"{path}: biases declared {count}, expected {rows}")
        biases = take_floats(count)
        layers.append((weights, biases, activation))

    if pos != len(tokens):
        raise CorruptModel(f"{path}: trailing data after model parameters")

    try:
        norm = NormalizationStats(mean, std)
        return MlpModel(
            hidden=DenseLayer(*layers[0]),
            output=DenseLayer(*layers[1]),
            norm=norm,
        )
    except ValueError as exc:
        raise CorruptModel(f"{path}: {exc}") from None
