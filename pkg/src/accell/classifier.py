"""Cell / not-cell crop classifier.

A small fully connected network over flattened, [0, 1]-normalized crop
pixels: ReLU hidden layers, one sigmoid output, mean binary cross-entropy
loss, Adam updates, and early stopping on a validation split. Everything
runs in float64 and is exactly reproducible under a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from .errors import DivergedTraining, EmptyDataset, InvalidImage, ShapeError

MAGIC = b"ACMLP1"
DEFAULT_HIDDEN = (512, 128, 64)


@dataclass(frozen=True)
class MlpParams:
    """Network weights; ``weights[i]`` has shape (fan_in, fan_out)."""

    layer_dims: tuple[int, ...]
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def copy(self) -> "MlpParams":
        return MlpParams(self.layer_dims,
                         tuple(w.copy() for w in self.weights),
                         tuple(b.copy() for b in self.biases))


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 64
    max_epochs: int = 500
    patience: int = 30
    seed: int = 0
    hidden_dims: tuple[int, ...] = DEFAULT_HIDDEN

    def __post_init__(self):
        if min(self.learning_rate, self.batch_size, self.max_epochs, self.patience) <= 0:
            raise ValueError("learning_rate, batch_size, max_epochs, patience must be positive")


@dataclass(frozen=True)
class TrainReport:
    epochs_run: int
    best_val_loss: float
    loss_curve: tuple[tuple[float, float], ...]  # (train_loss, val_loss) per epoch
    stopped_early: bool


def init_params(layer_dims, seed: int) -> MlpParams:
    """Seeded He-normal weight init (variance 2 / fan_in) with zero biases."""
    dims = tuple(int(d) for d in layer_dims)
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        weights.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpParams(dims, tuple(weights), tuple(biases))


def _check_features(params: MlpParams, x: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != params.layer_dims[0]:
        raise ShapeError(f"expected {params.layer_dims[0]} features, got {x.shape[1]}")
    return x


def forward_logits(params: MlpParams, x) -> np.ndarray:
    x = _check_features(params, x)
    a = x
    for w, b in zip(params.weights[:-1], params.biases[:-1]):
        a = np.maximum(a @ w + b, 0.0)
    return (a @ params.weights[-1] + params.biases[-1]).ravel()


def forward(params: MlpParams, x) -> np.ndarray:
    """Probability of "real cell" for each row of ``x``, in (0, 1)."""
    return expit(forward_logits(params, x))


def predict(params: MlpParams, x, threshold: float = 0.5) -> np.ndarray:
    """Boolean cell decision; probability exactly at the threshold counts as cell."""
    return forward(params, x) >= threshold


def bce_loss(params: MlpParams, x, y) -> float:
    """Mean binary cross-entropy, computed stably from logits."""
    z = forward_logits(params, x)
    y = np.asarray(y, dtype=np.float64).ravel()
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


def loss_and_gradients(params: MlpParams, x, y):
    """Mean BCE and its analytic gradients w.r.t. every weight and bias."""
    x = _check_features(params, x)
    y = np.asarray(y, dtype=np.float64).ravel()
    n = x.shape[0]

    activations = [x]
    a = x
    for w, b in zip(params.weights[:-1], params.biases[:-1]):
        a = np.maximum(a @ w + b, 0.0)
        activations.append(a)
    z = (a @ params.weights[-1] + params.biases[-1]).ravel()
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z))

    delta = ((expit(z) - y) / n)[:, None]
    grad_w = [None] * len(params.weights)
    grad_b = [None] * len(params.biases)
    for layer in range(len(params.weights) - 1, -1, -1):
        grad_w[layer] = activations[layer].T @ delta
        grad_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ params.weights[layer].T) * (activations[layer] > 0)
    return loss, tuple(grad_w), tuple(grad_b)


class _Adam:
    """Adaptive moment estimation over a flat list of parameter arrays."""

    def __init__(self, shapes, learning_rate, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = learning_rate, beta1, beta2, eps
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]
        self.t = 0

    def step(self, values, grads):
        self.t += 1
        out = []
        for i, (val, g) in enumerate(zip(values, grads)):
            self.m[i] = self.beta1 * self.m[i] + (1 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1 - self.beta2) * g * g
            m_hat = self.m[i] / (1 - self.beta1 ** self.t)
            v_hat = self.v[i] / (1 - self.beta2 ** self.t)
            out.append(val - self.lr * m_hat / (np.sqrt(v_hat) + self.eps))
        return out


def train(x_train, y_train, x_val, y_val, config: TrainConfig = TrainConfig()):
    """Train the classifier with mini-batch Adam and early stopping.

    After every epoch the full-set train and validation losses are
    recorded; training stops once the validation loss has not strictly
    improved for ``config.patience`` consecutive epochs, or at
    ``config.max_epochs``. The parameter snapshot with the best validation
    loss is returned alongside a :class:`TrainReport`.
    """
    x_train = np.atleast_2d(np.asarray(x_train, dtype=np.float64))
    x_val = np.atleast_2d(np.asarray(x_val, dtype=np.float64))
    y_train = np.asarray(y_train, dtype=np.float64).ravel()
    y_val = np.asarray(y_val, dtype=np.float64).ravel()
    if x_train.shape[0] == 0 or x_val.shape[0] == 0:
        raise EmptyDataset("training and validation sets must both be nonempty")
    if x_train.shape[0] != y_train.size or x_val.shape[0] != y_val.size:
        raise ShapeError("feature/label count mismatch")

    dims = (x_train.shape[1],) + tuple(config.hidden_dims) + (1,)
    params = init_params(dims, config.seed)
    rng = np.random.default_rng(config.seed)
    shapes = [w.shape for w in params.weights] + [b.shape for b in params.biases]
    adam = _Adam(shapes, config.learning_rate)

    n = x_train.shape[0]
    best_val = np.inf
    best_params = params.copy()
    curve = []
    since_best = 0
    stopped_early = False
    epochs_run = 0

    for epoch in range(config.max_epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            _, gw, gb = loss_and_gradients(params, x_train[idx], y_train[idx])
            flat = adam.step(list(params.weights) + list(params.biases),
                             list(gw) + list(gb))
            k = len(params.weights)
            params = MlpParams(params.layer_dims, tuple(flat[:k]), tuple(flat[k:]))

        train_loss = bce_loss(params, x_train, y_train)
        val_loss = bce_loss(params, x_val, y_val)
        if not (np.isfinite(train_loss) and np.isfinite(val_loss)):
            raise DivergedTraining(f"non-finite loss at epoch {epoch + 1}")
        curve.append((train_loss, val_loss))
        epochs_run = epoch + 1

        if val_loss < best_val:
            best_val = val_loss
            best_params = params.copy()
            since_best = 0
        else:
            since_best += 1
            if since_best >= config.patience:
                stopped_early = True
                break

    report = TrainReport(epochs_run, float(best_val), tuple(curve), stopped_early)
    return best_params, report


def save_params(params: MlpParams, path) -> None:
    """Serialize params: magic, layer count, dims, then per-layer W and b
    as row-major float64."""
    chunks = [MAGIC, np.uint32(len(params.layer_dims)).tobytes()]
    chunks.append(np.asarray(params.layer_dims, dtype=np.uint32).tobytes())
    for w, b in zip(params.weights, params.biases):
        chunks.append(np.ascontiguousarray(w, dtype=np.float64).tobytes())
        chunks.append(np.ascontiguousarray(b, dtype=np.float64).tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_params(path) -> MlpParams:
    data = Path(path).read_bytes()
    if data[:6] != MAGIC:
        raise InvalidImage(f"not a classifier parameter file: bad magic {data[:6]!r}")
    n_dims = int(np.frombuffer(data, dtype=np.uint32, count=1, offset=6)[0])
    dims = np.frombuffer(data, dtype=np.uint32, count=n_dims, offset=10).astype(int)
    offset = 10 + 4 * n_dims
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        w = np.frombuffer(data, dtype=np.float64, count=fan_in * fan_out, offset=offset)
        offset += 8 * fan_in * fan_out
        b = np.frombuffer(data, dtype=np.float64, count=fan_out, offset=offset)
        offset += 8 * fan_out
        weights.append(w.reshape(fan_in, fan_out).copy())
        biases.append(b.copy())
    return MlpParams(tuple(int(d) for d in dims), tuple(weights), tuple(biases))


class CellCropClassifier(BaseEstimator, ClassifierMixin):
    """Scikit-learn style wrapper around the functional trainer.

    ``fit`` expects flattened crop features in [0, 1] and binary labels;
    pass ``x_val``/``y_val`` for early stopping (defaults to reusing the
    training set, which disables it in practice).
    """

    def __init__(self, hidden_dims=DEFAULT_HIDDEN, learning_rate: float = 1e-3,
                 batch_size: int = 64, max_epochs: int = 500,
                 patience: int = 30, seed: int = 0):
        self.hidden_dims = hidden_dims
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.patience = patience
        self.seed = seed

    def _config(self) -> TrainConfig:
        return TrainConfig(self.learning_rate, self.batch_size, self.max_epochs,
                           self.patience, self.seed, tuple(self.hidden_dims))

    def fit(self, X, y, x_val=None, y_val=None):
        if x_val is None:
            x_val, y_val = X, y
        self.params_, self.report_ = train(X, y, x_val, y_val, self._config())
        return self

    def predict_proba(self, X) -> np.ndarray:
        self._check_fitted()
        p = forward(self.params_, X)
        return np.column_stack((1.0 - p, p))

    def predict(self, X) -> np.ndarray:
        self._check_fitted()
        return predict(self.params_, X)

    def _check_fitted(self):
        if not hasattr(self, "params_"):
            raise NotFittedError("classifier is not fitted; call fit first")
