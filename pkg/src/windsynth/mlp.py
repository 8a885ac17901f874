"""Three-hidden-layer perceptron trained by backpropagation.

Hidden units are logistic, the single output unit is linear.  Weights start
uniform on [-0.5, 0.5] from a generator keyed by ``(seed, stream)``; biases
start at zero.  Training minimises the mean squared error with plain
(full-batch or minibatch) gradient descent.

Two numerically distinct forward paths exist on purpose:

* the training path uses BLAS ``matmul`` for speed;
* :func:`predict` uses ``einsum`` so that every row is summed in the same
  order whether it is evaluated alone or inside a batch.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import as_1d_float, as_2d_float
from .errors import DivergenceDetected, ModelFormatError, ShapeMismatch

N_HIDDEN_LAYERS = 3
MAGIC = b"WSMLP001"


@dataclass(frozen=True)
class MlpConfig:
    hidden_sizes: tuple = (60, 60, 60)
    learning_rate: float = 0.1
    epochs: int = 500
    seed: int = 0
    batch_size: int | None = None  # None trains full-batch
    shuffle: bool = True
    momentum: float = 0.0

    def __post_init__(self):
        sizes = tuple(int(h) for h in self.hidden_sizes)
        if len(sizes) != N_HIDDEN_LAYERS:
            raise ValueError(f"exactly {N_HIDDEN_LAYERS} hidden layers are required")
        if min(sizes) < 1:
            raise ValueError("hidden layer sizes must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if int(self.epochs) < 1:
            raise ValueError("epochs must be >= 1")
        if int(self.seed) < 0 or int(self.seed) >= 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if self.batch_size is not None and int(self.batch_size) < 1:
            raise ValueError("batch_size must be >= 1")
        object.__setattr__(self, "hidden_sizes", sizes)
        object.__setattr__(self, "epochs", int(self.epochs))
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "learning_rate", float(self.learning_rate))
        if self.batch_size is not None:
            object.__setattr__(self, "batch_size", int(self.batch_size))

    @classmethod
    def square(cls, size, **kwargs):
        return cls(hidden_sizes=(size,) * N_HIDDEN_LAYERS, **kwargs)

    def to_dict(self):
        d = asdict(self)
        d["hidden_sizes"] = list(self.hidden_sizes)
        return d


@dataclass
class MlpModel:
    weights: list
    biases: list
    config: MlpConfig
    stream: int = 0

    def __post_init__(self):
        if len(self.weights) != N_HIDDEN_LAYERS + 1 or len(self.biases) != len(self.weights):
            raise ValueError("model needs four weight matrices and four bias vectors")
        prev = self.weights[0].shape[0]
        for w, b in zip(self.weights, self.biases):
            if w.ndim != 2 or w.shape[0] != prev or b.shape != (w.shape[1],):
                raise ValueError("layer shapes do not chain")
            prev = w.shape[1]
        if prev != 1:
            raise ValueError("output layer must have size one")

    @property
    def n_inputs(self):
        return self.weights[0].shape[0]

    def copy(self):
        return MlpModel(
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.config,
            self.stream,
        )

    def parameters(self):
        return [p for pair in zip(self.weights, self.biases) for p in pair]


@dataclass
class TrainReport:
    losses: list = field(default_factory=list)
    initial_loss: float = float("nan")
    final_loss: float = float("nan")

    @property
    def epochs_run(self):
        return len(self.losses)


def _generators(config, stream):
    init_seq, shuffle_seq = np.random.SeedSequence([config.seed, stream]).spawn(2)
    return np.random.default_rng(init_seq), np.random.default_rng(shuffle_seq)


def init(config, n_inputs, stream=0):
    if n_inputs < 1:
        raise ValueError("n_inputs must be >= 1")
    rng, _ = _generators(config, stream)
    sizes = [int(n_inputs), *config.hidden_sizes, 1]
    weights = [rng.uniform(-0.5, 0.5, size=(a, b)) for a, b in zip(sizes[:-1], sizes[1:])]
    biases = [np.zeros(b) for b in sizes[1:]]
    return MlpModel(weights, biases, config, stream)


def _activations(model, X):
    """Layer outputs on the training path, input first, output last."""
    acts = [X]
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = acts[-1] @ w + b
        acts.append(z if i == last else expit(z))
    return acts


def _gradients(model, X, y):
    """Analytic gradients of mean squared error, ordered like ``parameters()``."""
    acts = _activations(model, X)
    n = X.shape[0]
    delta = (2.0 / n) * (acts[-1] - y[:, None])
    grads = []
    for i in range(len(model.weights) - 1, -1, -1):
        grads.append(delta.sum(axis=0))
        grads.append(acts[i].T @ delta)
        if i > 0:
            a = acts[i]
            delta = (delta @ model.weights[i].T) * a * (1.0 - a)
    grads.reverse()
    return grads


def _mse(model, X, y):
    out = _activations(model, X)[-1][:, 0]
    return float(np.mean((out - y) ** 2))


def loss(model, X, y):
    """Mean squared error of :func:`predict` against ``y``."""
    return float(np.mean((predict(model, X) - as_1d_float(y)) ** 2))


def forward(model, row):
    row = np.asarray(row, dtype=np.float64)
    if row.ndim != 1 or row.shape[0] != model.n_inputs:
        raise ShapeMismatch(f"expected a row of length {model.n_inputs}")
    return float(predict(model, row[None, :])[0])


def predict(model, X):
    """Network output in scaled units, one value per row of ``X``."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1 and X.size == 0:
        X = X.reshape(0, model.n_inputs)
    if X.ndim != 2 or X.shape[1] != model.n_inputs:
        raise ShapeMismatch(f"expected {model.n_inputs} columns, got shape {X.shape}")
    a = X
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = np.einsum("ij,jk->ik", a, w) + b
        a = z if i == last else expit(z)
    return a[:, 0]


def train(model, X, y, config=None):
    """Gradient-descent training; returns a new model and its loss history.

    The input model is left untouched.  Shuffling (minibatch mode) draws
    from the generator stream paired with the model's initialisation, so
    ``(seed, stream, data, config)`` fix the result bit for bit.
    """
    config = config or model.config
    X = as_2d_float(X, n_features=model.n_inputs)
    y = as_1d_float(y)
    if X.shape[0] != y.shape[0] or X.shape[0] == 0:
        raise ShapeMismatch("X and y must have the same, nonzero number of rows")
    model = model.copy()
    model.config = config
    _, rng = _generators(config, model.stream)
    n = X.shape[0]
    batch = n if config.batch_size is None else min(config.batch_size, n)
    lr = config.learning_rate
    report = TrainReport(initial_loss=_mse(model, X, y))
    params = model.parameters()
    velocity = [np.zeros_like(p) for p in params]
    mu = config.momentum
    for epoch in range(config.epochs):
        order = rng.permutation(n) if (config.shuffle and batch < n) else None
        for start in range(0, n, batch):
            if order is None:
                xb, yb = X[start:start + batch], y[start:start + batch]
            else:
                rows = order[start:start + batch]
                xb, yb = X[rows], y[rows]
            for p, v, g in zip(params, velocity, _gradients(model, xb, yb)):
                if mu:
                    v *= mu
                    v -= lr * g
                    p += v
                else:
                    p -= lr * g
        current = _mse(model, X, y)
        if not np.isfinite(current):
            raise DivergenceDetected(epoch + 1)
        report.losses.append(current)
    report.final_loss = loss(model, X, y)
    return model, report


def gradient_check(model, X, y, epsilon=1e-5, gradient_fn=None, floor=1e-4):
    """Largest relative gap between analytic and central-difference gradients.

    The relative error of each parameter is ``|a - n| / max(|a|, |n|, floor)``;
    the floor keeps near-zero gradients from amplifying round-off.
    ``gradient_fn`` substitutes the analytic gradient (for harness tests).
    """
    if not 0 < epsilon <= 1e-3:
        raise ValueError("epsilon must lie in (0, 1e-3]")
    X = as_2d_float(X, n_features=model.n_inputs)
    y = as_1d_float(y)
    probe = model.copy()
    analytic = (gradient_fn or _gradients)(probe, X, y)
    worst = 0.0
    for p, g in zip(probe.parameters(), analytic):
        flat = p.reshape(-1)
        gflat = np.asarray(g).reshape(-1)
        for k in range(flat.size):
            saved = flat[k]
            flat[k] = saved + epsilon
            up = _mse(probe, X, y)
            flat[k] = saved - epsilon
            down = _mse(probe, X, y)
            flat[k] = saved
            numeric = (up - down) / (2 * epsilon)
            a = gflat[k]
            denom = max(abs(a), abs(numeric), floor)
            worst = max(worst, abs(a - numeric) / denom)
    return worst


# -- serialization -----------------------------------------------------------

def write_container(path, meta, arrays):
    """Magic, JSON header and little-endian float64 arrays, in that order."""
    entries = []
    for name, arr in arrays:
        entries.append({"name": name, "shape": list(np.shape(arr))})
    header = json.dumps({"meta": meta, "arrays": entries}, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for _, arr in arrays:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def read_container(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:len(MAGIC)] != MAGIC:
        raise ModelFormatError(f"{path}: not a windsynth model file")
    offset = len(MAGIC)
    (hlen,) = struct.unpack_from("<Q", blob, offset)
    offset += 8
    try:
        header = json.loads(blob[offset:offset + hlen].decode("utf-8"))
    except ValueError as exc:
        raise ModelFormatError(f"{path}: corrupt header") from exc
    offset += hlen
    arrays = {}
    for entry in header["arrays"]:
        count = int(np.prod(entry["shape"], dtype=np.int64))
        end = offset + 8 * count
        if end > len(blob):
            raise ModelFormatError(f"{path}: truncated array {entry['name']}")
        arrays[entry["name"]] = np.frombuffer(blob[offset:end], dtype="<f8").astype(np.float64).reshape(entry["shape"])
        offset = end
    if offset != len(blob):
        raise ModelFormatError(f"{path}: trailing bytes")
    return header["meta"], arrays


def model_arrays(model, prefix=""):
    out = []
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        out.append((f"{prefix}W{i}", w))
        out.append((f"{prefix}b{i}", b))
    return out


def model_from_arrays(meta, arrays, prefix=""):
    cfg = dict(meta["config"])
    cfg["hidden_sizes"] = tuple(cfg["hidden_sizes"])
    config = MlpConfig(**cfg)
    n_layers = N_HIDDEN_LAYERS + 1
    try:
        weights = [arrays[f"{prefix}W{i}"] for i in range(n_layers)]
        biases = [arrays[f"{prefix}b{i}"] for i in range(n_layers)]
    except KeyError as exc:
        raise ModelFormatError(f"missing array {exc}") from None
    return MlpModel(weights, biases, config, int(meta.get("stream", 0)))


def save_model(model, path):
    write_container(path, {"config": model.config.to_dict(), "stream": model.stream}, model_arrays(model))


def load_model(path):
    meta, arrays = read_container(path)
    return model_from_arrays(meta, arrays)


class PerceptronRegressor(RegressorMixin, BaseEstimator):
    """Estimator wrapper around :func:`init`, :func:`train` and :func:`predict`.

    Parameters
    ----------
    hidden_sizes : int or tuple of 3 ints
        Width of the three hidden layers.
    learning_rate : float
    epochs : int
    seed : int
        Seeds both initialisation and shuffling.
    batch_size : int or None
        None trains on the full batch each step.
    shuffle : bool
    momentum : float
        Heavy-ball coefficient; 0 gives plain gradient descent.
    stream : int
        Extra key mixed into the generator, e.g. a fold number.
    """

    def __init__(self, hidden_sizes=60, learning_rate=0.1, epochs=500, seed=0,
                 batch_size=None, shuffle=True, stream=0, momentum=0.0):
        self.hidden_sizes = hidden_sizes
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.seed = seed
        self.batch_size = batch_size
        self.shuffle = shuffle
        self.stream = stream
        self.momentum = momentum

    def _config(self):
        sizes = self.hidden_sizes
        if np.isscalar(sizes):
            sizes = (int(sizes),) * N_HIDDEN_LAYERS
        return MlpConfig(tuple(sizes), self.learning_rate, self.epochs, self.seed,
                         self.batch_size, self.shuffle, self.momentum)

    def fit(self, X, y):
        X = as_2d_float(X)
        y = as_1d_float(y)
        config = self._config()
        model = init(config, X.shape[1], stream=self.stream)
        self.model_, self.report_ = train(model, X, y, config)
        self.n_features_in_ = X.shape[1]
        self.loss_curve_ = list(self.report_.losses)
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        return predict(self.model_, as_2d_float(X, n_features=self.n_features_in_))
