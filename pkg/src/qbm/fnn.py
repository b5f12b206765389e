"""Feed-forward baseline: sigmoid hidden layers, softmax output, trained by
backpropagation on categorical cross-entropy with the shared Adam update.

The baseline consumes the same binarized feature vectors as the Boltzmann
classifier; :func:`parameter_count` works on either model kind so the two can
be matched for size.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import expit

from .adam import adam_update, init_adam
from .classifier import QbmClassifier, TrainConfig, TrainHistory, masked_edge_pairs
from .errors import InputError
from .metrics import accuracy, auc_roc_macro
from .rng import derive_rng, derive_seed


@dataclass(frozen=True)
class FnnModel:
    """Dense network; weights[k] maps layer k activations to layer k+1."""

    weights: tuple
    biases: tuple
    trained_epochs: int = 0

    def __post_init__(self):
        ws = tuple(np.array(w, dtype=np.float64) for w in self.weights)
        bs = tuple(np.array(b, dtype=np.float64) for b in self.biases)
        if not ws or len(ws) != len(bs):
            raise InputError("need matching, non-empty weight and bias tuples")
        for k, (w, b) in enumerate(zip(ws, bs)):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise InputError(f"layer {k}: weight {w.shape} and bias {b.shape} disagree")
            if k and w.shape[1] != ws[k - 1].shape[0]:
                raise InputError(f"layer {k} input width {w.shape[1]} does not chain")
        for arr in ws + bs:
            arr.setflags(write=False)
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "biases", bs)

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def output_dim(self) -> int:
        return self.weights[-1].shape[0]

    @property
    def hidden_sizes(self) -> tuple:
        return tuple(w.shape[0] for w in self.weights[:-1])


def init_fnn(input_dim: int, hidden_sizes, output_dim: int, seed: int) -> FnnModel:
    """Glorot-uniform weights, zero biases; at least one hidden layer."""
    sizes = [int(s) for s in hidden_sizes]
    if not sizes or any(s < 1 for s in sizes):
        raise InputError(f"need at least one positive hidden size, got {hidden_sizes}")
    if input_dim < 1 or output_dim < 1:
        raise InputError("input_dim and output_dim must be positive")
    rng = derive_rng(seed)
    dims = [input_dim] + sizes + [output_dim]
    weights, biases = [], []
    for fan_in, fan_out in zip(dims, dims[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, (fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return FnnModel(tuple(weights), tuple(biases))


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _check_features(model: FnnModel, x) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != model.input_dim:
        raise InputError(
            f"feature dimension {arr.shape[-1] if arr.ndim else 0} does not match "
            f"network input {model.input_dim}"
        )
    return arr


def fnn_forward(model: FnnModel, features) -> np.ndarray:
    """Class probabilities; (C,) for a single vector, (N, C) for a batch."""
    x = np.asarray(features, dtype=np.float64)
    single = x.ndim == 1
    a = _check_features(model, x)
    for w, b in zip(model.weights[:-1], model.biases[:-1]):
        a = expit(a @ w.T + b)
    probs = _softmax(a @ model.weights[-1].T + model.biases[-1])
    return probs[0] if single else probs


def cross_entropy(model: FnnModel, features, labels) -> float:
    """Mean categorical cross-entropy against integer labels."""
    probs = np.atleast_2d(fnn_forward(model, features))
    y = np.asarray(labels).reshape(-1)
    if y.size != probs.shape[0]:
        raise InputError("labels must align with the feature rows")
    return float(-np.mean(np.log(probs[np.arange(y.size), y] + 1e-300)))


def fnn_gradients(model: FnnModel, features, labels):
    """(loss, weight grads, bias grads) by backpropagation."""
    x = _check_features(model, features)
    y = np.asarray(labels).reshape(-1)
    if y.size != x.shape[0]:
        raise InputError("labels must align with the feature rows")
    if np.any((y < 0) | (y >= model.output_dim)):
        raise InputError("labels out of range for the output layer")
    n = x.shape[0]
    activations = [x]
    a = x
    for w, b in zip(model.weights[:-1], model.biases[:-1]):
        a = expit(a @ w.T + b)
        activations.append(a)
    probs = _softmax(a @ model.weights[-1].T + model.biases[-1])
    loss = float(-np.mean(np.log(probs[np.arange(n), y] + 1e-300)))

    onehot = np.zeros_like(probs)
    onehot[np.arange(n), y] = 1.0
    delta = (probs - onehot) / n
    w_grads = [None] * len(model.weights)
    b_grads = [None] * len(model.biases)
    for k in range(len(model.weights) - 1, -1, -1):
        w_grads[k] = delta.T @ activations[k]
        b_grads[k] = delta.sum(axis=0)
        if k:
            delta = (delta @ model.weights[k]) * activations[k] * (1.0 - activations[k])
    return loss, w_grads, b_grads


def _flatten(arrays) -> np.ndarray:
    return np.concatenate([a.ravel() for a in arrays])


def _unflatten(flat: np.ndarray, like) -> list:
    out, pos = [], 0
    for a in like:
        out.append(flat[pos:pos + a.size].reshape(a.shape))
        pos += a.size
    return out


def fnn_train(model: FnnModel, features, labels, config: TrainConfig):
    """Mini-batch Adam training; mirrors the Boltzmann loop's seed schedule
    (per-epoch shuffles and per-epoch metric evaluation).  The sample_count
    field of the config is ignored here.  Returns (model, history)."""
    x = _check_features(model, features)
    y = np.asarray(labels).reshape(-1)
    if x.shape[0] != y.size or x.shape[0] < 1:
        raise InputError("training set must be non-empty with aligned labels")
    params = _flatten(list(model.weights) + list(model.biases))
    state = init_adam(config.adam, params.size)
    n_w = len(model.weights)
    history = TrainHistory()
    for epoch in range(config.epochs):
        t0 = time.perf_counter()
        perm = derive_rng(config.seed, 0, epoch).permutation(x.shape[0])
        mags = []
        for start in range(0, x.shape[0], config.batch_size):
            idx = perm[start:start + config.batch_size]
            _, wg, bg = fnn_gradients(model, x[idx], y[idx])
            grads = _flatten(wg + bg)
            params, state = adam_update(params, grads, state)
            parts = _unflatten(params, list(model.weights) + list(model.biases))
            model = FnnModel(tuple(parts[:n_w]), tuple(parts[n_w:]),
                             model.trained_epochs)
            mags.append(float(np.mean(np.abs(grads))))
        probs = fnn_forward(model, x)
        history.accuracy.append(accuracy(probs.argmax(axis=1), y))
        history.auc.append(auc_roc_macro(probs, y))
        history.grad_magnitude.append(float(np.mean(mags)))
        history.wall_seconds.append(time.perf_counter() - t0)
    if config.epochs:
        model = replace(model, trained_epochs=model.trained_epochs + config.epochs)
    return model, history


def parameter_count(model) -> int:
    """Trainable parameters of either classifier kind.

    Boltzmann: one weight per masked pair (counted once) plus hidden and
    label biases.  Feed-forward: all weight matrix entries plus all biases.
    """
    if isinstance(model, QbmClassifier):
        rows, _ = masked_edge_pairs(model.model.edge_mask)
        trainable = model.topology.hidden_total + model.topology.label_units
        return int(rows.size + trainable)
    if isinstance(model, FnnModel):
        return int(sum(w.size for w in model.weights) +
                   sum(b.size for b in model.biases))
    raise InputError(f"cannot count parameters of {type(model).__name__}")
