"""A small ReLU multilayer perceptron over flat parameter vectors.

All model state is one float64 vector so that distance, aggregation and
clustering can treat models as points.  ``ModelSpec.unpack`` turns the flat
vector into per-layer weight/bias views without copying.
"""

from __future__ import annotations

from dataclasses import dataclass
import numpy as np


@dataclass(frozen=True)
class ModelSpec:
    input_dim: int
    hidden_dims: tuple[int, ...] = (128, 64)
    num_classes: int = 10

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if self.num_classes < 2:
            raise ValueError("num_classes must be at least 2")
        if self.input_dim < 1 or any(h < 1 for h in self.hidden_dims):
            raise ValueError("all layer sizes must be positive")

    @property
    def layer_shapes(self) -> list[tuple[int, int]]:
        dims = [self.input_dim, *self.hidden_dims, self.num_classes]
        return list(zip(dims[:-1], dims[1:]))

    @property
    def num_params(self) -> int:
        return sum((fan_in + 1) * fan_out for fan_in, fan_out in self.layer_shapes)

    def unpack(self, params: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
        """Split ``params`` into ``[(W, b), ...]`` views, W shaped (fan_in, fan_out)."""
        if params.shape != (self.num_params,):
            raise ValueError(f"expected {self.num_params} parameters, got shape {params.shape}")
        layers, offset = [], 0
        for fan_in, fan_out in self.layer_shapes:
            w = params[offset:offset + fan_in * fan_out].reshape(fan_in, fan_out)
            offset += fan_in * fan_out
            b = params[offset:offset + fan_out]
            offset += fan_out
            layers.append((w, b))
        return layers


def init_params(spec: ModelSpec, rng: np.random.Generator | int) -> np.ndarray:
    """Glorot-uniform weights, zero biases."""
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    params = np.zeros(spec.num_params)
    for w, _ in spec.unpack(params):
        fan_in, fan_out = w.shape
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        w[...] = rng.uniform(-limit, limit, size=w.shape)
    return params


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _check_batch(spec: ModelSpec, X: np.ndarray, y: np.ndarray) -> None:
    if X.ndim != 2 or X.shape[1] != spec.input_dim:
        raise ValueError(f"features must be (n, {spec.input_dim}), got {X.shape}")
    if len(X) != len(y):
        raise ValueError(f"{len(X)} feature rows but {len(y)} labels")
    if len(X) == 0:
        raise ValueError("empty batch")


def _forward(spec, params, X):
    acts = [X]
    pre = []
    layers = spec.unpack(params)
    h = X
    for i, (w, b) in enumerate(layers):
        z = h @ w + b
        pre.append(z)
        h = np.maximum(z, 0.0) if i < len(layers) - 1 else z
        acts.append(h)
    return layers, pre, acts


def _loss_acc(logits, y):
    z = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1))
    rows = np.arange(len(y))
    loss = float(np.mean(log_norm - z[rows, y]))
    acc = float(np.mean(np.argmax(logits, axis=1) == y))
    return loss, acc


def predict_proba(params: np.ndarray, spec: ModelSpec, X: np.ndarray) -> np.ndarray:
    _, _, acts = _forward(spec, params, np.asarray(X, dtype=np.float64))
    return softmax(acts[-1])


def _backward(spec, params, layers, pre, acts, y) -> np.ndarray:
    grad = np.zeros_like(params)
    grad_layers = spec.unpack(grad)
    delta = softmax(acts[-1])
    delta[np.arange(len(y)), y] -= 1.0
    delta /= len(y)
    for i in range(len(layers) - 1, -1, -1):
        gw, gb = grad_layers[i]
        np.matmul(acts[i].T, delta, out=gw)
        gb[...] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ layers[i][0].T) * (pre[i - 1] > 0)
    return grad


def forward_loss_grad(params: np.ndarray, spec: ModelSpec, X: np.ndarray,
                      y: np.ndarray) -> tuple[float, float, np.ndarray]:
    """Mean cross-entropy, accuracy and the gradient w.r.t. ``params``."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    _check_batch(spec, X, y)
    layers, pre, acts = _forward(spec, params, X)
    loss, acc = _loss_acc(acts[-1], y)
    return loss, acc, _backward(spec, params, layers, pre, acts, y)


def evaluate(params: np.ndarray, spec: ModelSpec, X: np.ndarray,
             y: np.ndarray) -> tuple[float, float]:
    """(mean cross-entropy, accuracy) without computing gradients."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    _check_batch(spec, X, y)
    _, _, acts = _forward(spec, params, X)
    return _loss_acc(acts[-1], y)


def sgd_epochs(params: np.ndarray, spec: ModelSpec, X: np.ndarray, y: np.ndarray, *,
               lr: float, epochs: int, batch_size: int = 32,
               rng: np.random.Generator | int = 0,
               prox: tuple[float, np.ndarray] | None = None,
               mode: str = "epochs") -> np.ndarray:
    """Plain minibatch SGD; returns a new parameter vector.

    ``mode="epochs"`` runs ``epochs`` shuffled passes over the data,
    ``mode="steps"`` runs ``epochs`` single minibatch steps.  ``prox=(beta,
    anchor)`` adds ``beta * (params - anchor)`` to every gradient.
    """
    if lr <= 0:
        raise ValueError("learning rate must be positive")
    if len(y) == 0:
        raise ValueError("cannot train on an empty shard")
    if mode not in ("epochs", "steps"):
        raise ValueError(f"unknown local step mode {mode!r}")
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    _check_batch(spec, X, y)
    params = np.array(params, dtype=np.float64, copy=True)
    n = len(y)

    def batches():
        if mode == "epochs":
            for _ in range(epochs):
                order = rng.permutation(n)
                for start in range(0, n, batch_size):
                    yield order[start:start + batch_size]
        else:
            order, pos = rng.permutation(n), 0
            for _ in range(epochs):
                if pos >= n:
                    order, pos = rng.permutation(n), 0
                yield order[pos:pos + batch_size]
                pos += batch_size

    for idx in batches():
        xb, yb = X[idx], y[idx]
        layers, pre, acts = _forward(spec, params, xb)
        grad = _backward(spec, params, layers, pre, acts, yb)
        if prox is not None:
            beta, anchor = prox
            grad += beta * (params - anchor)
        grad *= lr
        params -= grad
    # non-finite values never recover, so one check at the end catches any step
    if not np.all(np.isfinite(params)):
        raise FloatingPointError("non-finite parameters after SGD")
    return params

