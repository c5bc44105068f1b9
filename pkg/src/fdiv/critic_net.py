"""Small dense critic network with exact parameter and input gradients."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DenseNet",
    "Direction",
    "GradBundle",
    "batch_forward_backward",
    "forward",
    "forward_backward",
    "init_network",
    "load_network",
    "save_network",
    "sgd_step",
]

DEFAULT_WIDTHS = (1, 20, 20, 1)
CHECKPOINT_SCHEMA = 1


def _elu(z):
    return np.where(z > 0, z, np.expm1(np.minimum(z, 0.0)))


def _elu_grad(z):
    return np.where(z > 0, 1.0, np.exp(np.minimum(z, 0.0)))


@dataclass(frozen=True, eq=False)
class DenseNet:
    """Dense layers with ELU between them and an identity output.

    ``weights[l]`` has shape ``(fan_in, fan_out)``.  Instances behave as
    critic functions on one-dimensional inputs: ``net(x)`` evaluates and
    ``net.input_grad(x)`` differentiates with respect to ``x``.
    """

    widths: tuple
    weights: tuple
    biases: tuple

    label = "learned"

    def __post_init__(self):
        widths = tuple(int(w) for w in self.widths)
        if len(widths) < 2:
            raise ValueError("widths must name at least an input and an output layer")
        if widths[-1] != 1:
            raise ValueError("the critic output layer must have width 1")
        weights = tuple(np.array(w, dtype=float) for w in self.weights)
        biases = tuple(np.array(b, dtype=float).reshape(-1) for b in self.biases)
        if len(weights) != len(widths) - 1 or len(biases) != len(weights):
            raise ValueError("layer count does not match widths")
        for i, (w, b) in enumerate(zip(weights, biases)):
            if w.shape != (widths[i], widths[i + 1]) or b.shape != (widths[i + 1],):
                raise ValueError(f"layer {i} has shape {w.shape}/{b.shape}, expected "
                                 f"{(widths[i], widths[i + 1])}/{(widths[i + 1],)}")
        object.__setattr__(self, "widths", widths)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "biases", biases)

    @property
    def n_parameters(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def flat_parameters(self) -> np.ndarray:
        return np.concatenate([np.concatenate([w.ravel(), b]) for w, b in zip(self.weights, self.biases)])

    def with_flat_parameters(self, theta) -> "DenseNet":
        theta = np.asarray(theta, dtype=float)
        if theta.size != self.n_parameters:
            raise ValueError(f"expected {self.n_parameters} parameters, got {theta.size}")
        ws, bs, k = [], [], 0
        for w, b in zip(self.weights, self.biases):
            ws.append(theta[k:k + w.size].reshape(w.shape))
            k += w.size
            bs.append(theta[k:k + b.size].copy())
            k += b.size
        return DenseNet(self.widths, tuple(ws), tuple(bs))

    def __eq__(self, other):
        if not isinstance(other, DenseNet):
            return NotImplemented
        return self.widths == other.widths and np.array_equal(self.flat_parameters(), other.flat_parameters())

    def __call__(self, x):
        out = forward(self, x)
        return float(out[0]) if np.ndim(x) == 0 else out

    def input_grad(self, x):
        _, bundle = batch_forward_backward(self, x, np.ones(np.size(x) if self.widths[0] == 1 else len(x)))
        g = bundle.input_grad
        if self.widths[0] == 1:
            g = g[:, 0]
            return float(g[0]) if np.ndim(x) == 0 else g
        return g

    def pre_activations(self, x) -> list:
        """Hidden-layer pre-activations for a batch, used to locate ELU kinks."""
        h = _as_batch(self, x)
        zs = []
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            z = h @ w + b
            zs.append(z)
            h = _elu(z)
        return zs

    def to_dict(self) -> dict:
        return {
            "schema_version": CHECKPOINT_SCHEMA,
            "widths": list(self.widths),
            "layers": [{"w": w.tolist(), "b": b.tolist()} for w, b in zip(self.weights, self.biases)],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DenseNet":
        try:
            layers = data["layers"]
            return cls(tuple(data["widths"]), tuple(l["w"] for l in layers), tuple(l["b"] for l in layers))
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed network checkpoint: {exc}") from exc


@dataclass(frozen=True)
class GradBundle:
    """Parameter gradients (summed over a batch) and per-sample input gradients."""

    weights: tuple
    biases: tuple
    input_grad: np.ndarray

    def flat(self) -> np.ndarray:
        return np.concatenate([np.concatenate([w.ravel(), b]) for w, b in zip(self.weights, self.biases)])


class Direction(str, enum.Enum):
    ASCEND = "ascend"
    DESCEND = "descend"


def init_network(widths=DEFAULT_WIDTHS, seed: int = 0) -> DenseNet:
    """Glorot-uniform weights, zero biases, deterministic per seed."""
    widths = tuple(int(w) for w in widths)
    if len(widths) == 0:
        raise ValueError("widths must be nonempty")
    rng = np.random.default_rng(seed)
    ws, bs = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        ws.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        bs.append(np.zeros(fan_out))
    return DenseNet(widths, tuple(ws), tuple(bs))


def _as_batch(net, x):
    x = np.asarray(x, dtype=float)
    if net.widths[0] == 1:
        return x.reshape(-1, 1)
    return np.atleast_2d(x)


def forward(net: DenseNet, x) -> np.ndarray:
    """Critic outputs for a batch, shape ``(n,)``."""
    h = _as_batch(net, x)
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = h @ w + b
        h = z if i == last else _elu(z)
    return h[:, 0]


def batch_forward_backward(net: DenseNet, x, upstream):
    """Outputs and gradients of ``sum_i upstream_i * d(x_i)``.

    Parameter gradients are summed over the batch; ``input_grad`` has one
    row per sample.
    """
    h = _as_batch(net, x)
    up = np.asarray(upstream, dtype=float).reshape(-1, 1)
    if up.shape[0] != h.shape[0]:
        raise ValueError("upstream must hold one value per sample")
    last = len(net.weights) - 1
    acts, zs = [h], []
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = acts[-1] @ w + b
        zs.append(z)
        acts.append(z if i == last else _elu(z))

    gw, gb = [None] * len(net.weights), [None] * len(net.weights)
    g = up
    for i in range(last, -1, -1):
        gw[i] = acts[i].T @ g
        gb[i] = g.sum(axis=0)
        g = g @ net.weights[i].T
        if i > 0:
            g = g * _elu_grad(zs[i - 1])
    return acts[-1][:, 0], GradBundle(tuple(gw), tuple(gb), g)


def forward_backward(net: DenseNet, x: float, upstream: float = 1.0):
    """Single-input version: ``(output, GradBundle)`` with a scalar ``input_grad`` for 1D input."""
    out, bundle = batch_forward_backward(net, [x] if net.widths[0] == 1 else [np.asarray(x)], [upstream])
    ig = bundle.input_grad[0]
    ig = float(ig[0]) if net.widths[0] == 1 else ig
    return float(out[0]), GradBundle(bundle.weights, bundle.biases, ig)


def sgd_step(net: DenseNet, grads: GradBundle, learning_rate: float, direction="descend") -> DenseNet:
    """Return a new network moved by ``learning_rate * grads`` uphill or downhill."""
    if not learning_rate > 0:
        raise ValueError("learning_rate must be positive")
    sign = 1.0 if Direction(direction) is Direction.ASCEND else -1.0
    step = sign * learning_rate
    ws = tuple(w + step * g for w, g in zip(net.weights, grads.weights))
    bs = tuple(b + step * g for b, g in zip(net.biases, grads.biases))
    return DenseNet(net.widths, ws, bs)


def save_network(net: DenseNet, path) -> None:
    with open(path, "w") as fh:
        json.dump(net.to_dict(), fh)


def load_network(path) -> DenseNet:
    with open(path) as fh:
        return DenseNet.from_dict(json.load(fh))
