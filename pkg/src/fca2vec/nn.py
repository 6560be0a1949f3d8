"""A small dense neural-network engine with hand-written backpropagation.

Layers are affine maps ``y = act(W x + b)`` with ``W`` of shape (out, in).
Batches are row-major: a batch of inputs is an array of shape (n, in).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

ACTIVATIONS = ("identity", "relu", "sigmoid", "softmax", "threshold01")
LOSSES = ("mse", "cross_entropy")
SCHEDULES = ("constant", "linear_decay_to_zero")

# decayed learning rates never drop below this fraction of lr0
LR_FLOOR = 1e-4


class TrainingError(RuntimeError):
    pass


def one_hot(i: int, n: int) -> np.ndarray:
    """Standard basis vector e^i of length ``n`` (``i`` is 1-based, as in e^1..e^n)."""
    if not 1 <= i <= n:
        raise ValueError(f"index {i} outside 1..{n}")
    v = np.zeros(n)
    v[i - 1] = 1.0
    return v


def softmax(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _activate(kind: str, z: np.ndarray) -> np.ndarray:
    if kind == "identity":
        return z
    if kind == "relu":
        return np.maximum(z, 0)
    if kind == "sigmoid":
        return 0.5 * (1.0 + np.tanh(0.5 * z))
    if kind == "softmax":
        return softmax(z)
    if kind == "threshold01":
        # exact comparison; callers feed integer-valued pre-activations
        return (z == 0).astype(z.dtype)
    raise ValueError(f"unknown activation {kind!r}")


def _activation_grad(kind: str, z: np.ndarray, y: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Gradient w.r.t. pre-activation ``z`` given upstream gradient ``g`` w.r.t. ``y``."""
    if kind == "identity":
        return g
    if kind == "relu":
        return g * (z > 0)
    if kind == "sigmoid":
        return g * y * (1.0 - y)
    if kind == "softmax":
        return y * (g - np.sum(g * y, axis=-1, keepdims=True))
    raise ValueError(f"activation {kind!r} is not differentiable")


@dataclass
class Layer:
    weight: np.ndarray
    bias: np.ndarray | None = None
    activation: str = "identity"

    @property
    def in_width(self) -> int:
        return self.weight.shape[1]

    @property
    def out_width(self) -> int:
        return self.weight.shape[0]


class DenseNet:
    def __init__(self, layers: Sequence[Layer]):
        if not layers:
            raise ValueError("a net needs at least one layer")
        for k, layer in enumerate(layers):
            if layer.activation not in ACTIVATIONS:
                raise ValueError(f"layer {k}: unknown activation {layer.activation!r}")
            if layer.weight.ndim != 2:
                raise ValueError(f"layer {k}: weight must be a matrix")
            if layer.bias is not None and layer.bias.shape != (layer.out_width,):
                raise ValueError(f"layer {k}: bias shape {layer.bias.shape} != ({layer.out_width},)")
            if k and layers[k - 1].out_width != layer.in_width:
                raise ValueError(f"layer {k} expects width {layer.in_width}, "
                                 f"previous layer gives {layers[k - 1].out_width}")
            if layer.activation == "softmax" and k != len(layers) - 1:
                raise ValueError("softmax is only allowed as the final activation")
        self.layers = list(layers)

    @classmethod
    def build(cls, widths: Sequence[int], activations: Sequence[str], bias: bool = True,
              seed: int | np.random.Generator = 0, init: str = "word2vec") -> "DenseNet":
        """Fresh net with layer widths ``widths[0] -> ... -> widths[-1]``.

        ``init="word2vec"`` draws weights from U(-0.5/in, 0.5/in);
        ``init="glorot"`` from U(-r, r) with r = sqrt(6 / (in + out)).
        Biases start at zero.
        """
        if len(activations) != len(widths) - 1:
            raise ValueError("need one activation per layer")
        rng = np.random.default_rng(seed)
        layers = []
        for n_in, n_out, act in zip(widths[:-1], widths[1:], activations):
            if init == "word2vec":
                r = 0.5 / n_in
            elif init == "glorot":
                r = math.sqrt(6.0 / (n_in + n_out))
            else:
                raise ValueError(f"unknown init {init!r}")
            w = rng.uniform(-r, r, size=(n_out, n_in))
            layers.append(Layer(w, np.zeros(n_out) if bias else None, act))
        return cls(layers)

    @property
    def in_width(self) -> int:
        return self.layers[0].in_width

    @property
    def out_width(self) -> int:
        return self.layers[-1].out_width

    @property
    def frozen(self) -> bool:
        return any(layer.activation == "threshold01" for layer in self.layers)

    def parameters(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out.append(layer.weight)
            if layer.bias is not None:
                out.append(layer.bias)
        return out

    def copy(self) -> "DenseNet":
        return DenseNet([Layer(l.weight.copy(), None if l.bias is None else l.bias.copy(), l.activation)
                         for l in self.layers])

    def _check_input(self, x):
        x = np.asarray(x)
        if x.shape[-1] != self.in_width:
            raise ValueError(f"input width {x.shape[-1]} != net input width {self.in_width}")
        return x

    def forward(self, x) -> np.ndarray:
        """Apply the net to one vector or to a batch of row vectors."""
        y = self._check_input(x)
        for layer in self.layers:
            z = y @ layer.weight.T
            if layer.bias is not None:
                z = z + layer.bias
            y = _activate(layer.activation, z)
        return y

    __call__ = forward

    def forward_cache(self, x) -> list[tuple[np.ndarray, np.ndarray, np.ndarray]]:
        """Forward pass on a batch, keeping (input, pre-activation, output) per layer."""
        y = np.atleast_2d(self._check_input(x)).astype(np.float64, copy=False)
        cache = []
        for layer in self.layers:
            z = y @ layer.weight.T
            if layer.bias is not None:
                z = z + layer.bias
            out = _activate(layer.activation, z)
            cache.append((y, z, out))
            y = out
        return cache

    def backward(self, cache, grad_out: np.ndarray, preactivation: bool = False):
        """Backpropagate a gradient w.r.t. the batch output.

        With ``preactivation=True`` the gradient is taken to be w.r.t. the last
        layer's pre-activation (used for the fused softmax/cross-entropy step).
        Returns ``(grads, grad_input)`` where ``grads`` is aligned with
        :meth:`parameters` and holds sums over the batch.
        """
        if self.frozen:
            raise TrainingError("cannot backpropagate through a frozen (threshold01) net")
        grads: list[np.ndarray] = []
        g = np.atleast_2d(grad_out)
        for k in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[k]
            x, z, y = cache[k]
            if not (preactivation and k == len(self.layers) - 1):
                g = _activation_grad(layer.activation, z, y, g)
            if layer.bias is not None:
                grads.append(g.sum(axis=0))
            grads.append(g.T @ x)
            g = g @ layer.weight
        grads.reverse()
        return grads, g

    # checkpoints: one JSON header line, then raw little-endian float64 data

    def save(self, path) -> None:
        header = {"layers": [{"shape": list(l.weight.shape), "bias": l.bias is not None,
                              "activation": l.activation} for l in self.layers]}
        with open(path, "wb") as fh:
            fh.write((json.dumps(header, sort_keys=True) + "\n").encode())
            for p in self.parameters():
                fh.write(np.ascontiguousarray(p, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path) -> "DenseNet":
        with open(path, "rb") as fh:
            header = json.loads(fh.readline())
            data = fh.read()
        flat = np.frombuffer(data, dtype="<f8")
        pos = 0
        layers = []
        for spec in header["layers"]:
            rows, cols = spec["shape"]
            w = flat[pos:pos + rows * cols].reshape(rows, cols).copy()
            pos += rows * cols
            b = None
            if spec["bias"]:
                b = flat[pos:pos + rows].copy()
                pos += rows
            layers.append(Layer(w, b, spec["activation"]))
        if pos != flat.size:
            raise ValueError(f"{path}: checkpoint has {flat.size - pos} trailing values")
        return cls(layers)


# Losses: value is the batch mean; gradient is per example (not divided by n)

def loss_value(kind: str, y: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Per-example loss for a batch."""
    if kind == "mse":
        return np.mean((y - t) ** 2, axis=-1)
    if kind == "cross_entropy":
        return -np.sum(t * np.log(np.clip(y, 1e-300, None)), axis=-1)
    raise ValueError(f"unknown loss {kind!r}")


def loss_grad(kind: str, y: np.ndarray, t: np.ndarray) -> np.ndarray:
    if kind == "mse":
        return 2.0 * (y - t) / y.shape[-1]
    if kind == "cross_entropy":
        return -t / np.clip(y, 1e-300, None)
    raise ValueError(f"unknown loss {kind!r}")


@dataclass
class TrainConfig:
    epochs: int = 1
    lr0: float = 0.01
    lr_schedule: str = "constant"
    batch_size: int = 1
    loss: str = "mse"
    seed: int = 0
    shuffle: bool = True

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.lr0 < 0:
            raise ValueError("lr0 must be non-negative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.loss not in LOSSES:
            raise ValueError(f"loss must be one of {LOSSES}")
        if self.lr_schedule not in SCHEDULES:
            raise ValueError(f"lr_schedule must be one of {SCHEDULES}")

    def as_dict(self):
        return asdict(self)


def learning_rate(cfg: TrainConfig, step: int, total_steps: int) -> float:
    if cfg.lr_schedule == "constant":
        return cfg.lr0
    frac = 1.0 - step / total_steps
    return cfg.lr0 * max(frac, LR_FLOOR)


def _as_arrays(examples):
    if isinstance(examples, tuple) and len(examples) == 2 and isinstance(examples[0], np.ndarray):
        return examples
    xs = np.array([np.asarray(x, dtype=np.float64) for x, _ in examples])
    ts = np.array([np.asarray(t, dtype=np.float64) for _, t in examples])
    return xs, ts


@dataclass
class TrainResult:
    net: DenseNet
    loss_trace: list[float] = field(default_factory=list)


def train(net: DenseNet, examples, cfg: TrainConfig,
          epoch_examples: Callable[[int], tuple[np.ndarray, np.ndarray]] | None = None) -> TrainResult:
    """Mini-batch SGD on ``net`` in place.

    ``examples`` is a list of (input, target) pairs or a pair of arrays. If
    ``epoch_examples`` is given it is called with the epoch number and its
    arrays replace ``examples`` for that epoch (every epoch must have the
    same number of examples). Returns the net and the per-epoch mean loss,
    measured on the forward passes taken during the epoch.
    """
    if net.frozen:
        raise TrainingError("net contains a threshold01 layer and cannot be trained")
    rng = np.random.default_rng(cfg.seed)
    xs, ts = _as_arrays(examples) if epoch_examples is None else epoch_examples(0)
    n = len(xs)
    if n == 0:
        raise TrainingError("no training examples")
    if xs.shape[1] != net.in_width or ts.shape[1] != net.out_width:
        raise ValueError(f"examples are {xs.shape[1]}->{ts.shape[1]}, net is {net.in_width}->{net.out_width}")
    batches_per_epoch = math.ceil(n / cfg.batch_size)
    total = cfg.epochs * batches_per_epoch
    fused = net.layers[-1].activation == "softmax" and cfg.loss == "cross_entropy"
    params = net.parameters()
    trace = []
    step = 0
    for epoch in range(cfg.epochs):
        if epoch_examples is not None and epoch:
            xs, ts = epoch_examples(epoch)
            if len(xs) != n:
                raise TrainingError(f"epoch {epoch} has {len(xs)} examples, expected {n}")
        order = rng.permutation(n) if cfg.shuffle else np.arange(n)
        total_loss = 0.0
        for b in range(batches_per_epoch):
            idx = order[b * cfg.batch_size:(b + 1) * cfg.batch_size]
            x, t = xs[idx], ts[idx]
            cache = net.forward_cache(x)
            y = cache[-1][2]
            losses = loss_value(cfg.loss, y, t)
            batch_loss = float(losses.sum())
            if not math.isfinite(batch_loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch {b}")
            total_loss += batch_loss
            g = (y - t) if fused else loss_grad(cfg.loss, y, t)
            grads, _ = net.backward(cache, g, preactivation=fused)
            lr = learning_rate(cfg, step, total) / len(idx)
            for p, gp in zip(params, grads):
                p -= lr * gp
            step += 1
        trace.append(total_loss / n)
    return TrainResult(net, trace)


def gradient_check(net: DenseNet, example, loss: str, h: float = 1e-5) -> float:
    """Largest relative error between backprop and central-difference gradients.

    Relative error is ``|a - n| / max(|a|, |n|, 1e-6)`` per parameter entry.
    """
    x, t = (np.atleast_2d(np.asarray(v, dtype=np.float64)) for v in example)
    fused = net.layers[-1].activation == "softmax" and loss == "cross_entropy"
    cache = net.forward_cache(x)
    y = cache[-1][2]
    g = (y - t) if fused else loss_grad(loss, y, t)
    grads, _ = net.backward(cache, g, preactivation=fused)

    def f():
        return float(loss_value(loss, net.forward(x), t).sum())

    return max_relative_error(net.parameters(), grads, f, h)


def max_relative_error(params, grads, f: Callable[[], float], h: float = 1e-5) -> float:
    worst = 0.0
    for p, gp in zip(params, grads):
        flat = p.reshape(-1)
        gflat = gp.reshape(-1)
        for k in range(flat.size):
            old = flat[k]
            flat[k] = old + h
            up = f()
            flat[k] = old - h
            down = f()
            flat[k] = old
            num = (up - down) / (2 * h)
            a = gflat[k]
            worst = max(worst, abs(a - num) / max(abs(a), abs(num), 1e-6))
    return worst


def write_loss_trace(trace: Sequence[float], path) -> None:
    Path(path).write_text("epoch,loss\n" + "".join(f"{i + 1},{v!r}\n" for i, v in enumerate(trace)))
