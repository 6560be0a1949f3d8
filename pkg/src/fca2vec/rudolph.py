"""Exact neural-network representation of a context's closure operator.

The first layer has weight ``W[g, m] = 0`` if ``(g, m)`` is incident and
``-1`` otherwise, so its pre-activation for an attribute set ``B`` is
``-|B \\ {g}'|``; a threshold that maps exactly 0 to 1 and negatives to 0
yields the binary encoding of ``B'``. The second layer uses ``W.T`` and the
same threshold, giving ``B''``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .context import AttrSet, FormalContext, iter_bits
from .nn import DenseNet, Layer

EXHAUSTIVE_LIMIT = 20


def build_closure_net(ctx: FormalContext) -> DenseNet:
    w = np.where(ctx.matrix, 0, -1).astype(np.int64)
    return DenseNet([Layer(w, None, "threshold01"), Layer(w.T.copy(), None, "threshold01")])


def hidden_layer(net: DenseNet, x) -> np.ndarray:
    """Activation of the object layer for an encoded attribute set."""
    layer = net.layers[0]
    return (np.asarray(x) @ layer.weight.T == 0).astype(np.int64)


def encode(attrs: AttrSet) -> np.ndarray:
    return attrs.to_array(dtype=np.int64)


def _encodings(width: int, subsets) -> np.ndarray:
    out = np.zeros((len(subsets), width), dtype=np.int64)
    for r, bits in enumerate(subsets):
        out[r, list(iter_bits(bits))] = 1
    return out


@dataclass
class Verification:
    ok: bool
    counterexample: AttrSet | None = None
    checked: int = 0

    def __bool__(self):
        return self.ok


def verify_closure_net(ctx: FormalContext, net: DenseNet, samples: int | None = None,
                       seed: int = 0, batch: int = 4096) -> Verification:
    """Check ``net(B) == B''`` for every B (exhaustive when |M| <= 20) or for random samples.

    The first failing set is returned as a counterexample.
    """
    n = ctx.n_attributes
    if samples is None and n > EXHAUSTIVE_LIMIT:
        raise ValueError(f"|M| = {n} is too large for exhaustive mode; pass samples=")
    if samples is None:
        source = iter(range(1 << n))
    else:
        rng = np.random.default_rng(seed)
        source = (int("".join(map(str, row)), 2) if n else 0
                  for row in rng.integers(0, 2, size=(samples, n)).tolist())
    checked = 0
    while True:
        chunk = list(itertools.islice(source, batch))
        if not chunk:
            return Verification(True, None, checked)
        x = _encodings(n, chunk)
        got = net.forward(x)
        want = _encodings(n, [ctx._closure(b) for b in chunk])
        bad = np.flatnonzero(np.any(got != want, axis=1))
        checked += len(chunk)
        if bad.size:
            return Verification(False, AttrSet(chunk[bad[0]], n), checked)


def best_affine_fit_residual(ctx: FormalContext, ridge: float = 1e-10) -> float:
    """Max absolute residual of the least-squares affine map from B to B'' over all B.

    Rows of the design matrix are ``[1, enc(B)]``; the normal equations carry
    a small ridge term to cope with rank deficiency.
    """
    n = ctx.n_attributes
    if n > 12:
        raise ValueError("affine fit is exhaustive over 2^|M| sets; |M| must be <= 12")
    subsets = list(range(1 << n))
    x = np.hstack([np.ones((len(subsets), 1)), _encodings(n, subsets).astype(np.float64)])
    y = _encodings(n, [ctx._closure(b) for b in subsets]).astype(np.float64)
    gram = x.T @ x + ridge * np.eye(n + 1)
    coef = np.linalg.solve(gram, x.T @ y)
    return float(np.max(np.abs(x @ coef - y)))


@dataclass
class LinearDiagnostic:
    train_mse: float
    heldout_mse: float
    train_exact: float
    heldout_exact: float
    loss_trace: list


def linear_derivation_diagnostic(ctx: FormalContext, d: int = 3, samples: int = 2000, heldout: float = 0.2,
                                 epochs: int = 50, lr0: float = 0.01, max_size: int = 3,
                                 seed: int = 0) -> LinearDiagnostic:
    """Fit a purely linear net |M| -> d -> |G| to the derivation B -> B' on random attribute sets.

    Set sizes are uniform in 1..``max_size`` so that most sets have a
    non-empty extent.
    Reports mean squared error and the fraction of exactly recovered extents
    (after rounding at 0.5) on the training sets and on unseen sets. The net
    is not expected to generalise; this only documents that it does not.
    """
    from .nn import DenseNet, TrainConfig, train

    n, g = ctx.n_attributes, ctx.n_objects
    rng = np.random.default_rng(seed)
    sets = np.zeros((samples, n), dtype=np.int64)
    for r in range(samples):
        k = int(rng.integers(1, min(max_size, n) + 1))
        sets[r, rng.choice(n, size=k, replace=False)] = 1
    x = sets.astype(np.float64)
    bits = [sum(1 << int(m) for m in np.flatnonzero(row)) for row in sets]
    y = np.zeros((samples, g))
    for r, b in enumerate(bits):
        y[r, list(iter_bits(ctx._extent_of(b)))] = 1.0
    cut = int(round(samples * (1 - heldout)))
    net = DenseNet.build([n, d, g], ["identity", "identity"], seed=seed, init="glorot")
    res = train(net, (x[:cut], y[:cut]), TrainConfig(epochs=epochs, lr0=lr0, batch_size=16, loss="mse", seed=seed))

    def score(xs, ys):
        out = net.forward(xs)
        return float(np.mean((out - ys) ** 2)), float(np.mean(np.all((out > 0.5) == (ys > 0.5), axis=1)))

    tr, te = score(x[:cut], y[:cut]), score(x[cut:], y[cut:])
    return LinearDiagnostic(tr[0], te[0], tr[1], te[1], res.loss_trace)
