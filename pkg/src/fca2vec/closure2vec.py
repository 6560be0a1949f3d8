"""closure2vec: a siamese net embedding attribute sets so that distances track chd.

Both branches share one trunk ``rho(psi(phi(x)))`` with widths
|M| -> |G| -> |M| -> d, each an affine map followed by relu. The distance
between the two d-dimensional embeddings is regressed onto the normalised
closure Hamming distance with a mean-squared-error loss.
"""

from __future__ import annotations

import itertools
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .context import AttrSet, FormalContext, iter_bits, popcount
from .nn import DenseNet, TrainConfig, TrainingError, learning_rate, max_relative_error

log = logging.getLogger(__name__)

DISTANCES = ("euclidean", "cosine")


@dataclass(frozen=True)
class ChdSample:
    x: AttrSet
    y: AttrSet
    z: float


def generate_chd_samples(ctx: FormalContext, t: int = 4, seed: int = 0,
                         squared: bool = False) -> list[ChdSample]:
    """All attribute sets X with |X| <= t, each paired with X toggled at one random attribute.

    Targets are chd(X, Y) / |M|, squared when ``squared`` is set. Sets are
    visited by size, then in lexicographic order of their index tuples.
    """
    n = ctx.n_attributes
    if t < 0:
        raise ValueError("t must be non-negative")
    if t > n:
        log.warning("t=%d exceeds |M|=%d; clamping", t, n)
        t = n
    rng = np.random.default_rng(seed)
    total = sum(math.comb(n, k) for k in range(t + 1))
    toggles = rng.integers(0, n, size=total)
    closure = ctx._closure
    cache: dict[int, int] = {}

    def cl(b):
        c = cache.get(b)
        if c is None:
            c = cache[b] = closure(b)
        return c

    out = []
    k = 0
    for size in range(t + 1):
        for combo in itertools.combinations(range(n), size):
            x = sum(1 << i for i in combo)
            y = x ^ (1 << int(toggles[k]))
            z = popcount(cl(x) ^ cl(y)) / n
            if squared:
                z = z * z
            out.append(ChdSample(AttrSet(x, n), AttrSet(y, n), z))
            k += 1
    return out


def samples_to_arrays(samples: Sequence[ChdSample]):
    if not samples:
        raise ValueError("no samples")
    n = samples[0].x.width
    xs = np.zeros((len(samples), n))
    ys = np.zeros((len(samples), n))
    for r, s in enumerate(samples):
        xs[r, list(iter_bits(s.x.bits))] = 1
        ys[r, list(iter_bits(s.y.bits))] = 1
    return xs, ys, np.array([s.z for s in samples])


def write_samples(samples: Sequence[ChdSample], path) -> None:
    with open(path, "w") as fh:
        for s in samples:
            fh.write(f"{s.x.hex()}\t{s.y.hex()}\t{s.z!r}\n")


def read_samples(path, width: int) -> list[ChdSample]:
    out = []
    for line in Path(path).read_text().splitlines():
        if line.strip():
            x, y, z = line.split("\t")
            out.append(ChdSample(AttrSet.from_hex(x, width), AttrSet.from_hex(y, width), float(z)))
    return out


# distances between embedding batches, with gradients

def distance(kind: str, e1: np.ndarray, e2: np.ndarray) -> np.ndarray:
    return _distance_and_grads(kind, np.atleast_2d(e1), np.atleast_2d(e2))[0]


def _distance_and_grads(kind, e1, e2):
    """Row-wise distances and their gradients w.r.t. e1 and e2."""
    if kind == "euclidean":
        diff = e1 - e2
        d = np.sqrt(np.sum(diff * diff, axis=1))
        safe = np.where(d > 0, d, 1.0)
        g1 = np.where(d[:, None] > 0, diff / safe[:, None], 0.0)
        return d, g1, -g1
    if kind == "cosine":
        n1 = np.linalg.norm(e1, axis=1)
        n2 = np.linalg.norm(e2, axis=1)
        ok = (n1 > 0) & (n2 > 0)
        s1 = np.where(ok, n1, 1.0)
        s2 = np.where(ok, n2, 1.0)
        dot = np.sum(e1 * e2, axis=1)
        sim = dot / (s1 * s2)
        # a zero vector sits at distance 0 from another zero vector, 1 from anything else
        both_zero = (n1 == 0) & (n2 == 0)
        d = np.where(ok, 1.0 - sim, np.where(both_zero, 0.0, 1.0))
        g1 = -(e2 / (s1 * s2)[:, None] - (dot / (s1 ** 3 * s2))[:, None] * e1)
        g2 = -(e1 / (s1 * s2)[:, None] - (dot / (s1 * s2 ** 3))[:, None] * e2)
        g1 = np.where(ok[:, None], g1, 0.0)
        g2 = np.where(ok[:, None], g2, 0.0)
        return d, g1, g2
    raise ValueError(f"unknown distance {kind!r}")


@dataclass
class SiameseModel:
    trunk: DenseNet
    distance: str = "euclidean"
    squared_targets: bool = True

    @property
    def dim(self) -> int:
        return self.trunk.out_width

    def embed(self, x) -> np.ndarray:
        return self.trunk.forward(np.asarray(x, dtype=np.float64))

    def predict(self, x1, x2) -> np.ndarray:
        e1 = np.atleast_2d(self.embed(x1))
        e2 = np.atleast_2d(self.embed(x2))
        return _distance_and_grads(self.distance, e1, e2)[0]

    def loss_and_grads(self, x1, x2, z):
        """Summed squared error over the batch and parameter gradients of that sum."""
        c1 = self.trunk.forward_cache(x1)
        c2 = self.trunk.forward_cache(x2)
        d, g1, g2 = _distance_and_grads(self.distance, c1[-1][2], c2[-1][2])
        err = d - z
        grads1, _ = self.trunk.backward(c1, (2 * err)[:, None] * g1)
        grads2, _ = self.trunk.backward(c2, (2 * err)[:, None] * g2)
        return float(np.sum(err * err)), [a + b for a, b in zip(grads1, grads2)]


def new_model(ctx: FormalContext, d: int = 3, distance_kind: str = "euclidean", seed: int = 0,
              init: str = "glorot", squared_targets: bool | None = None) -> SiameseModel:
    if distance_kind not in DISTANCES:
        raise ValueError(f"distance must be one of {DISTANCES}")
    if squared_targets is None:
        squared_targets = distance_kind == "euclidean"
    n, g = ctx.n_attributes, ctx.n_objects
    trunk = DenseNet.build([n, g, n, d], ["relu"] * 3, seed=seed, init=init)
    return SiameseModel(trunk, distance_kind, squared_targets)


def closure2vec_config(**overrides) -> TrainConfig:
    base = dict(epochs=5, lr0=0.001, lr_schedule="constant", batch_size=32, loss="mse", seed=0)
    base.update(overrides)
    return TrainConfig(**base)


@dataclass
class Closure2VecResult:
    model: SiameseModel
    loss_trace: list[float] = field(default_factory=list)


def train_siamese(model: SiameseModel, samples: Sequence[ChdSample], cfg: TrainConfig) -> list[float]:
    """Mini-batch SGD on the siamese MSE in place; returns per-epoch mean loss."""
    if cfg.loss != "mse":
        raise ValueError("closure2vec trains with mse")
    xs, ys, zs = samples_to_arrays(samples)
    rng = np.random.default_rng(cfg.seed)
    n = len(zs)
    per_epoch = math.ceil(n / cfg.batch_size)
    total = cfg.epochs * per_epoch
    params = model.trunk.parameters()
    trace = []
    step = 0
    for epoch in range(cfg.epochs):
        order = rng.permutation(n) if cfg.shuffle else np.arange(n)
        total_loss = 0.0
        for b in range(per_epoch):
            idx = order[b * cfg.batch_size:(b + 1) * cfg.batch_size]
            loss, grads = model.loss_and_grads(xs[idx], ys[idx], zs[idx])
            if not math.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch {b}")
            total_loss += loss
            lr = learning_rate(cfg, step, total) / len(idx)
            for p, gp in zip(params, grads):
                p -= lr * gp
            step += 1
        trace.append(total_loss / n)
        log.debug("closure2vec epoch %d loss %.6f", epoch + 1, trace[-1])
    return trace


def train_closure2vec(ctx: FormalContext, samples: Sequence[ChdSample] | None = None, d: int = 3,
                      distance_kind: str = "euclidean", cfg: TrainConfig | None = None, t: int = 4,
                      init: str = "glorot") -> Closure2VecResult:
    """Build and train a closure2vec model.

    Without explicit ``samples`` they are generated with ``t`` and the config
    seed; targets are squared for the euclidean distance and plain for cosine.
    """
    cfg = cfg or closure2vec_config()
    squared = distance_kind == "euclidean"
    if samples is None:
        samples = generate_chd_samples(ctx, t=t, seed=cfg.seed, squared=squared)
    model = new_model(ctx, d, distance_kind, seed=cfg.seed, init=init, squared_targets=squared)
    trace = train_siamese(model, samples, cfg)
    return Closure2VecResult(model, trace)


def embed_attrset(model: SiameseModel, attrs: AttrSet) -> np.ndarray:
    return model.embed(attrs.to_array())


def embed_many(model: SiameseModel, sets: Sequence[int], width: int, batch: int = 8192) -> np.ndarray:
    """Embeddings for attribute sets given as bit masks, in order."""
    out = np.zeros((len(sets), model.dim))
    for start in range(0, len(sets), batch):
        chunk = sets[start:start + batch]
        x = np.zeros((len(chunk), width))
        for r, bits in enumerate(chunk):
            x[r, list(iter_bits(bits))] = 1
        out[start:start + len(chunk)] = model.embed(x)
    return out


def pair_distance(model: SiameseModel, b1: AttrSet, b2: AttrSet) -> float:
    return float(model.predict(b1.to_array(), b2.to_array())[0])


def siamese_gradient_check(model: SiameseModel, x1, x2, z, h: float = 1e-5) -> float:
    x1, x2 = np.atleast_2d(x1).astype(float), np.atleast_2d(x2).astype(float)
    z = np.atleast_1d(np.asarray(z, dtype=float))
    _, grads = model.loss_and_grads(x1, x2, z)

    def f():
        return float(np.sum((model.predict(x1, x2) - z) ** 2))

    return max_relative_error(model.trunk.parameters(), grads, f, h)


def write_embeddings(model: SiameseModel, sets: Sequence[AttrSet], path) -> None:
    """TSV ``set-hex<TAB>v1..vd``."""
    vecs = embed_many(model, [s.bits for s in sets], sets[0].width if sets else 0)
    with open(path, "w") as fh:
        for s, v in zip(sets, vecs):
            fh.write(s.hex() + "\t" + "\t".join(repr(float(a)) for a in v) + "\n")


def save_model(model: SiameseModel, path) -> None:
    path = Path(path)
    model.trunk.save(path)
    meta = {"distance": model.distance, "squared_targets": model.squared_targets}
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def load_model(path) -> SiameseModel:
    path = Path(path)
    meta = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    return SiameseModel(DenseNet.load(path), meta["distance"], meta["squared_targets"])

