"""object2vec and attribute2vec.

Training examples come from concept extents: every extent A with
1 < |A| < |G| yields, for each a in A, the target/context pair (a, A \\ {a}).
Skip-gram emits one (target, context object) example per context object;
CBoW emits one (mean of context one-hots, target) example per pair. The
embedding net is the two-matrix word2vec net with a softmax output, trained
by SGD on cross-entropy.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .context import FormalContext, ObjSet, dualize, iter_bits, popcount
from .lattice import Concept, enumerate_concepts
from .nn import DenseNet, TrainConfig, TrainingError, learning_rate

log = logging.getLogger(__name__)

ARCHITECTURES = ("SG", "CBoW")


@dataclass(frozen=True)
class TargetContextPair:
    target: int
    context: ObjSet


def qualifying_extents(ctx: FormalContext, concepts: Sequence[Concept]) -> list[int]:
    n = ctx.n_objects
    return [c.extent.bits for c in concepts if 1 < popcount(c.extent.bits) < n]


def target_context_pairs(ctx: FormalContext, concepts: Sequence[Concept]) -> list[TargetContextPair]:
    """(a, A \\ {a}) for every extent A with 1 < |A| < |G| and every a in A."""
    n = ctx.n_objects
    out = []
    for ext in qualifying_extents(ctx, concepts):
        for a in iter_bits(ext):
            out.append(TargetContextPair(a, ObjSet(ext & ~(1 << a), n)))
    return out


def _extents_from_pairs(pairs: Sequence[TargetContextPair]) -> tuple[list[int], list[int], int]:
    """Distinct extents in first-seen order, with the mask of targets supplied for each."""
    if not pairs:
        return [], [], 0
    width = pairs[0].context.width
    seen: dict[int, int] = {}
    for p in pairs:
        ext = p.context.bits | 1 << p.target
        seen[ext] = seen.get(ext, 0) | 1 << p.target
    return list(seen), list(seen.values()), width


class TrainingExampleList:
    """Ordered training examples kept as object indices.

    For SG, ``inputs[k]`` is a one-element index tuple (the target) and
    ``targets[k]`` the context object; for CBoW ``inputs[k]`` holds the
    context objects (their one-hots are averaged) and ``targets[k]`` the
    target object. Dense vectors are produced on demand.
    """

    def __init__(self, arch: str, width: int, inputs: list[tuple[int, ...]], targets: list[int]):
        if arch not in ARCHITECTURES:
            raise ValueError(f"architecture must be one of {ARCHITECTURES}")
        self.arch = arch
        self.width = width
        self.inputs = inputs
        self.targets = targets

    def __len__(self):
        return len(self.targets)

    def input_vector(self, k: int) -> np.ndarray:
        v = np.zeros(self.width)
        idx = self.inputs[k]
        v[list(idx)] = 1.0 / len(idx)
        return v

    def target_vector(self, k: int) -> np.ndarray:
        v = np.zeros(self.width)
        v[self.targets[k]] = 1.0
        return v

    def __getitem__(self, k):
        return self.input_vector(k), self.target_vector(k)

    def __iter__(self):
        for k in range(len(self)):
            yield self[k]

    def keys(self) -> list[tuple[tuple[int, ...], int]]:
        """Hashable identity of each example: (sorted input indices, target)."""
        return [(tuple(sorted(i)), t) for i, t in zip(self.inputs, self.targets)]

    def dense(self) -> tuple[np.ndarray, np.ndarray]:
        xs = np.zeros((len(self), self.width))
        ts = np.zeros((len(self), self.width))
        for k, (idx, t) in enumerate(zip(self.inputs, self.targets)):
            xs[k, list(idx)] = 1.0 / len(idx)
            ts[k, t] = 1.0
        return xs, ts


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def traverse_extents(extents: Sequence[int], width: int, arch: str, seed,
               roles: Sequence[int] | None = None) -> TrainingExampleList:
    """Randomised traversal of extents: shuffle the extent list, shuffle each extent's members,
    then emit SG or CBoW examples in that order.

    ``roles`` optionally restricts, per extent, which members (as a bit mask) act as target.
    """
    if arch not in ARCHITECTURES:
        raise ValueError(f"architecture must be one of {ARCHITECTURES}")
    rng = _rng(seed)
    inputs: list[tuple[int, ...]] = []
    targets: list[int] = []
    order = rng.permutation(len(extents))
    for e in order:
        members = list(iter_bits(extents[e]))
        members = [members[i] for i in rng.permutation(len(members))]
        if len(members) < 2:
            continue
        allowed = extents[e] if roles is None else roles[e]
        for o in members:
            if not allowed >> o & 1:
                continue
            if arch == "SG":
                for c in members:
                    if c != o:
                        inputs.append((o,))
                        targets.append(c)
            else:
                inputs.append(tuple(c for c in members if c != o))
                targets.append(o)
    return TrainingExampleList(arch, width, inputs, targets)


def sg_examples(pairs: Sequence[TargetContextPair], seed) -> TrainingExampleList:
    extents, roles, width = _extents_from_pairs(pairs)
    return traverse_extents(extents, width, "SG", seed, roles)


def cbow_examples(pairs: Sequence[TargetContextPair], seed) -> TrainingExampleList:
    extents, roles, width = _extents_from_pairs(pairs)
    return traverse_extents(extents, width, "CBoW", seed, roles)


@dataclass
class EmbeddingTable:
    names: list[str]
    vectors: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self):
        return len(self.names)

    def vector(self, name: str) -> np.ndarray:
        return self.vectors[self.names.index(name)]

    def write(self, path) -> None:
        """TSV ``name<TAB>v1..vd`` plus ``<path>.json`` metadata."""
        path = Path(path)
        with open(path, "w") as fh:
            for name, v in zip(self.names, self.vectors):
                fh.write(name + "\t" + "\t".join(repr(float(a)) for a in v) + "\n")
        path.with_suffix(path.suffix + ".json").write_text(
            json.dumps(self.metadata, indent=2, sort_keys=True) + "\n")

    @classmethod
    def read(cls, path) -> "EmbeddingTable":
        path = Path(path)
        names, rows = [], []
        for lineno, line in enumerate(path.read_text().splitlines(), 1):
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) < 2:
                raise ValueError(f"{path}:{lineno}: expected name and at least one coordinate")
            names.append(parts[0])
            rows.append([float(x) for x in parts[1:]])
        if len({len(r) for r in rows}) > 1:
            raise ValueError(f"{path}: rows have differing dimensions")
        meta_path = path.with_suffix(path.suffix + ".json")
        meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
        return cls(names, np.array(rows, dtype=np.float64), meta)


def object2vec_config(**overrides) -> TrainConfig:
    base = dict(epochs=200, lr0=1.0, lr_schedule="linear_decay_to_zero", batch_size=1,
                loss="cross_entropy", seed=0, shuffle=False)
    base.update(overrides)
    return TrainConfig(**base)


def new_net(n: int, d: int, seed) -> DenseNet:
    net = DenseNet.build([n, d, n], ["identity", "softmax"], bias=False, seed=seed)
    return net


def _sgd_epoch(w: np.ndarray, u: np.ndarray, examples: TrainingExampleList, cfg: TrainConfig,
               step: int, total: int, epoch: int) -> tuple[float, int]:
    """One pass of batch-size-1 SGD on softmax(U W x); updates w (d x n) and u (n x d) in place.

    Only the columns of ``w`` touched by the sparse input move, exactly as in
    the dense update.
    """
    total_loss = 0.0
    for k, (idx, t) in enumerate(zip(examples.inputs, examples.targets)):
        lr = learning_rate(cfg, step, total)
        cols = list(idx)
        weight = 1.0 / len(cols)
        h = w[:, cols].sum(axis=1) * weight
        z = u @ h
        zmax = z.max()
        e = np.exp(z - zmax)
        s = e.sum()
        loss = math.log(s) + zmax - z[t]
        if not math.isfinite(loss):
            raise TrainingError(f"non-finite loss at epoch {epoch}, batch {k}")
        total_loss += loss
        g = e / s
        g[t] -= 1.0
        dh = u.T @ g
        u -= lr * np.outer(g, h)
        w[:, cols] -= (lr * weight) * dh[:, None]
        step += 1
    return total_loss, step


@dataclass
class Object2VecResult:
    table: EmbeddingTable
    net: DenseNet
    loss_trace: list[float]


def train_object2vec(ctx: FormalContext, arch: str = "CBoW", d: int = 3,
                     cfg: TrainConfig | None = None, concepts: Sequence[Concept] | None = None,
                     global_shuffle: bool = False) -> Object2VecResult:
    """Train object embeddings; rows of the result are the columns of the input matrix W.

    Examples are regenerated with a fresh extent traversal every epoch.
    ``global_shuffle`` additionally permutes the whole example list per epoch.
    """
    if arch not in ARCHITECTURES:
        raise ValueError(f"architecture must be one of {ARCHITECTURES}")
    cfg = cfg or object2vec_config()
    if cfg.loss != "cross_entropy" or cfg.batch_size != 1:
        raise ValueError("object2vec trains with cross_entropy and batch_size 1")
    if concepts is None:
        concepts = enumerate_concepts(ctx)
    extents = qualifying_extents(ctx, concepts)
    if not extents:
        raise TrainingError("context has no extent A with 1 < |A| < |G|; nothing to train on")
    n = ctx.n_objects
    net = new_net(n, d, cfg.seed)
    w, u = net.layers[0].weight, net.layers[1].weight

    def examples_for(epoch):
        ex = traverse_extents(extents, n, arch, [cfg.seed, epoch + 1])
        if global_shuffle:
            order = np.random.default_rng([cfg.seed, epoch + 1, 7]).permutation(len(ex))
            ex = TrainingExampleList(arch, n, [ex.inputs[i] for i in order], [ex.targets[i] for i in order])
        return ex

    first = examples_for(0)
    per_epoch = len(first)
    total = cfg.epochs * per_epoch
    trace = []
    step = 0
    for epoch in range(cfg.epochs):
        ex = first if epoch == 0 else examples_for(epoch)
        loss, step = _sgd_epoch(w, u, ex, cfg, step, total, epoch)
        trace.append(loss / per_epoch)
    meta = {"method": "object2vec", "arch": arch, "d": d, "seed": cfg.seed, "epochs": cfg.epochs,
            "lr0": cfg.lr0, "lr_schedule": cfg.lr_schedule, "context_hash": ctx.content_hash(),
            "examples_per_epoch": per_epoch}
    table = EmbeddingTable(list(ctx.objects), w.T.copy(), meta)
    return Object2VecResult(table, net, trace)


def train_attribute2vec(ctx: FormalContext, arch: str = "SG", d: int = 3,
                        cfg: TrainConfig | None = None, concepts: Sequence[Concept] | None = None,
                        global_shuffle: bool = False) -> Object2VecResult:
    """object2vec on the transposed context; ``concepts`` must be those of the dual."""
    res = train_object2vec(dualize(ctx), arch, d, cfg, concepts, global_shuffle)
    res.table.metadata["method"] = "attribute2vec"
    res.table.metadata["context_hash"] = ctx.content_hash()
    return res
