"""Attribute clustering judged by how many canonical-base implications stay inside one cluster."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..context import FormalContext, dualize
from ..fc2vec import ARCHITECTURES, object2vec_config, train_attribute2vec
from ..lattice import Implication, canonical_base, enumerate_concepts
from .common import mean_std, round_seeds, warn_degenerate

log = logging.getLogger(__name__)


@dataclass
class Clustering:
    labels: np.ndarray
    k: int
    inertia: float = 0.0
    history: list[float] = field(default_factory=list)
    centers: np.ndarray | None = None

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.k):
            raise ValueError("cluster ids must lie in [0, k)")

    def masks(self) -> list[int]:
        """Member bit mask per cluster id."""
        out = [0] * self.k
        for i, c in enumerate(self.labels.tolist()):
            out[c] |= 1 << i
        return out

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k)


def _sq_dists(x: np.ndarray, centers: np.ndarray) -> np.ndarray:
    d = (x * x).sum(1)[:, None] - 2 * x @ centers.T + (centers * centers).sum(1)[None, :]
    return np.maximum(d, 0.0)


def _kmeanspp(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(x)
    centers = [x[rng.integers(n)]]
    closest = _sq_dists(x, centers[0][None, :])[:, 0]
    for _ in range(1, k):
        total = closest.sum()
        i = rng.choice(n, p=closest / total) if total > 0 else rng.integers(n)
        centers.append(x[i])
        closest = np.minimum(closest, _sq_dists(x, x[i][None, :])[:, 0])
    return np.array(centers)


def _lloyd(x: np.ndarray, centers: np.ndarray, max_iter: int, tol: float):
    k = len(centers)
    history = []
    labels = None
    for _ in range(max_iter):
        d = _sq_dists(x, centers)
        new = d.argmin(1)
        # keep every cluster populated: hand an empty cluster the point farthest from its center
        counts = np.bincount(new, minlength=k)
        for c in np.flatnonzero(counts == 0):
            own = d[np.arange(len(x)), new]
            movable = counts[new] > 1
            if not movable.any():
                break
            far = int(np.argmax(np.where(movable, own, -1.0)))
            counts[new[far]] -= 1
            new[far] = c
            counts[c] = 1
        inertia = float(d[np.arange(len(x)), new].sum())
        history.append(inertia)
        shifted = np.array([x[new == c].mean(0) for c in range(k)])
        moved = float(np.sum((shifted - centers) ** 2))
        centers = shifted
        if labels is not None and np.array_equal(new, labels) or moved <= tol:
            labels = new
            break
        labels = new
    inertia = float(_sq_dists(x, centers)[np.arange(len(x)), labels].sum())
    history.append(inertia)
    return labels, centers, inertia, history


def kmeans(vectors, k: int, seed: int = 0, n_init: int = 10, max_iter: int = 300,
           tol: float = 1e-12) -> Clustering:
    """Lloyd's algorithm from k-means++ seeds; the best of ``n_init`` restarts is kept."""
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("vectors must be a 2-d array")
    if k < 1 or k > len(x):
        raise ValueError(f"k={k} must lie in [1, {len(x)}]")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_init):
        labels, centers, inertia, history = _lloyd(x, _kmeanspp(x, k, rng), max_iter, tol)
        if best is None or inertia < best[2]:
            best = (labels, centers, inertia, history)
    labels, centers, inertia, history = best
    return Clustering(labels, k, inertia, history, centers)


def intra_cluster_ratio(base: Sequence[Implication], clustering: Clustering) -> float:
    """Fraction of implications whose premise and conclusion fit together in one cluster."""
    if not base:
        warn_degenerate("empty implication base; intra-cluster ratio defined as 0")
        return 0.0
    masks = clustering.masks()
    hits = 0
    for imp in base:
        u = imp.premise.bits | imp.conclusion.bits
        if any(u & ~m == 0 for m in masks):
            hits += 1
    return hits / len(base)


def random_clustering_baseline(clustering: Clustering, base: Sequence[Implication],
                               rounds: int = 50, seed: int = 0) -> tuple[float, float]:
    """Ratio statistics over random relabelings with the same cluster sizes."""
    rng = np.random.default_rng(seed)
    ratios = []
    for _ in range(rounds):
        perm = Clustering(rng.permutation(clustering.labels), clustering.k)
        ratios.append(intra_cluster_ratio(base, perm))
    return mean_std(ratios)


def naive_clustering(ctx: FormalContext, k: int, seed: int = 0) -> Clustering:
    """k-means on the 0/1 object columns of the attributes."""
    return kmeans(ctx.matrix.T.astype(np.float64), k, seed)


def clustering_experiment(ctx: FormalContext, d: int = 3, k_set: Sequence[int] = (2, 5, 10),
                          rounds: int = 20, seed: int = 0, epochs: int = 5,
                          archs: Sequence[str] = ARCHITECTURES, base: Sequence[Implication] | None = None,
                          baseline_rounds: int = 50) -> dict:
    """Per round: attribute2vec for every architecture, k-means for every k, the
    matching random baseline, and the naive clustering. Returns a JSON-ready report."""
    if base is None:
        base = canonical_base(ctx)
    if not base:
        warn_degenerate("canonical base is empty; every ratio is 0")
    dual_concepts = enumerate_concepts(dualize(ctx))
    per_round = []
    for r, rs in enumerate(round_seeds(seed, rounds)):
        entry = {"round": r, "seed": rs, "naive": {}, "embedding": {}}
        km_seed, base_seed = round_seeds(rs, 2, stream=2)
        for k in k_set:
            naive = naive_clustering(ctx, k, km_seed)
            entry["naive"][str(k)] = {"ratio": intra_cluster_ratio(base, naive),
                                      "max_size": int(naive.sizes().max())}
        for arch in archs:
            table = train_attribute2vec(ctx, arch, d, object2vec_config(seed=rs, epochs=epochs),
                                        dual_concepts).table
            res = {}
            for k in k_set:
                cl = kmeans(table.vectors, k, km_seed)
                bmean, bstd = random_clustering_baseline(cl, base, baseline_rounds, base_seed)
                res[str(k)] = {"ratio": intra_cluster_ratio(base, cl), "random_mean": bmean,
                               "random_stdev": bstd, "max_size": int(cl.sizes().max())}
            entry["embedding"][arch] = res
        per_round.append(entry)
        log.info("clustering round %d done", r)
    summary = {}
    for arch in archs:
        for k in k_set:
            key = f"{arch} d={d} k={k}"
            vals = [e["embedding"][arch][str(k)] for e in per_round]
            summary[key] = _summarise(vals, ("ratio", "random_mean", "max_size"))
    for k in k_set:
        summary[f"naive k={k}"] = _summarise([e["naive"][str(k)] for e in per_round], ("ratio", "max_size"))
    return {"config": {"d": d, "k_set": list(k_set), "rounds": rounds, "seed": seed, "epochs": epochs,
                       "archs": list(archs), "baseline_rounds": baseline_rounds},
            "base_size": len(base), "summary": summary, "rounds": per_round}


def _summarise(rows: list[dict], keys) -> dict:
    out = {}
    for key in keys:
        m, s = mean_std([row[key] for row in rows])
        out[key] = {"mean": m, "stdev": s}
    return out
