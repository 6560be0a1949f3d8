"""Temporal link prediction on the co-occurrence graph of a context's objects.

Objects are nodes; two objects are linked when they share an attribute.
Attribute years split the graph into a training period and a test period.
Edges are featurised as the Hadamard product of the endpoint embeddings and
classified with L2-regularised logistic regression.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit

from ..context import ContextError, FormalContext, iter_bits
from ..fc2vec import EmbeddingTable, object2vec_config, train_object2vec
from ..lattice import enumerate_concepts
from .common import mean_std, round_seeds

log = logging.getLogger(__name__)

C_GRID = (1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2)
Edge = tuple[int, int]


@dataclass(frozen=True)
class TemporalSplit:
    train_cutoff_year: int = 2015
    test_start_year: int = 2016
    test_end_year: int = 2019

    def __post_init__(self):
        if not self.train_cutoff_year < self.test_start_year <= self.test_end_year:
            raise ValueError("need cutoff < test_start <= test_end")


def _edge(g: int, h: int) -> Edge:
    return (g, h) if g < h else (h, g)


def _edges_of_attrs(ctx: FormalContext, attrs: Sequence[int]) -> set[Edge]:
    out = set()
    for m in attrs:
        members = list(iter_bits(ctx.cols[m]))
        out.update(itertools.combinations(members, 2))
    return out


def _largest_component(n: int, edges: set[Edge]) -> list[int]:
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for g, h in edges:
        a, b = find(g), find(h)
        if a != b:
            parent[max(a, b)] = min(a, b)
    comps: dict[int, list[int]] = {}
    for g in range(n):
        comps.setdefault(find(g), []).append(g)
    touched = {g for e in edges for g in e}
    # isolated nodes are not part of the co-occurrence graph
    cands = [c for c in comps.values() if len(c) > 1 or c[0] in touched]
    if not cands:
        return []
    return max(cands, key=lambda c: (len(c), -c[0]))


@dataclass
class CoauthorGraph:
    """Edges use object indices of the original context."""
    nodes: list[int]
    train_edges: list[Edge]
    test_positive: list[Edge]
    all_edges: set[Edge]
    train_context: FormalContext


def coauthor_graph(ctx: FormalContext, split: TemporalSplit) -> CoauthorGraph:
    """Training graph (attributes up to the cutoff), restricted to its largest component,
    and test positives (pairs first linked inside the test window)."""
    if ctx.attribute_year is None:
        raise ContextError("link prediction needs attribute years (year sidecar)")
    years = ctx.attribute_year
    train_attrs = [m for m in range(ctx.n_attributes) if years[m] <= split.train_cutoff_year]
    test_attrs = [m for m in range(ctx.n_attributes)
                  if split.test_start_year <= years[m] <= split.test_end_year]
    train_all = _edges_of_attrs(ctx, train_attrs)
    nodes = _largest_component(ctx.n_objects, train_all)
    node_set = set(nodes)
    train_edges = sorted(e for e in train_all if e[0] in node_set)
    test_edges = _edges_of_attrs(ctx, test_attrs) - train_all
    test_positive = sorted(e for e in test_edges if e[0] in node_set and e[1] in node_set)
    mask = sum(1 << g for g in nodes)
    kept_attrs = [m for m in train_attrs if ctx.cols[m] & mask]
    train_ctx = ctx.subcontext(nodes, kept_attrs)
    all_edges = _edges_of_attrs(ctx, range(ctx.n_attributes))
    return CoauthorGraph(nodes, train_edges, test_positive, all_edges, train_ctx)


def negative_sample_edges(nodes: Sequence[int], positives, count: int,
                          constraint: Callable[[Edge], bool] | None = None, seed: int = 0) -> list[Edge]:
    """``count`` distinct node pairs, drawn uniformly from the non-edges that pass ``constraint``."""
    pos = {_edge(*e) for e in positives}
    ordered = sorted(nodes)
    cands = [e for e in itertools.combinations(ordered, 2)
             if e not in pos and (constraint is None or constraint(e))]
    if len(cands) < count:
        raise ValueError(f"insufficient non-edges: need {count}, have {len(cands)}")
    rng = np.random.default_rng(seed)
    pick = rng.choice(len(cands), size=count, replace=False)
    return [cands[i] for i in pick]


def edge_features(table: EmbeddingTable | np.ndarray, edge) -> np.ndarray:
    vecs = table.vectors if isinstance(table, EmbeddingTable) else np.asarray(table)
    g, h = edge
    return vecs[g] * vecs[h]


def edge_feature_matrix(vecs: np.ndarray, edges: Sequence[Edge]) -> np.ndarray:
    if not edges:
        return np.zeros((0, vecs.shape[1]))
    idx = np.asarray(edges)
    return vecs[idx[:, 0]] * vecs[idx[:, 1]]


# logistic regression

@dataclass
class LogisticRegression:
    """L2-regularised logistic regression; the intercept is not penalised.

    Minimises ``0.5 * |w|^2 + C * sum(log(1 + exp(-y_i (w.x_i + b))))`` with
    L-BFGS on the exact gradient.
    """
    C: float = 1.0
    coef: np.ndarray | None = None
    intercept: float = 0.0

    def fit(self, x, y) -> "LogisticRegression":
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y)
        if len(np.unique(y)) < 2:
            raise ValueError("logistic regression needs both classes in the labels")
        s = np.where(y > 0, 1.0, -1.0)
        n, d = x.shape
        c = self.C

        def f(theta):
            w, b = theta[:d], theta[d]
            z = s * (x @ w + b)
            loss = 0.5 * w @ w + c * np.sum(np.logaddexp(0.0, -z))
            r = -c * s * expit(-z)
            return loss, np.concatenate([w + x.T @ r, [r.sum()]])

        res = minimize(f, np.zeros(d + 1), jac=True, method="L-BFGS-B",
                       options={"maxiter": 1000, "gtol": 1e-10, "ftol": 1e-14})
        self.coef = res.x[:d]
        self.intercept = float(res.x[d])
        return self

    def decision_function(self, x) -> np.ndarray:
        return np.asarray(x, dtype=np.float64) @ self.coef + self.intercept

    def predict_proba(self, x) -> np.ndarray:
        return expit(self.decision_function(x))

    def predict(self, x) -> np.ndarray:
        return (self.predict_proba(x) > 0.5).astype(np.int64)


def precision_recall_f1(y_true, y_pred) -> tuple[float, float, float]:
    y_true = np.asarray(y_true).astype(bool)
    y_pred = np.asarray(y_pred).astype(bool)
    tp = int(np.sum(y_true & y_pred))
    fp = int(np.sum(~y_true & y_pred))
    fn = int(np.sum(y_true & ~y_pred))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def stratified_folds(y, k: int, seed: int) -> list[np.ndarray]:
    """Test-index arrays for k folds with per-class round-robin assignment."""
    y = np.asarray(y)
    rng = np.random.default_rng(seed)
    fold_of = np.empty(len(y), dtype=np.int64)
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        idx = idx[rng.permutation(len(idx))]
        fold_of[idx] = np.arange(len(idx)) % k
    return [np.flatnonzero(fold_of == f) for f in range(k)]


def cross_val_f1(x, y, C: float, folds: Sequence[np.ndarray]) -> float:
    scores = []
    n = len(y)
    for test in folds:
        train = np.setdiff1d(np.arange(n), test)
        if len(np.unique(y[train])) < 2 or len(test) == 0:
            continue
        model = LogisticRegression(C).fit(x[train], y[train])
        scores.append(precision_recall_f1(y[test], model.predict(x[test]))[2])
    return float(np.mean(scores)) if scores else 0.0


def logistic_regression_train(features, labels, c_grid: Sequence[float] = C_GRID,
                              seed: int = 0, folds: int = 5) -> LogisticRegression:
    """Pick C by stratified k-fold F1 (first best on ties), then refit on all data."""
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels).astype(np.int64)
    if len(np.unique(y)) < 2:
        raise ValueError("labels contain a single class")
    k = min(folds, int(np.min(np.bincount(y))))
    best_c, best = c_grid[0], -1.0
    if k >= 2:
        split = stratified_folds(y, k, seed)
        for c in c_grid:
            score = cross_val_f1(x, y, c, split)
            if score > best:
                best_c, best = c, score
    model = LogisticRegression(best_c).fit(x, y)
    return model


# the experiment

@dataclass
class BinaryClassifierReport:
    recall: tuple[float, float]
    precision: tuple[float, float]
    f1: tuple[float, float]
    rounds: list[dict] = field(default_factory=list)
    info: dict = field(default_factory=dict)

    @classmethod
    def from_rounds(cls, rounds: list[dict], info: dict | None = None) -> "BinaryClassifierReport":
        return cls(mean_std([r["recall"] for r in rounds]),
                   mean_std([r["precision"] for r in rounds]),
                   mean_std([r["f1"] for r in rounds]), rounds, info or {})

    def as_dict(self):
        return {"summary": {k: {"mean": v[0], "stdev": v[1]} for k, v in
                            (("recall", self.recall), ("precision", self.precision), ("f1", self.f1))},
                "rounds": self.rounds, "info": self.info}


@dataclass
class LinkPredictionData:
    graph: CoauthorGraph
    train_edges: list[Edge]
    train_labels: np.ndarray
    test_edges: list[Edge]
    test_labels: np.ndarray


def build_link_data(ctx: FormalContext, split: TemporalSplit, seed: int = 0) -> LinkPredictionData:
    """Balanced train and test edge sets.

    Training negatives are non-edges of the training graph; test negatives
    are node pairs that never share any attribute.
    """
    graph = coauthor_graph(ctx, split)
    if not graph.train_edges:
        raise ValueError("training graph has no edges")
    if not graph.test_positive:
        raise ValueError("no test-period edges between training-graph nodes")
    s1, s2 = round_seeds(seed, 2, stream=1)
    train_neg = negative_sample_edges(graph.nodes, graph.train_edges, len(graph.train_edges), seed=s1)
    test_neg = negative_sample_edges(graph.nodes, graph.all_edges, len(graph.test_positive), seed=s2)
    train_edges = list(graph.train_edges) + train_neg
    test_edges = list(graph.test_positive) + test_neg
    return LinkPredictionData(
        graph, train_edges, np.r_[np.ones(len(graph.train_edges)), np.zeros(len(train_neg))].astype(np.int64),
        test_edges, np.r_[np.ones(len(graph.test_positive)), np.zeros(len(test_neg))].astype(np.int64))


def _node_vectors(data: LinkPredictionData, table: EmbeddingTable, ctx: FormalContext) -> np.ndarray:
    """Embedding rows aligned to original object indices (zeros outside the training graph)."""
    vecs = np.zeros((ctx.n_objects, table.dim))
    pos = {name: i for i, name in enumerate(table.names)}
    for g in data.graph.nodes:
        name = ctx.objects[g]
        if name not in pos:
            raise ValueError(f"embedding table lacks node {name!r}")
        vecs[g] = table.vectors[pos[name]]
    return vecs


def evaluate_embedding(data: LinkPredictionData, table: EmbeddingTable, ctx: FormalContext,
                       seed: int = 0, c_grid: Sequence[float] = C_GRID) -> dict:
    vecs = _node_vectors(data, table, ctx)
    xtr = edge_feature_matrix(vecs, data.train_edges)
    xte = edge_feature_matrix(vecs, data.test_edges)
    clf = logistic_regression_train(xtr, data.train_labels, c_grid, seed)
    precision, recall, f1 = precision_recall_f1(data.test_labels, clf.predict(xte))
    return {"recall": recall, "precision": precision, "f1": f1, "C": clf.C}


def random_table(names: Sequence[str], d: int, seed: int) -> EmbeddingTable:
    rng = np.random.default_rng(seed)
    return EmbeddingTable(list(names), rng.standard_normal((len(names), d)), {"method": "random", "seed": seed})


def link_prediction_experiment(ctx: FormalContext, split: TemporalSplit | None = None, arch: str = "CBoW",
                               d: int = 3, rounds: int = 30, seed: int = 0, epochs: int = 200,
                               embedding: str = "o2v", table: EmbeddingTable | None = None,
                               c_grid: Sequence[float] = C_GRID) -> BinaryClassifierReport:
    """Repeat embedding + classification ``rounds`` times on one fixed balanced dataset.

    ``embedding`` is ``"o2v"`` (train object2vec each round), ``"random"``
    (untrained standard-normal vectors) or ``"table"`` (the given external table).
    """
    split = split or TemporalSplit()
    data = build_link_data(ctx, split, seed)
    train_ctx = data.graph.train_context
    concepts = enumerate_concepts(train_ctx) if embedding == "o2v" else None
    results = []
    for r, rs in enumerate(round_seeds(seed, rounds)):
        if embedding == "o2v":
            emb = train_object2vec(train_ctx, arch, d, object2vec_config(seed=rs, epochs=epochs), concepts).table
        elif embedding == "random":
            emb = random_table(train_ctx.objects, d, rs)
        elif embedding == "table":
            if table is None:
                raise ValueError("embedding='table' needs a table")
            emb = table
        else:
            raise ValueError(f"unknown embedding source {embedding!r}")
        res = evaluate_embedding(data, emb, ctx, rs, c_grid)
        res["round"] = r
        res["seed"] = rs
        results.append(res)
        log.info("link prediction round %d: f1 %.4f", r, res["f1"])
    info = {"nodes": len(data.graph.nodes), "train_examples": len(data.train_edges),
            "test_examples": len(data.test_edges), "arch": arch, "d": d, "embedding": embedding,
            "epochs": epochs, "seed": seed, "split": vars(split)}
    return BinaryClassifierReport.from_rounds(results, info)
