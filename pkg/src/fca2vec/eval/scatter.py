"""Labelled point export for external plotting."""

from __future__ import annotations

import csv
from typing import Callable, Sequence

import numpy as np

from ..fc2vec import EmbeddingTable
from ..lattice import Concept


def scatter_export(points, labels: Sequence[str] | Callable[[int], str], path) -> int:
    """Write ``x,y[,z],label`` rows; returns the row count.

    ``points`` is an ``EmbeddingTable`` or an (n, d) array with d in {2, 3};
    ``labels`` is a sequence or a function of the row index.
    """
    vecs = points.vectors if isinstance(points, EmbeddingTable) else np.asarray(points, dtype=np.float64)
    if vecs.ndim != 2 or vecs.shape[1] not in (2, 3):
        raise ValueError("scatter export needs 2- or 3-dimensional points")
    label_of = labels if callable(labels) else (lambda i: labels[i])
    header = ["x", "y", "z"][:vecs.shape[1]] + ["label"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i, v in enumerate(vecs):
            w.writerow([repr(float(a)) for a in v] + [label_of(i)])
    return len(vecs)


def intent_labeler(concepts: Sequence[Concept], attr_labels: dict[int, str],
                   default: str = "other") -> Callable[[int], str]:
    """Label concept i by the first attribute of ``attr_labels`` (by index) in its intent."""
    def label(i: int) -> str:
        bits = concepts[i].intent.bits
        for m, name in attr_labels.items():
            if bits >> m & 1:
                return name
        return default
    return label
