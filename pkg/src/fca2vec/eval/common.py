"""Shared helpers for the experiment pipelines."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

log = logging.getLogger(__name__)


class DegenerateInputWarning(UserWarning):
    """Raised (as a warning) when an experiment input makes a metric trivially defined."""


def warn_degenerate(msg: str) -> None:
    warnings.warn(msg, DegenerateInputWarning, stacklevel=3)


def round_seeds(seed: int, rounds: int, stream: int = 0) -> list[int]:
    """Independent per-round integer seeds derived from one master seed.

    Different ``stream`` values give unrelated seed lists for the same master seed.
    """
    ss = np.random.SeedSequence(seed, spawn_key=(stream,))
    return [int(s) for s in ss.generate_state(rounds)]


def mean_std(values: Sequence[float]) -> tuple[float, float]:
    """Mean and sample standard deviation (n - 1); stdev is 0 for a single value."""
    vals = np.asarray(values, dtype=np.float64)
    if vals.size == 0:
        raise ValueError("no values")
    mean = float(vals.mean())
    std = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
    return mean, std


@dataclass(frozen=True)
class DistanceStats:
    label: str
    mean: float
    stdev: float
    count: int

    @classmethod
    def of(cls, label: str, values) -> "DistanceStats":
        vals = np.asarray(values, dtype=np.float64)
        if vals.size == 0:
            raise ValueError(f"{label}: no pairs to summarise")
        mean, std = mean_std(vals)
        return cls(label, mean, std, int(vals.size))

    def as_dict(self):
        return {"label": self.label, "mean": self.mean, "stdev": self.stdev, "count": self.count}


def finite(x: float) -> float:
    return x if math.isfinite(x) else float("nan")
