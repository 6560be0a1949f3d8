"""JSON and CSV writers for experiment reports."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Sequence


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_default) + "\n")


def _default(o):
    if hasattr(o, "as_dict"):
        return o.as_dict()
    if hasattr(o, "tolist"):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def write_csv(header: Sequence[str], rows: Iterable[Sequence], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(x) if isinstance(x, float) else x for x in row])


def distance_rows(stats: dict) -> list[list]:
    return [[s.label, s.mean, s.stdev, s.count] for s in stats.values()]


DISTANCE_HEADER = ("group", "mean", "stdev", "count")
