"""Brute-force reference implementations on boolean matrices.

Nothing here imports the package; everything works on explicit numpy
incidence matrices and Python frozensets so it can act as an independent
check of the bitset code.
"""

from __future__ import annotations

import itertools

import numpy as np


def extent(inc: np.ndarray, attrs) -> frozenset:
    attrs = list(attrs)
    if not attrs:
        return frozenset(range(inc.shape[0]))
    return frozenset(np.flatnonzero(inc[:, attrs].all(axis=1)).tolist())


def intent(inc: np.ndarray, objs) -> frozenset:
    objs = list(objs)
    if not objs:
        return frozenset(range(inc.shape[1]))
    return frozenset(np.flatnonzero(inc[objs, :].all(axis=0)).tolist())


def closure(inc: np.ndarray, attrs) -> frozenset:
    return intent(inc, extent(inc, attrs))


def all_subsets(n: int):
    for k in range(n + 1):
        for c in itertools.combinations(range(n), k):
            yield frozenset(c)


def concepts(inc: np.ndarray) -> set[tuple[frozenset, frozenset]]:
    """Every (extent, intent) pair, found by closing all 2^|M| attribute sets."""
    return {(extent(inc, b), closure(inc, b)) for b in all_subsets(inc.shape[1])}


def covers(cs) -> set[tuple]:
    """(lower, upper) concept pairs with nothing strictly between (by extent inclusion)."""
    cs = list(cs)
    out = set()
    for lo in cs:
        for up in cs:
            if not lo[0] < up[0]:
                continue
            if any(lo[0] < mid[0] < up[0] for mid in cs):
                continue
            out.add((lo, up))
    return out


def pseudo_intents(inc: np.ndarray) -> list[frozenset]:
    """Pseudo-intents by the recursive definition, processed by increasing size."""
    found: list[frozenset] = []
    for p in sorted(all_subsets(inc.shape[1]), key=len):
        if closure(inc, p) == p:
            continue
        if all(closure(inc, q) <= p for q in found if q < p):
            found.append(p)
    return found


def random_context(rng: np.random.Generator, n_obj: int, n_attr: int, density: float = 0.4) -> np.ndarray:
    """Random incidence with no empty row or column."""
    inc = rng.random((n_obj, n_attr)) < density
    for g in range(n_obj):
        if not inc[g].any():
            inc[g, rng.integers(n_attr)] = True
    for m in range(n_attr):
        if not inc[:, m].any():
            inc[rng.integers(n_obj), m] = True
    return inc
