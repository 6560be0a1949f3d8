"""Seeded generators for the bundled surrogate data sets.

These stand in for data that cannot ship with the package: a categorical
table shaped like the mushroom records, a small co-authorship context with
publication years, and a sparse block-structured context with 100
attributes.
"""

from __future__ import annotations

import itertools
from typing import Sequence

import numpy as np

from .context import FormalContext, NominalTable

MUSHROOM_LIKE_CARDINALITIES = (3, 4, 3, 2, 5, 3, 4, 2)


def mushroom_like_table(n_rows: int = 500, n_species: int = 10,
                        cardinalities: Sequence[int] = MUSHROOM_LIKE_CARDINALITIES,
                        mutation: float = 0.05, seed: int = 0) -> NominalTable:
    """Rows drawn from latent species prototypes.

    Each species has a fixed value per feature and an edible/poisonous class;
    every feature of a row is replaced by a uniform random value with
    probability ``mutation``.
    """
    rng = np.random.default_rng(seed)
    protos = rng.integers(0, cardinalities, size=(n_species, len(cardinalities)))
    edible = rng.integers(0, 2, size=n_species)
    rows = []
    for _ in range(n_rows):
        s = rng.integers(n_species)
        row = ["e" if edible[s] else "p"]
        for j, card in enumerate(cardinalities):
            v = protos[s, j] if rng.random() > mutation else rng.integers(card)
            row.append(chr(ord("a") + int(v)))
        rows.append(row)
    columns = ["class"] + [f"f{j}" for j in range(len(cardinalities))]
    return NominalTable(columns, rows)


def temporal_context(n_groups: int = 2, group_size: int = 10, train_years=(2010, 2015),
                     test_years=(2016, 2019), paper_size: int = 3, train_fraction: float = 0.8,
                     bridges: int = 1, seed: int = 0) -> FormalContext:
    """Co-authorship context: objects are authors, attributes are papers with a year.

    Authors fall into groups. Before the cutoff, random ``paper_size``-author
    papers inside each group are written until at least ``train_fraction`` of
    the group's pairs have co-authored and the group is connected; ``bridges``
    two-author papers per neighbouring group pair link the groups. Every
    within-group pair that has not co-authored yet writes a paper in the test
    window.
    """
    rng = np.random.default_rng(seed)
    authors = [f"a{g}_{i}" for g in range(n_groups) for i in range(group_size)]
    papers: list[tuple[tuple[int, ...], int]] = []
    lo, hi = train_years
    size = min(paper_size, group_size)
    for g in range(n_groups):
        members = [g * group_size + i for i in range(group_size)]
        pairs = set(itertools.combinations(members, 2))
        covered: set = set()
        reach = {members[0]}
        while len(covered) < train_fraction * len(pairs) or len(reach) < group_size:
            who = tuple(sorted(int(a) for a in rng.choice(members, size=size, replace=False)))
            papers.append((who, int(rng.integers(lo, hi + 1))))
            covered.update(itertools.combinations(who, 2))
            if reach & set(who):
                reach |= set(who)
            # recompute reachability from scratch when a paper joins two parts later
            for _ in range(group_size):
                for p in covered:
                    if (p[0] in reach) != (p[1] in reach):
                        reach |= set(p)
        for p in sorted(pairs - covered):
            papers.append((p, int(rng.integers(test_years[0], test_years[1] + 1))))
    for g in range(n_groups - 1):
        for _ in range(bridges):
            a = g * group_size + int(rng.integers(group_size))
            b = (g + 1) * group_size + int(rng.integers(group_size))
            papers.append(((a, b), int(rng.integers(lo, hi + 1))))
    rows = [0] * len(authors)
    for m, (who, _) in enumerate(papers):
        for a in who:
            rows[a] |= 1 << m
    names = [f"p{m}" for m in range(len(papers))]
    return FormalContext(authors, names, rows, attribute_year=[y for _, y in papers], name="temporal")


def block_context(n_attributes: int = 100, n_blocks: int = 10, n_objects: int = 400,
                  attrs_per_object: int = 4, noise: float = 0.05, seed: int = 0) -> FormalContext:
    """Sparse context whose attributes form ``n_blocks`` co-occurring groups.

    Every object picks one block and draws ``attrs_per_object`` of its
    attributes with a block-internal popularity skew (so implications arise
    within blocks); each drawn attribute is swapped for a uniform random one
    with probability ``noise``.
    """
    rng = np.random.default_rng(seed)
    blocks = np.array_split(rng.permutation(n_attributes), n_blocks)
    rows = []
    for _ in range(n_objects):
        block = blocks[rng.integers(n_blocks)]
        weights = 1.0 / np.arange(1, len(block) + 1)
        k = min(attrs_per_object, len(block))
        picked = rng.choice(block, size=k, replace=False, p=weights / weights.sum())
        row = 0
        for m in picked:
            if rng.random() < noise:
                m = rng.integers(n_attributes)
            row |= 1 << int(m)
        rows.append(row)
    seen = 0
    for r in rows:
        seen |= r
    # every attribute must occur at least once
    for m in range(n_attributes):
        if not seen >> m & 1:
            rows[int(rng.integers(n_objects))] |= 1 << m
    return FormalContext([f"g{i}" for i in range(n_objects)], [f"m{j}" for j in range(n_attributes)],
                         rows, name="blocks")
