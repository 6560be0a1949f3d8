"""Embedding distances along the lattice structure and along canonical-base implications."""

from __future__ import annotations

import logging
from typing import Sequence

import numpy as np

from ..closure2vec import SiameseModel, _distance_and_grads, embed_many
from ..lattice import ConceptLattice, Implication
from .common import DistanceStats

log = logging.getLogger(__name__)

DEFAULT_SAMPLE_CAP = 1_000_000


def _rowwise(model: SiameseModel, e1: np.ndarray, e2: np.ndarray) -> np.ndarray:
    if len(e1) == 0:
        return np.zeros(0)
    return _distance_and_grads(model.distance, e1, e2)[0]


def non_cover_pairs(n_concepts: int, covers: Sequence[tuple[int, int]], sample_cap: int,
                    seed: int = 0) -> np.ndarray:
    """Unordered pairs of distinct concepts not in the covering relation.

    All of them when there are at most ``sample_cap``; otherwise ``sample_cap``
    pairs drawn uniformly with replacement.
    """
    cover_set = {(min(a, b), max(a, b)) for a, b in covers}
    total = n_concepts * (n_concepts - 1) // 2 - len(cover_set)
    if total <= 0:
        return np.zeros((0, 2), dtype=np.int64)
    if total <= sample_cap:
        iu = np.triu_indices(n_concepts, 1)
        pairs = np.stack(iu, 1)
        keep = np.fromiter(((int(a), int(b)) not in cover_set for a, b in pairs), bool, len(pairs))
        return pairs[keep]
    rng = np.random.default_rng(seed)
    out = []
    need = sample_cap
    while need > 0:
        cand = rng.integers(0, n_concepts, size=(2 * need + 16, 2))
        cand = np.sort(cand, axis=1)
        cand = cand[cand[:, 0] != cand[:, 1]]
        keep = np.fromiter(((int(a), int(b)) not in cover_set for a, b in cand), bool, len(cand))
        cand = cand[keep][:need]
        out.append(cand)
        need -= len(cand)
    return np.concatenate(out)


def covering_distance_experiment(model: SiameseModel, lattice: ConceptLattice,
                                 sample_cap: int = DEFAULT_SAMPLE_CAP, seed: int = 0) -> dict[str, DistanceStats]:
    """Distances between intent embeddings of covering pairs ("CR") and of other pairs ("NonCR")."""
    concepts = lattice.concepts
    if not concepts:
        raise ValueError("lattice has no concepts")
    width = concepts[0].intent.width
    emb = embed_many(model, [c.intent.bits for c in concepts], width)
    cov = np.asarray(lattice.covers, dtype=np.int64).reshape(-1, 2)
    ncr = non_cover_pairs(len(concepts), lattice.covers, sample_cap, seed)
    cr_d = _rowwise(model, emb[cov[:, 0]], emb[cov[:, 1]])
    ncr_d = _rowwise(model, emb[ncr[:, 0]], emb[ncr[:, 1]])
    total = len(concepts) * (len(concepts) - 1) // 2 - len(cov)
    if total > sample_cap:
        log.warning("non-cover pairs sampled: %d of %d", len(ncr), total)
    return {"CR": DistanceStats.of("CR", cr_d), "NonCR": DistanceStats.of("NonCR", ncr_d)}


def _random_set(rng: np.random.Generator, n: int, size: int) -> int:
    out = 0
    for m in rng.choice(n, size=min(size, n), replace=False):
        out |= 1 << int(m)
    return out


def implication_distance_experiment(model: SiameseModel, base: Sequence[Implication],
                                    seed: int = 0) -> dict[str, DistanceStats]:
    """Premise-to-attribute and premise-to-conclusion distances for every base implication.

    ``S-Imp`` pairs each premise with the singletons of its (closed)
    conclusion, ``Non-S-Imp`` with the remaining singletons. ``Imp`` compares
    premise and conclusion; ``Non-Imp`` compares random sets of the same two
    sizes, one pair per implication.
    """
    if not base:
        raise ValueError("implication base is empty")
    n = base[0].premise.width
    rng = np.random.default_rng(seed)
    prem = embed_many(model, [i.premise.bits for i in base], n)
    concl = embed_many(model, [i.conclusion.bits for i in base], n)
    single = embed_many(model, [1 << m for m in range(n)], n)
    rand_x, rand_y = [], []
    for imp in base:
        rand_x.append(_random_set(rng, n, len(imp.premise)))
        rand_y.append(_random_set(rng, n, len(imp.conclusion)))
    ex = embed_many(model, rand_x, n)
    ey = embed_many(model, rand_y, n)
    in_c = np.array([[imp.conclusion.bits >> m & 1 for m in range(n)] for imp in base], dtype=bool)
    rows, cols = np.nonzero(np.ones((len(base), n), dtype=bool))
    all_d = _rowwise(model, prem[rows], single[cols]).reshape(len(base), n)
    return {
        "S-Imp": DistanceStats.of("S-Imp", all_d[in_c]),
        "Non-S-Imp": DistanceStats.of("Non-S-Imp", all_d[~in_c]),
        "Imp": DistanceStats.of("Imp", _rowwise(model, prem, concl)),
        "Non-Imp": DistanceStats.of("Non-Imp", _rowwise(model, ex, ey)),
    }
