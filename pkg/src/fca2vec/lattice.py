"""Concept enumeration, the covering relation and the canonical base."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .context import AttrSet, FormalContext, ObjSet, iter_bits, lectic_key, popcount

log = logging.getLogger(__name__)

PROGRESS_EVERY = 50_000


@dataclass(frozen=True)
class Concept:
    extent: ObjSet
    intent: AttrSet

    def __le__(self, other: "Concept") -> bool:
        return concept_order_leq(self, other)


@dataclass(frozen=True)
class Implication:
    premise: AttrSet
    conclusion: AttrSet  # full closure of the premise

    def holds_for(self, attrs: AttrSet) -> bool:
        return not self.premise <= attrs or self.conclusion <= attrs


@dataclass
class ConceptLattice:
    concepts: list[Concept]
    covers: list[tuple[int, int]]  # (lower, upper) indices into concepts

    @classmethod
    def of(cls, ctx: FormalContext, threads: int | None = 1) -> "ConceptLattice":
        concepts = enumerate_concepts(ctx)
        return cls(concepts, covering_relation(concepts, threads=threads))


def concept_order_leq(c1: Concept, c2: Concept) -> bool:
    return c1.extent <= c2.extent


# Concept enumeration

def _concepts_raw(ctx: FormalContext) -> list[tuple[int, int]]:
    """Close-by-One over attributes; returns (extent, intent) bit pairs in DFS order."""
    n_attr = ctx.n_attributes
    cols = ctx.cols
    full = ctx.full_objects

    def intent_from(ext, start, base):
        # attributes >= start whose column contains ext
        out = base
        for i in range(start, n_attr):
            if not out >> i & 1 and cols[i] & ext == ext:
                out |= 1 << i
        return out

    top_intent = intent_from(full, 0, 0)
    out = []
    stack = [(full, top_intent, 0)]
    while stack:
        ext, intent, y = stack.pop()
        out.append((ext, intent))
        if len(out) % PROGRESS_EVERY == 0:
            log.info("enumerated %d concepts", len(out))
        children = []
        for j in range(y, n_attr):
            if intent >> j & 1:
                continue
            new_ext = ext & cols[j]
            # canonicity: no attribute i < j outside the intent may be implied
            canonical = True
            for i in range(j):
                if not intent >> i & 1 and cols[i] & new_ext == new_ext:
                    canonical = False
                    break
            if canonical:
                children.append((new_ext, intent_from(new_ext, j + 1, intent | 1 << j), j + 1))
        stack.extend(reversed(children))
    return out


def enumerate_concepts(ctx: FormalContext) -> list[Concept]:
    """All formal concepts of ``ctx``, each once, intents in lectic order.

    The first concept is the top (extent G) and the last is the bottom
    (intent M).
    """
    raw = _concepts_raw(ctx)
    n_attr, n_obj = ctx.n_attributes, ctx.n_objects
    raw.sort(key=lambda p: lectic_key(p[1], n_attr))
    return [Concept(ObjSet(e, n_obj), AttrSet(i, n_attr)) for e, i in raw]


def brute_force_intents(ctx: FormalContext) -> list[int]:
    """Closures of all 2^|M| attribute subsets, deduplicated, lectic order (oracle)."""
    seen = {ctx._closure(b) for b in range(1 << ctx.n_attributes)}
    return sorted(seen, key=lambda b: lectic_key(b, ctx.n_attributes))


# Covering relation

def _lower_neighbors(intent: int, n_attr: int, cols, rows, full_attr: int) -> list[int]:
    """Lindig's neighbour search, dualised to attributes: intents of lower covers."""
    ext = full_objects_of(intent, cols, len(rows))
    candidates = full_attr & ~intent
    minimal = candidates
    out = []
    for m in iter_bits(candidates):
        new_ext = ext & cols[m]
        new_intent = full_attr
        for g in iter_bits(new_ext):
            new_intent &= rows[g]
        if minimal & (new_intent & ~intent & ~(1 << m)) == 0:
            out.append(new_intent)
        else:
            minimal &= ~(1 << m)
    return out


def full_objects_of(intent: int, cols, n_obj: int) -> int:
    ext = (1 << n_obj) - 1
    for m in iter_bits(intent):
        ext &= cols[m]
    return ext


_worker_state = {}


def _init_worker(cols, rows, n_attr):
    _worker_state.update(cols=cols, rows=rows, n_attr=n_attr)


def _cover_chunk(intents):
    s = _worker_state
    full = (1 << s["n_attr"]) - 1
    return [_lower_neighbors(b, s["n_attr"], s["cols"], s["rows"], full) for b in intents]


def covering_relation(concepts: Sequence[Concept], threads: int | None = 1) -> list[tuple[int, int]]:
    """Edges (lower, upper) of the transitive reduction of the concept order.

    Works per concept, searching its lower neighbours; ``threads > 1`` farms
    chunks of concepts out to worker processes. Edges are sorted.
    """
    if not concepts:
        return []
    index = {}
    for k, c in enumerate(concepts):
        if c.intent.bits in index:
            raise ValueError(f"duplicate concept with intent {c.intent.indices()}")
        index[c.intent.bits] = k
    n_attr = concepts[0].intent.width
    n_obj = concepts[0].extent.width
    # incidence recovered from the concepts: (g, m) in I iff some concept
    # has g in its extent and m in its intent
    rows = [0] * n_obj
    for c in concepts:
        for g in iter_bits(c.extent.bits):
            rows[g] |= c.intent.bits
    cols = [0] * n_attr
    for g, r in enumerate(rows):
        for m in iter_bits(r):
            cols[m] |= 1 << g
    intents = [c.intent.bits for c in concepts]
    threads = resolve_threads(threads)
    if threads > 1 and len(intents) > 2000:
        size = max(1, len(intents) // (threads * 8))
        chunks = [intents[i:i + size] for i in range(0, len(intents), size)]
        with ProcessPoolExecutor(threads, initializer=_init_worker,
                                 initargs=(tuple(cols), tuple(rows), n_attr)) as pool:
            results = [r for chunk in pool.map(_cover_chunk, chunks) for r in chunk]
    else:
        full = (1 << n_attr) - 1
        results = [_lower_neighbors(b, n_attr, cols, rows, full) for b in intents]
    edges = []
    for upper, lowers in enumerate(results):
        for b in lowers:
            try:
                edges.append((index[b], upper))
            except KeyError:
                raise ValueError("concept list is incomplete: missing a lower neighbour") from None
    edges.sort()
    return edges


def resolve_threads(threads: int | None) -> int:
    if threads is None:
        env = os.environ.get("FCA2VEC_THREADS")
        threads = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(threads))


def brute_force_covers(concepts: Sequence[Concept]) -> list[tuple[int, int]]:
    """Transitive reduction of the full order (oracle, quadratic memory)."""
    exts = [c.extent.bits for c in concepts]
    n = len(exts)
    less = [[i != j and exts[i] & ~exts[j] == 0 for j in range(n)] for i in range(n)]
    edges = []
    for i in range(n):
        for j in range(n):
            if less[i][j] and not any(less[i][k] and less[k][j] for k in range(n)):
                edges.append((i, j))
    return sorted(edges)


# Canonical base

class _ImplicationStore:
    """Premise/conclusion bit masks; closure switches to numpy for large bases."""

    NUMPY_THRESHOLD = 256

    def __init__(self, n_attr):
        self.words = max(1, (n_attr + 63) // 64)
        self.prem: list[int] = []
        self.conc: list[int] = []
        self._np_prem = np.zeros((0, self.words), dtype=np.uint64)
        self._np_conc = np.zeros((0, self.words), dtype=np.uint64)
        self._pcols = [np.zeros(0, dtype=np.uint64) for _ in range(self.words)]

    def _to_words(self, x):
        return [(x >> (64 * w)) & 0xFFFFFFFFFFFFFFFF for w in range(self.words)]

    def _from_words(self, arr):
        out = 0
        for w, v in enumerate(arr.tolist()):
            out |= int(v) << (64 * w)
        return out

    def add(self, premise, conclusion):
        self.prem.append(premise)
        self.conc.append(conclusion)

    def _sync(self):
        done = len(self._np_prem)
        if done < len(self.prem):
            new_p = np.array([self._to_words(p) for p in self.prem[done:]], dtype=np.uint64)
            new_c = np.array([self._to_words(c) for c in self.conc[done:]], dtype=np.uint64)
            self._np_prem = np.vstack([self._np_prem, new_p])
            self._np_conc = np.vstack([self._np_conc, new_c])
            # one contiguous array per 64-bit word keeps the hot loop on 1-d ufuncs
            self._pcols = [np.ascontiguousarray(self._np_prem[:, w]) for w in range(self.words)]

    def closure(self, x: int) -> int:
        """Smallest superset of ``x`` closed under P -> C for every stored P strictly inside it."""
        if len(self.prem) < self.NUMPY_THRESHOLD:
            changed = True
            while changed:
                changed = False
                for p, c in zip(self.prem, self.conc):
                    if p & ~x == 0 and p != x and c & ~x:
                        x |= c
                        changed = True
            return x
        self._sync()
        cols = self._pcols
        while True:
            xw = self._to_words(x)
            outside = cols[0] & np.uint64(~xw[0] & 0xFFFFFFFFFFFFFFFF)
            differs = cols[0] != np.uint64(xw[0])
            for w in range(1, self.words):
                outside |= cols[w] & np.uint64(~xw[w] & 0xFFFFFFFFFFFFFFFF)
                differs |= cols[w] != np.uint64(xw[w])
            fire = np.flatnonzero((outside == 0) & differs)
            if not fire.size:
                return x
            grown = x | self._from_words(np.bitwise_or.reduce(self._np_conc[fire], axis=0))
            if grown == x:
                return x
            x = grown


def canonical_base(ctx: FormalContext) -> list[Implication]:
    """Duquenne-Guigues base via NextClosure; premises are the pseudo-intents in lectic order."""
    n_attr = ctx.n_attributes
    full = ctx.full_attributes
    store = _ImplicationStore(n_attr)
    closure = ctx._closure
    a = 0
    found = []
    steps = 0
    while True:
        closed = closure(a)
        if closed != a:
            store.add(a, closed)
            found.append((a, closed))
            if len(found) % 1000 == 0:
                log.info("canonical base: %d implications so far", len(found))
        if a == full:
            break
        a = _next_closed(a, n_attr, store.closure)
        if a is None:
            break
        steps += 1
        if steps % PROGRESS_EVERY == 0:
            log.info("canonical base: visited %d closed sets", steps)
    return [Implication(AttrSet(p, n_attr), AttrSet(c, n_attr)) for p, c in found]


def _next_closed(a: int, n_attr: int, close) -> int | None:
    """Lectically next set closed under ``close`` after ``a`` (element 0 most significant)."""
    for i in range(n_attr - 1, -1, -1):
        bit = 1 << i
        if a & bit:
            a &= ~bit
            continue
        lower = bit - 1
        b = close(a | bit)
        if b & lower & ~a == 0:
            return b
    return None


def brute_force_pseudo_intents(ctx: FormalContext) -> list[int]:
    """Pseudo-intents by definition over all 2^|M| subsets (oracle, small |M| only).

    P is a pseudo-intent iff P is not closed and the closure of every
    pseudo-intent strictly inside P is contained in P.
    """
    n = ctx.n_attributes
    pseudo = []
    for p in sorted(range(1 << n), key=popcount):
        if ctx._closure(p) == p:
            continue
        if all(ctx._closure(q) & ~p == 0 for q in pseudo if q & ~p == 0 and q != p):
            pseudo.append(p)
    return sorted(pseudo, key=lambda b: lectic_key(b, n))


def implication_closure(implications: Iterable[Implication], attrs: AttrSet) -> AttrSet:
    """Forward-chaining closure of ``attrs`` under the given implications."""
    x = attrs.bits
    imps = [(i.premise.bits, i.conclusion.bits) for i in implications]
    changed = True
    while changed:
        changed = False
        for p, c in imps:
            if p & ~x == 0 and c & ~x:
                x |= c
                changed = True
    return AttrSet(x, attrs.width)


# Exports

def _names(bits, names):
    return ",".join(names[i] for i in iter_bits(bits))


def write_concepts(concepts: Sequence[Concept], path) -> None:
    with open(path, "w") as fh:
        for k, c in enumerate(concepts):
            fh.write(f"{k}\t{c.extent.hex()}\t{c.intent.hex()}\n")


def read_concepts(path, n_obj: int, n_attr: int) -> list[Concept]:
    out = []
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        _, e, i = line.split("\t")
        out.append(Concept(ObjSet.from_hex(e, n_obj), AttrSet.from_hex(i, n_attr)))
    return out


def write_covers(edges: Sequence[tuple[int, int]], path) -> None:
    with open(path, "w") as fh:
        for lo, up in edges:
            fh.write(f"{lo}\t{up}\n")


def read_covers(path) -> list[tuple[int, int]]:
    out = []
    for line in Path(path).read_text().splitlines():
        if line.strip():
            a, b = line.split("\t")
            out.append((int(a), int(b)))
    return out


def format_implication(imp: Implication, attributes: Sequence[str]) -> str:
    """``premise -> conclusion`` with the conclusion reduced by the premise."""
    rest = imp.conclusion.bits & ~imp.premise.bits
    return f"{_names(imp.premise.bits, attributes)} -> {_names(rest, attributes)}"


def write_base(base: Sequence[Implication], attributes: Sequence[str], path) -> None:
    with open(path, "w") as fh:
        for imp in base:
            fh.write(format_implication(imp, attributes) + "\n")


def read_base(path, attributes: Sequence[str]) -> list[Implication]:
    """Inverse of :func:`write_base`; conclusions are stored as premise | rest."""
    index = {a: i for i, a in enumerate(attributes)}
    n = len(attributes)
    out = []
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        left, right = line.split(" -> ")
        p = sum(1 << index[a] for a in left.split(",") if a)
        c = sum(1 << index[a] for a in right.split(",") if a) | p
        out.append(Implication(AttrSet(p, n), AttrSet(c, n)))
    return out
