"""Formal contexts, derivation operators and context file formats.

Sets of objects and attributes are fixed-width bit vectors backed by Python
integers: bit ``i`` is set iff element ``i`` (by dense index) is a member.
"""

from __future__ import annotations

import csv
import hashlib
import logging
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)

MISSING = "?"


class DimensionError(ValueError):
    """Raised when a set's width does not match the context it is used with."""


class ContextError(ValueError):
    """Raised for contexts that violate the object/attribute invariants."""


class ParseError(ValueError):
    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}: "
        elif where:
            where += " "
        super().__init__(where + message)


def popcount(x: int) -> int:
    return bin(x).count("1")


def iter_bits(x: int):
    """Yield the indices of the set bits of ``x`` in ascending order."""
    while x:
        low = x & -x
        yield low.bit_length() - 1
        x ^= low


def lectic_key(bits: int, width: int) -> int:
    """Integer whose natural order is the lectic order of sets over ``width``.

    Element 0 is the most significant position, so the smallest element in
    which two sets differ decides which one is larger.
    """
    return int(format(bits, f"0{width}b")[::-1], 2) if width else 0


class BitSet:
    """Immutable fixed-width set of dense indices."""

    __slots__ = ("bits", "width")

    def __init__(self, bits: int = 0, width: int = 0):
        if bits < 0 or bits >> width:
            raise DimensionError(f"bits {bits:#x} do not fit width {width}")
        object.__setattr__(self, "bits", int(bits))
        object.__setattr__(self, "width", int(width))

    def __setattr__(self, name, value):
        raise AttributeError(f"{type(self).__name__} is immutable")

    @classmethod
    def from_indices(cls, indices: Iterable[int], width: int):
        bits = 0
        for i in indices:
            if not 0 <= i < width:
                raise DimensionError(f"index {i} out of range for width {width}")
            bits |= 1 << i
        return cls(bits, width)

    @classmethod
    def from_array(cls, arr):
        arr = np.asarray(arr).ravel()
        return cls.from_indices(np.flatnonzero(arr).tolist(), arr.size)

    @classmethod
    def full(cls, width: int):
        return cls((1 << width) - 1, width)

    @classmethod
    def from_hex(cls, text: str, width: int):
        return cls(int(text, 16), width)

    def hex(self) -> str:
        return format(self.bits, "x")

    def indices(self) -> list[int]:
        return list(iter_bits(self.bits))

    def to_array(self, dtype=np.float64) -> np.ndarray:
        out = np.zeros(self.width, dtype=dtype)
        out[self.indices()] = 1
        return out

    def _check(self, other) -> None:
        if not isinstance(other, BitSet):
            raise TypeError(f"expected a BitSet, got {type(other).__name__}")
        if type(self) is not type(other) or self.width != other.width:
            raise DimensionError(
                f"cannot combine {type(self).__name__}[{self.width}] "
                f"with {type(other).__name__}[{other.width}]"
            )

    def __and__(self, other):
        self._check(other)
        return type(self)(self.bits & other.bits, self.width)

    def __or__(self, other):
        self._check(other)
        return type(self)(self.bits | other.bits, self.width)

    def __xor__(self, other):
        self._check(other)
        return type(self)(self.bits ^ other.bits, self.width)

    def __sub__(self, other):
        self._check(other)
        return type(self)(self.bits & ~other.bits, self.width)

    def __invert__(self):
        return type(self)(~self.bits & ((1 << self.width) - 1), self.width)

    def __le__(self, other):
        self._check(other)
        return self.bits & ~other.bits == 0

    def __lt__(self, other):
        return self <= other and self.bits != other.bits

    def __ge__(self, other):
        return other <= self

    def __gt__(self, other):
        return other < self

    def __eq__(self, other):
        if not isinstance(other, BitSet):
            return NotImplemented
        return type(self) is type(other) and self.width == other.width and self.bits == other.bits

    def __hash__(self):
        return hash((type(self).__name__, self.bits, self.width))

    def __len__(self):
        return popcount(self.bits)

    def __contains__(self, i):
        return 0 <= i < self.width and bool(self.bits >> i & 1)

    def __iter__(self):
        return iter_bits(self.bits)

    def __repr__(self):
        return f"{type(self).__name__}({self.indices()}, width={self.width})"


class AttrSet(BitSet):
    __slots__ = ()


class ObjSet(BitSet):
    __slots__ = ()


class FormalContext:
    """A formal context (G, M, I) with incidence stored as packed bit rows.

    ``rows[g]`` has bit ``m`` set iff object ``g`` has attribute ``m``. The
    column-major mirror ``cols`` is built on first use. Instances are treated
    as immutable.

    The constructor does not enforce the no-empty-row/column assumption so
    that derived contexts (subcontexts, random test contexts) can be built
    freely; file loaders enforce it via :func:`apply_empty_policy`.
    """

    def __init__(self, objects: Sequence[str], attributes: Sequence[str], rows: Sequence[int],
                 attribute_year: Sequence[int] | None = None, name: str = ""):
        self.objects = tuple(str(o) for o in objects)
        self.attributes = tuple(str(a) for a in attributes)
        self.rows = tuple(int(r) for r in rows)
        self.name = name
        if len(self.rows) != len(self.objects):
            raise ContextError(f"{len(self.rows)} incidence rows for {len(self.objects)} objects")
        limit = 1 << len(self.attributes)
        for g, r in enumerate(self.rows):
            if r < 0 or r >= limit:
                raise ContextError(f"row {g} is wider than {len(self.attributes)} attributes")
        for kind, names in (("object", self.objects), ("attribute", self.attributes)):
            if len(set(names)) != len(names):
                seen = set()
                dup = next(n for n in names if n in seen or seen.add(n))
                raise ContextError(f"duplicate {kind} name {dup!r}")
        if attribute_year is not None:
            attribute_year = tuple(int(y) for y in attribute_year)
            if len(attribute_year) != len(self.attributes):
                raise ContextError("attribute_year length does not match attributes")
        self.attribute_year = attribute_year
        self._cols = None
        self._matrix = None

    # construction helpers

    @classmethod
    def from_matrix(cls, matrix, objects=None, attributes=None, **kw):
        m = np.asarray(matrix, dtype=bool)
        if m.ndim != 2:
            raise ContextError("incidence matrix must be two-dimensional")
        n_obj, n_attr = m.shape
        objects = list(objects) if objects is not None else [f"g{i}" for i in range(n_obj)]
        attributes = list(attributes) if attributes is not None else [f"m{j}" for j in range(n_attr)]
        weights = [1 << j for j in range(n_attr)]
        rows = [sum(w for w, b in zip(weights, row) if b) for row in m.tolist()]
        return cls(objects, attributes, rows, **kw)

    @classmethod
    def from_crosses(cls, objects, attributes, crosses: Sequence[str], **kw):
        """Build from strings like ``".xx"`` (case-insensitive ``x`` marks incidence)."""
        rows = []
        for g, line in enumerate(crosses):
            if len(line) != len(attributes):
                raise ContextError(f"row {g} has {len(line)} entries, expected {len(attributes)}")
            rows.append(sum(1 << j for j, ch in enumerate(line) if ch in "xX"))
        return cls(objects, attributes, rows, **kw)

    # basic properties

    @property
    def n_objects(self) -> int:
        return len(self.objects)

    @property
    def n_attributes(self) -> int:
        return len(self.attributes)

    @property
    def shape(self):
        return self.n_objects, self.n_attributes

    @property
    def full_objects(self) -> int:
        return (1 << self.n_objects) - 1

    @property
    def full_attributes(self) -> int:
        return (1 << self.n_attributes) - 1

    @property
    def cols(self) -> tuple[int, ...]:
        """Column bit masks over objects, built lazily."""
        if self._cols is None:
            cols = [0] * self.n_attributes
            for g, r in enumerate(self.rows):
                bit = 1 << g
                for m in iter_bits(r):
                    cols[m] |= bit
            self._cols = tuple(cols)
        return self._cols

    @property
    def matrix(self) -> np.ndarray:
        """Boolean incidence matrix of shape (|G|, |M|); read-only view."""
        if self._matrix is None:
            m = np.zeros(self.shape, dtype=bool)
            for g, r in enumerate(self.rows):
                m[g, list(iter_bits(r))] = True
            m.setflags(write=False)
            self._matrix = m
        return self._matrix

    def n_incidences(self) -> int:
        return sum(popcount(r) for r in self.rows)

    def density(self) -> float:
        cells = self.n_objects * self.n_attributes
        return self.n_incidences() / cells if cells else 0.0

    def incident(self, g: int, m: int) -> bool:
        return bool(self.rows[g] >> m & 1)

    def empty_objects(self) -> list[int]:
        return [g for g, r in enumerate(self.rows) if r == 0]

    def empty_attributes(self) -> list[int]:
        return [m for m, c in enumerate(self.cols) if c == 0]

    def attr_set(self, items) -> AttrSet:
        """AttrSet from attribute indices or names."""
        return AttrSet.from_indices(self._resolve(items, self.attributes), self.n_attributes)

    def obj_set(self, items) -> ObjSet:
        return ObjSet.from_indices(self._resolve(items, self.objects), self.n_objects)

    @staticmethod
    def _resolve(items, names):
        out = []
        for it in items:
            if isinstance(it, (int, np.integer)):
                out.append(int(it))
            else:
                try:
                    out.append(names.index(it))
                except ValueError:
                    raise KeyError(f"unknown name {it!r}") from None
        return out

    def content_hash(self) -> str:
        """SHA-256 over names and incidence; stable across processes."""
        h = hashlib.sha256()
        for part in (self.objects, self.attributes):
            h.update("\x1f".join(part).encode())
            h.update(b"\x1e")
        for r in self.rows:
            h.update(format(r, "x").encode())
            h.update(b",")
        if self.attribute_year is not None:
            h.update(b"years:" + ",".join(map(str, self.attribute_year)).encode())
        return h.hexdigest()

    # raw bit-level operators, used by the hot loops elsewhere

    def _extent_of(self, attrs: int) -> int:
        ext = self.full_objects
        cols = self.cols
        for m in iter_bits(attrs):
            ext &= cols[m]
            if not ext:
                break
        return ext

    def _intent_of(self, objs: int) -> int:
        intent = self.full_attributes
        rows = self.rows
        for g in iter_bits(objs):
            intent &= rows[g]
            if not intent:
                break
        return intent

    def _closure(self, attrs: int) -> int:
        return self._intent_of(self._extent_of(attrs))

    # subcontexts

    def subcontext(self, objects=None, attributes=None) -> "FormalContext":
        """Restrict to the given object / attribute indices (order preserved)."""
        g_idx = list(range(self.n_objects)) if objects is None else list(objects)
        m_idx = list(range(self.n_attributes)) if attributes is None else list(attributes)
        rows = []
        for g in g_idx:
            r = self.rows[g]
            rows.append(sum(1 << k for k, m in enumerate(m_idx) if r >> m & 1))
        years = None
        if self.attribute_year is not None:
            years = [self.attribute_year[m] for m in m_idx]
        return FormalContext([self.objects[g] for g in g_idx], [self.attributes[m] for m in m_idx],
                             rows, attribute_year=years, name=self.name)

    def __eq__(self, other):
        if not isinstance(other, FormalContext):
            return NotImplemented
        return (self.objects == other.objects and self.attributes == other.attributes
                and self.rows == other.rows and self.attribute_year == other.attribute_year)

    def __hash__(self):
        return hash((self.objects, self.attributes, self.rows))

    def __repr__(self):
        return f"FormalContext({self.n_objects}x{self.n_attributes}, density={self.density():.3f})"


def _check_width(s: BitSet, kind, width):
    if not isinstance(s, kind):
        raise DimensionError(f"expected {kind.__name__}, got {type(s).__name__}")
    if s.width != width:
        raise DimensionError(f"{kind.__name__} has width {s.width}, context needs {width}")


def derive_attrs(ctx: FormalContext, objs: ObjSet) -> AttrSet:
    """Attributes shared by every object in ``objs``; all of M for the empty set."""
    _check_width(objs, ObjSet, ctx.n_objects)
    return AttrSet(ctx._intent_of(objs.bits), ctx.n_attributes)


def derive_objs(ctx: FormalContext, attrs: AttrSet) -> ObjSet:
    """Objects having every attribute in ``attrs``; all of G for the empty set."""
    _check_width(attrs, AttrSet, ctx.n_attributes)
    return ObjSet(ctx._extent_of(attrs.bits), ctx.n_objects)


def closure_attrs(ctx: FormalContext, attrs: AttrSet) -> AttrSet:
    _check_width(attrs, AttrSet, ctx.n_attributes)
    return AttrSet(ctx._closure(attrs.bits), ctx.n_attributes)


def closure_objs(ctx: FormalContext, objs: ObjSet) -> ObjSet:
    _check_width(objs, ObjSet, ctx.n_objects)
    return ObjSet(ctx._extent_of(ctx._intent_of(objs.bits)), ctx.n_objects)


def chd(ctx: FormalContext, a: AttrSet, b: AttrSet) -> int:
    """Closure Hamming distance: Hamming distance of the closures of ``a`` and ``b``.

    Not a metric on attribute sets, since distinct sets with equal closure are
    at distance zero.
    """
    _check_width(a, AttrSet, ctx.n_attributes)
    _check_width(b, AttrSet, ctx.n_attributes)
    return popcount(ctx._closure(a.bits) ^ ctx._closure(b.bits))


def dualize(ctx: FormalContext) -> FormalContext:
    """Transposed context: objects become attributes and vice versa."""
    return FormalContext(ctx.attributes, ctx.objects, ctx.cols, name=ctx.name)


# Empty row/column policy

def apply_empty_policy(ctx: FormalContext, drop_empty: bool = False) -> FormalContext:
    """Reject (default) or prune objects without attributes and attributes without objects.

    Pruning repeats until stable, since removing attributes can empty a row.
    """
    while True:
        bad_g = ctx.empty_objects()
        bad_m = ctx.empty_attributes()
        if not bad_g and not bad_m:
            return ctx
        if not drop_empty:
            parts = []
            if bad_g:
                parts.append(f"objects without attributes: {[ctx.objects[g] for g in bad_g[:5]]}")
            if bad_m:
                parts.append(f"attributes without objects: {[ctx.attributes[m] for m in bad_m[:5]]}")
            raise ContextError("; ".join(parts) + " (use drop_empty / --drop-empty to prune)")
        log.warning("dropping %d empty objects and %d empty attributes", len(bad_g), len(bad_m))
        keep_g = [g for g in range(ctx.n_objects) if g not in set(bad_g)]
        keep_m = [m for m in range(ctx.n_attributes) if m not in set(bad_m)]
        ctx = ctx.subcontext(keep_g, keep_m)


# Nominal scaling

class NominalTable:
    """Rectangular table of categorical values with column names."""

    def __init__(self, columns: Sequence[str], rows: Sequence[Sequence[str]], row_names=None):
        self.columns = [str(c) for c in columns]
        self.rows = [[str(v) for v in r] for r in rows]
        if not self.columns:
            raise ContextError("nominal table has no columns")
        for i, r in enumerate(self.rows):
            if len(r) != len(self.columns):
                raise ContextError(f"row {i} has {len(r)} values, expected {len(self.columns)}")
        self.row_names = list(row_names) if row_names is not None else [str(i) for i in range(len(self.rows))]

    @classmethod
    def read_csv(cls, path, header=True, columns=None, name_column=None):
        """Read a comma-separated table. Without a header row, ``columns`` names the columns."""
        with open(path, newline="") as fh:
            data = [r for r in csv.reader(fh) if r]
        if not data:
            raise ContextError(f"{path}: empty table")
        if header:
            columns, data = data[0], data[1:]
        elif columns is None:
            columns = [f"c{i}" for i in range(len(data[0]))]
        row_names = None
        if name_column is not None:
            k = columns.index(name_column)
            row_names = [r[k] for r in data]
            columns = columns[:k] + columns[k + 1:]
            data = [r[:k] + r[k + 1:] for r in data]
        return cls(columns, data, row_names)


def scale_nominal(table: NominalTable, missing_as_value: bool = False, columns=None) -> FormalContext:
    """One binary attribute ``column=value`` per observed (column, value) pair.

    The missing token ``?`` yields no incidence unless ``missing_as_value`` is
    set, in which case ``column=?`` becomes an ordinary attribute. Attributes
    are ordered by column, then by first appearance of the value.
    """
    if not table.rows:
        raise ContextError("cannot scale an empty table")
    col_idx = list(range(len(table.columns))) if columns is None else [table.columns.index(c) for c in columns]
    attrs: list[str] = []
    index: dict[tuple[int, str], int] = {}
    for c in col_idx:
        for r in table.rows:
            v = r[c]
            if v == MISSING and not missing_as_value:
                continue
            if (c, v) not in index:
                index[(c, v)] = -1
    # value order: sorted per column for reproducible attribute layout
    for c in col_idx:
        for (cc, v) in sorted(k for k in index if k[0] == c):
            index[(cc, v)] = len(attrs)
            attrs.append(f"{table.columns[c]}={v}")
    rows = []
    for r in table.rows:
        bits = 0
        for c in col_idx:
            j = index.get((c, r[c]), -1)
            if j >= 0:
                bits |= 1 << j
        rows.append(bits)
    return FormalContext(table.row_names, attrs, rows)


# Burmeister .cxt

def save_burmeister(ctx: FormalContext, path) -> None:
    lines = ["B", ctx.name, str(ctx.n_objects), str(ctx.n_attributes), ""]
    lines += list(ctx.objects)
    lines += list(ctx.attributes)
    for r in ctx.rows:
        lines.append("".join("X" if r >> m & 1 else "." for m in range(ctx.n_attributes)))
    Path(path).write_text("\n".join(lines) + "\n")


def load_burmeister(path, drop_empty: bool | None = False, years=None) -> FormalContext:
    """Parse a Burmeister context file.

    ``drop_empty=None`` skips the empty row/column check entirely.
    ``years`` is an optional path to an attribute-year TSV sidecar.
    """
    path = Path(path)
    lines = path.read_text().splitlines()
    pos = 0

    def take(what):
        nonlocal pos
        if pos >= len(lines):
            raise ParseError(f"unexpected end of file, expected {what}", pos + 1, path)
        pos += 1
        return lines[pos - 1].rstrip("\r")

    if take("header 'B'").strip() != "B":
        raise ParseError("first line must be 'B'", 1, path)
    # optional name line: present iff the line after it is also an integer
    name = ""
    first = take("object count")
    if not first.strip().isdigit():
        name = first
        first = take("object count")
    elif pos < len(lines) and lines[pos].strip().isdigit() and pos + 1 < len(lines) \
            and lines[pos + 1].strip().isdigit():
        # the name line itself was numeric
        name, first = first, take("object count")
    try:
        n_obj = int(first)
    except ValueError:
        raise ParseError(f"object count must be an integer, got {first!r}", pos, path) from None
    text = take("attribute count")
    try:
        n_attr = int(text)
    except ValueError:
        raise ParseError(f"attribute count must be an integer, got {text!r}", pos, path) from None
    # blank separator lines
    while pos < len(lines) and not lines[pos].strip():
        pos += 1
    objects = [take("object name") for _ in range(n_obj)]
    attributes = [take("attribute name") for _ in range(n_attr)]
    rows = []
    for _ in range(n_obj):
        line = take("incidence row").strip()
        lineno = pos
        if len(line) != n_attr:
            raise ParseError(f"row has {len(line)} entries, expected {n_attr}", lineno, path)
        bits = 0
        for j, ch in enumerate(line):
            if ch in "Xx":
                bits |= 1 << j
            elif ch != ".":
                raise ParseError(f"invalid character {ch!r} in incidence row", lineno, path)
        rows.append(bits)
    try:
        ctx = FormalContext(objects, attributes, rows, name=name)
    except ContextError as exc:
        raise ParseError(str(exc), None, path) from None
    if years is not None:
        ctx = with_years(ctx, read_year_sidecar(years))
    if drop_empty is not None:
        ctx = apply_empty_policy(ctx, drop_empty)
    return ctx


def read_year_sidecar(path) -> dict[str, int]:
    """Read ``attribute_name<TAB>year`` lines."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"attribute-year sidecar not found: {path}")
    out = {}
    for i, line in enumerate(path.read_text().splitlines(), 1):
        if not line.strip():
            continue
        parts = line.rstrip("\r").split("\t")
        if len(parts) != 2:
            raise ParseError("expected 'attribute<TAB>year'", i, path)
        try:
            out[parts[0]] = int(parts[1])
        except ValueError:
            raise ParseError(f"year must be an integer, got {parts[1]!r}", i, path) from None
    return out


def write_year_sidecar(ctx: FormalContext, path) -> None:
    if ctx.attribute_year is None:
        raise ContextError("context has no attribute years")
    Path(path).write_text("".join(f"{a}\t{y}\n" for a, y in zip(ctx.attributes, ctx.attribute_year)))


def with_years(ctx: FormalContext, years: dict[str, int]) -> FormalContext:
    missing = [a for a in ctx.attributes if a not in years]
    if missing:
        raise ContextError(f"no year for attributes {missing[:5]}")
    return FormalContext(ctx.objects, ctx.attributes, ctx.rows,
                         attribute_year=[years[a] for a in ctx.attributes], name=ctx.name)


def load_context(path, drop_empty=False, years=None, missing_as_value=False) -> FormalContext:
    """Load a ``.cxt`` file, or nominally scale a ``.csv`` table."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        ctx = scale_nominal(NominalTable.read_csv(path), missing_as_value=missing_as_value)
        if years is not None:
            ctx = with_years(ctx, read_year_sidecar(years))
        return apply_empty_policy(ctx, drop_empty)
    return load_burmeister(path, drop_empty=drop_empty, years=years)
