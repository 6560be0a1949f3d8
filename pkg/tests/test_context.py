import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracle
from conftest import ctx_from_matrix
from fca2vec.context import (AttrSet, ContextError, DimensionError, FormalContext, NominalTable, ObjSet,
                             ParseError, apply_empty_policy, chd, closure_attrs, closure_objs, derive_attrs,
                             derive_objs, dualize, load_burmeister, load_context, read_year_sidecar,
                             save_burmeister, scale_nominal, write_year_sidecar)
from fca2vec.lattice import enumerate_concepts


def attrs(ctx, *names):
    return ctx.attr_set(list(names))


def objs(ctx, *names):
    return ctx.obj_set(list(names))


def names(ctx, s):
    pool = ctx.attributes if isinstance(s, AttrSet) else ctx.objects
    return {pool[i] for i in s.indices()}


class TestDerivation:
    def test_living_beings_concept(self, living):
        assert names(living, derive_attrs(living, objs(living, "a", "f", "g"))) == {"4", "5", "6"}
        assert names(living, derive_objs(living, attrs(living, "4", "5", "6"))) == {"a", "f", "g"}

    def test_empty_sets(self, cex):
        assert derive_attrs(cex, ObjSet(0, 3)) == AttrSet.full(3)
        assert derive_objs(cex, AttrSet(0, 3)) == ObjSet.full(3)

    def test_cex_derivations(self, cex):
        assert names(cex, derive_attrs(cex, objs(cex, "a", "c"))) == {"2"}
        assert names(cex, derive_objs(cex, attrs(cex, "1"))) == {"b"}

    @pytest.mark.parametrize("given_,expected", [
        (("1", "2"), {"1", "2", "3"}),
        (("3",), {"3"}),
        (("1",), {"1", "3"}),
    ])
    def test_cex_closures(self, cex, given_, expected):
        assert names(cex, closure_attrs(cex, attrs(cex, *given_))) == expected

    def test_width_mismatch(self, cex):
        with pytest.raises(DimensionError):
            derive_attrs(cex, ObjSet(1, 4))
        with pytest.raises(DimensionError):
            closure_attrs(cex, AttrSet(1, 2))
        with pytest.raises(DimensionError):
            chd(cex, AttrSet(1, 3), AttrSet(1, 4))

    def test_kind_mismatch(self, cex):
        with pytest.raises(DimensionError, match="expected ObjSet"):
            derive_attrs(cex, AttrSet(1, 3))


class TestChd:
    def test_identity(self, living):
        b = attrs(living, "2", "7")
        assert chd(living, b, b) == 0

    def test_cex_values(self, cex):
        assert chd(cex, attrs(cex, "1"), attrs(cex, "2")) == 3
        assert chd(cex, attrs(cex, "1"), attrs(cex, "1", "3")) == 0


class TestDualize:
    def test_involution(self, living):
        assert dualize(dualize(living)) == living

    def test_shape(self, cex):
        d = dualize(cex)
        assert d.shape == (3, 3)
        assert np.array_equal(d.matrix, cex.matrix.T)

    def test_concept_counts(self, cex, living):
        assert len(enumerate_concepts(dualize(cex))) == len(enumerate_concepts(cex)) == 6
        assert len(enumerate_concepts(dualize(living))) == len(enumerate_concepts(living))


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 7), st.integers(1, 7), st.integers(0, 2**32 - 1))
def test_closure_matches_oracle(n_obj, n_attr, seed):
    rng = np.random.default_rng(seed)
    inc = rng.random((n_obj, n_attr)) < 0.5
    ctx = ctx_from_matrix(inc)
    for b in oracle.all_subsets(n_attr):
        got = closure_attrs(ctx, AttrSet.from_indices(b, n_attr))
        assert set(got.indices()) == oracle.closure(inc, b)
        assert set(derive_objs(ctx, AttrSet.from_indices(b, n_attr)).indices()) == oracle.extent(inc, b)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_closure_operator_laws(n_obj, n_attr, seed):
    rng = np.random.default_rng(seed)
    ctx = ctx_from_matrix(rng.random((n_obj, n_attr)) < 0.5)
    sets = [AttrSet(int(b), n_attr) for b in rng.integers(0, 2 ** n_attr, size=8)]
    for a in sets:
        ca = closure_attrs(ctx, a)
        assert a <= ca
        assert closure_attrs(ctx, ca) == ca
        for b in sets:
            if a <= b:
                assert ca <= closure_attrs(ctx, b)
    for g in range(n_obj):
        o = ObjSet(1 << g, n_obj)
        assert o <= closure_objs(ctx, o)


class TestBitSet:
    def test_roundtrips(self):
        s = AttrSet.from_indices([0, 3, 70], 80)
        assert AttrSet.from_hex(s.hex(), 80) == s
        assert AttrSet.from_array(s.to_array()) == s
        assert s.indices() == [0, 3, 70]
        assert len(s) == 3 and 3 in s and 4 not in s

    def test_set_algebra(self):
        a = AttrSet.from_indices([0, 1], 4)
        b = AttrSet.from_indices([1, 2], 4)
        assert (a & b).indices() == [1]
        assert (a | b).indices() == [0, 1, 2]
        assert (a - b).indices() == [0]
        assert (~a).indices() == [2, 3]
        assert (a & b) < a

    def test_out_of_range(self):
        with pytest.raises(DimensionError):
            AttrSet.from_indices([5], 3)


class TestFormalContext:
    def test_cex_stats(self, cex):
        assert cex.shape == (3, 3)
        assert cex.n_incidences() == 5
        assert cex.density() == pytest.approx(5 / 9)

    def test_duplicate_names_rejected(self):
        with pytest.raises(ContextError):
            FormalContext(["a", "a"], ["x"], [1, 1])

    def test_content_hash_stable(self, cex, data_dir):
        again = load_burmeister(data_dir / "counterexample.cxt")
        assert again.content_hash() == cex.content_hash()
        assert dualize(cex).content_hash() != cex.content_hash()

    def test_subcontext(self, living):
        sub = living.subcontext([0, 5, 6], [3, 4, 5])
        assert sub.objects == ("a", "f", "g")
        assert sub.matrix.all()


class TestEmptyPolicy:
    def test_reject(self):
        ctx = FormalContext(["a", "b"], ["x", "y"], [0b01, 0b00])
        with pytest.raises(ContextError):
            apply_empty_policy(ctx)

    def test_drop_iterates(self):
        ctx = FormalContext(["a", "b"], ["x", "y"], [0b01, 0b00])
        out = apply_empty_policy(ctx, drop_empty=True)
        assert out.objects == ("a",) and out.attributes == ("x",)


class TestNominalScaling:
    def test_two_values(self):
        t = NominalTable(["c"], [["n"], ["y"], ["n"]])
        ctx = scale_nominal(t)
        assert ctx.attributes == ("c=n", "c=y")
        assert ctx.n_objects == 3

    def test_missing_values(self):
        t = NominalTable(["c", "d"], [["?", "u"], ["x", "v"]])
        assert scale_nominal(t).n_attributes == 3
        assert scale_nominal(t, missing_as_value=True).n_attributes == 4

    def test_empty_table(self):
        with pytest.raises(ContextError):
            scale_nominal(NominalTable(["c"], []))

    def test_csv_loading(self, data_dir):
        ctx = load_context(data_dir / "mushroom_like.csv")
        assert ctx.shape == (500, 28)
        assert "class=e" in ctx.attributes and "class=p" in ctx.attributes


class TestBurmeister:
    def test_roundtrip(self, cex, tmp_path):
        p = tmp_path / "f.cxt"
        save_burmeister(cex, p)
        assert load_burmeister(p) == cex

    def test_row_characters(self, tmp_path):
        p = tmp_path / "r.cxt"
        p.write_text("B\n\n1\n3\n\ng\nx\ny\nz\nX.X\n")
        ctx = load_burmeister(p, drop_empty=None)
        assert ctx.rows == (0b101,)

    def test_short_row(self, tmp_path):
        p = tmp_path / "bad.cxt"
        p.write_text("B\n\n2\n3\n\na\nb\nx\ny\nz\nX.X\nX.\n")
        with pytest.raises(ParseError) as err:
            load_burmeister(p)
        assert err.value.line == 12

    def test_bad_character(self, tmp_path):
        p = tmp_path / "bad.cxt"
        p.write_text("B\n\n1\n2\n\na\nx\ny\nX?\n")
        with pytest.raises(ParseError):
            load_burmeister(p)

    def test_bad_header(self, tmp_path):
        p = tmp_path / "bad.cxt"
        p.write_text("Q\n\n1\n1\n\na\nx\nX\n")
        with pytest.raises(ParseError):
            load_burmeister(p)

    def test_year_sidecar(self, temporal, tmp_path):
        p = tmp_path / "years.tsv"
        write_year_sidecar(temporal, p)
        years = read_year_sidecar(p)
        assert [years[a] for a in temporal.attributes] == list(temporal.attribute_year)

    def test_missing_sidecar(self, data_dir, tmp_path):
        with pytest.raises(FileNotFoundError, match="nope.tsv"):
            load_burmeister(data_dir / "temporal.cxt", years=tmp_path / "nope.tsv")
