from collections import Counter

import numpy as np
import pytest

from conftest import ctx_from_matrix
from fca2vec.context import FormalContext, ObjSet, dualize
from fca2vec.fc2vec import (EmbeddingTable, TargetContextPair, TrainingExampleList, traverse_extents, cbow_examples,
                            new_net, object2vec_config, qualifying_extents, sg_examples, target_context_pairs,
                            train_attribute2vec, train_object2vec)
from fca2vec.lattice import enumerate_concepts
from fca2vec.nn import TrainingError, train


def obj(ctx, name):
    return ctx.objects.index(name)


@pytest.fixture(scope="module")
def living_pairs(living):
    return target_context_pairs(living, enumerate_concepts(living))


class TestPairs:
    def test_living_example(self, living, living_pairs):
        ext = living.obj_set(["a", "f", "g"])
        got = {(p.target, p.context) for p in living_pairs if (p.context.bits | 1 << p.target) == ext.bits}
        want = {(obj(living, "a"), living.obj_set(["f", "g"])),
                (obj(living, "f"), living.obj_set(["a", "g"])),
                (obj(living, "g"), living.obj_set(["a", "f"]))}
        assert got == want

    def test_singleton_extents_skipped(self):
        ctx = FormalContext(["a", "b", "c"], ["x", "y", "z"], [0b001, 0b010, 0b100])
        assert target_context_pairs(ctx, enumerate_concepts(ctx)) == []

    def test_cex_count(self, cex):
        cs = enumerate_concepts(cex)
        sizes = [len(c.extent) for c in cs if 1 < len(c.extent) < 3]
        assert len(target_context_pairs(cex, cs)) == sum(sizes)

    def test_top_extent_excluded(self, living):
        cs = enumerate_concepts(living)
        full = (1 << living.n_objects) - 1
        assert full not in qualifying_extents(living, cs)


class TestSG:
    def test_living_example(self, living, living_pairs):
        f, a, g = obj(living, "f"), obj(living, "a"), obj(living, "g")
        ex = sg_examples(living_pairs, seed=0)
        keys = Counter(ex.keys())
        assert keys[((f,), a)] >= 1
        assert keys[((f,), g)] >= 2

    def test_one_hot_vectors(self, living, living_pairs):
        ex = sg_examples(living_pairs, seed=0)
        f, a = obj(living, "f"), obj(living, "a")
        x, t = ex[ex.keys().index(((f,), a))]
        assert x.tolist() == np.eye(8)[5].tolist() and t.tolist() == np.eye(8)[0].tolist()

    def test_multiplicity_matches_triples(self, living, living_pairs):
        ex = sg_examples(living_pairs, seed=3)
        want = Counter(((p.target,), c) for p in living_pairs for c in p.context.indices())
        assert Counter(ex.keys()) == want

    def test_per_pair_count(self):
        pair = TargetContextPair(1, ObjSet(0b1101, 4))
        ex = sg_examples([pair], seed=0)
        assert len(ex) == 3
        assert sorted(ex.keys()) == [((1,), 0), ((1,), 2), ((1,), 3)]
        assert len(cbow_examples([pair], seed=0)) == 1


class TestCBoW:
    def test_living_example(self, living, living_pairs):
        f, a, g = obj(living, "f"), obj(living, "a"), obj(living, "g")
        ex = cbow_examples(living_pairs, seed=0)
        k = ex.keys().index((tuple(sorted((a, g))), f))
        x, t = ex[k]
        want = np.zeros(8)
        want[[a, g]] = 0.5
        assert np.allclose(x, want) and t.tolist() == np.eye(8)[f].tolist()

    def test_no_duplicates(self, living_pairs):
        keys = cbow_examples(living_pairs, seed=1).keys()
        assert len(keys) == len(set(keys)) == len(living_pairs)

    def test_inputs_distribution(self, living_pairs):
        xs, ts = cbow_examples(living_pairs, seed=1).dense()
        assert np.all(xs >= 0) and np.allclose(xs.sum(axis=1), 1.0)
        assert np.allclose(ts.sum(axis=1), 1.0)


class TestDeterminism:
    def test_same_seed(self, living_pairs):
        for make in (sg_examples, cbow_examples):
            assert make(living_pairs, 4).keys() == make(living_pairs, 4).keys()

    def test_seed_changes_order(self, living_pairs):
        a, b = sg_examples(living_pairs, 0).keys(), sg_examples(living_pairs, 1).keys()
        assert a != b and sorted(a) == sorted(b)

    def test_bad_arch(self):
        with pytest.raises(ValueError):
            traverse_extents([3], 2, "skipgram", 0)


class TestTraining:
    def test_shape(self, living):
        res = train_object2vec(living, "CBoW", d=2, cfg=object2vec_config(epochs=3))
        assert res.table.vectors.shape == (8, 2)
        assert res.table.names == list(living.objects)

    def test_matches_dense_engine(self, living):
        cfg = object2vec_config(epochs=4, seed=2)
        cs = enumerate_concepts(living)
        for arch in ("SG", "CBoW"):
            fast = train_object2vec(living, arch, d=3, cfg=cfg, concepts=cs)
            net = new_net(8, 3, cfg.seed)
            extents = qualifying_extents(living, cs)
            res = train(net, None, cfg, epoch_examples=lambda e: traverse_extents(extents, 8, arch, [cfg.seed, e + 1]).dense())
            assert np.allclose(fast.table.vectors, net.layers[0].weight.T, atol=1e-10)
            assert np.allclose(fast.loss_trace, res.loss_trace)

    def test_deterministic(self, living):
        runs = [train_object2vec(living, "SG", cfg=object2vec_config(epochs=5, seed=9)) for _ in range(2)]
        assert np.array_equal(runs[0].table.vectors, runs[1].table.vectors)

    def test_loss_decreases(self, living):
        first, last = [], []
        for seed in range(5):
            res = train_object2vec(living, "CBoW", cfg=object2vec_config(epochs=50, seed=seed))
            first.append(res.loss_trace[0])
            last.append(res.loss_trace[-1])
        assert np.mean(last) < np.mean(first)

    @staticmethod
    def twin_distances(living, arch):
        inc = np.vstack([living.matrix, living.matrix[obj(living, "f")]])
        ctx = ctx_from_matrix(inc)
        f, twin = 5, 8
        dup, rand = [], []
        for seed in range(5):
            v = train_object2vec(ctx, arch, cfg=object2vec_config(epochs=200, seed=seed)).table.vectors
            dup.append(np.linalg.norm(v[f] - v[twin]))
            rand.append(np.mean([np.linalg.norm(v[i] - v[j]) for i in range(9) for j in range(i)]))
        return np.mean(dup), np.mean(rand)

    def test_duplicate_rows_closer_sg(self, living):
        dup, rand = self.twin_distances(living, "SG")
        assert dup <= rand

    def test_duplicate_rows_cbow_pushed_apart(self, living):
        # a twin is always in the other's context but never its own target, so CBoW separates them
        dup, rand = self.twin_distances(living, "CBoW")
        assert dup > rand

    def test_attribute2vec_is_dual(self, living):
        cfg = object2vec_config(epochs=5, seed=3)
        a2v = train_attribute2vec(living, "SG", cfg=cfg)
        o2v = train_object2vec(dualize(living), "SG", cfg=cfg)
        assert a2v.table.vectors.shape == (9, 3)
        assert np.array_equal(a2v.table.vectors, o2v.table.vectors)
        assert a2v.table.names == list(living.attributes)

    def test_nothing_to_train(self):
        ctx = FormalContext(["a", "b"], ["x", "y"], [0b01, 0b10])
        with pytest.raises(TrainingError):
            train_object2vec(ctx)

    def test_config_checked(self, living):
        with pytest.raises(ValueError):
            train_object2vec(living, cfg=object2vec_config(batch_size=4))


class TestTable:
    def test_roundtrip(self, tmp_path):
        t = EmbeddingTable(["a", "b"], np.array([[0.1, -2.0], [1 / 3, 4.0]]), {"d": 2})
        t.write(tmp_path / "e.tsv")
        back = EmbeddingTable.read(tmp_path / "e.tsv")
        assert back.names == t.names and np.array_equal(back.vectors, t.vectors)
        assert back.metadata == {"d": 2}
        assert np.array_equal(back.vector("b"), t.vectors[1])

    def test_ragged(self, tmp_path):
        (tmp_path / "e.tsv").write_text("a\t1\t2\nb\t3\n")
        with pytest.raises(ValueError):
            EmbeddingTable.read(tmp_path / "e.tsv")
