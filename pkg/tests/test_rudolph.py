import numpy as np
import pytest

import oracle
from conftest import ctx_from_matrix
from fca2vec.context import AttrSet, FormalContext
from fca2vec.rudolph import (best_affine_fit_residual, build_closure_net, encode, hidden_layer,
                             linear_derivation_diagnostic, verify_closure_net)


def enc(ctx, *names):
    return encode(ctx.attr_set(list(names)))


class TestClosureNet:
    def test_cex_example(self, cex):
        net = build_closure_net(cex)
        assert net.forward(enc(cex, "1")).tolist() == enc(cex, "1", "3").tolist()

    def test_empty_input(self, cex, living):
        for ctx in (cex, living):
            net = build_closure_net(ctx)
            want = encode(AttrSet(ctx._closure(0), ctx.n_attributes))
            assert net.forward(encode(AttrSet(0, ctx.n_attributes))).tolist() == want.tolist()

    def test_living_hidden_layer(self, living):
        h = hidden_layer(build_closure_net(living), enc(living, "4", "5", "6"))
        assert h.tolist() == encode(living.obj_set(["a", "f", "g"])).tolist()

    def test_weights(self, cex):
        w = build_closure_net(cex).layers[0].weight
        assert w.shape == (3, 3)
        assert set(np.unique(w)) <= {0, -1}
        assert np.array_equal(w == 0, cex.matrix)


class TestVerify:
    def test_cex_exhaustive(self, cex):
        res = verify_closure_net(cex, build_closure_net(cex))
        assert res and res.checked == 8

    def test_flipped_weight(self, living):
        net = build_closure_net(living)
        w = net.layers[0].weight
        g, m = np.argwhere(w == 0)[0]
        w[g, m] = -1
        res = verify_closure_net(living, net)
        assert not res
        b = res.counterexample
        got = net.forward(encode(b))
        assert got.tolist() != encode(AttrSet(living._closure(b.bits), living.n_attributes)).tolist()

    def test_random_8x8(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            inc = rng.random((8, 8)) < rng.uniform(0.2, 0.8)
            ctx = ctx_from_matrix(inc)
            assert verify_closure_net(ctx, build_closure_net(ctx))

    def test_sampled_mode(self, living):
        res = verify_closure_net(living, build_closure_net(living), samples=100, seed=3)
        assert res and res.checked == 100

    def test_large_needs_samples(self):
        ctx = FormalContext(["g"], [f"m{i}" for i in range(21)], [(1 << 21) - 1])
        with pytest.raises(ValueError):
            verify_closure_net(ctx, build_closure_net(ctx))


class TestAffineResidual:
    def test_cex_positive(self, cex):
        assert best_affine_fit_residual(cex) >= 0.2

    def test_identity_closure(self):
        # objects missing exactly one attribute make every set closed
        n = 4
        ctx = FormalContext([f"g{i}" for i in range(n)], [str(i) for i in range(n)],
                            [((1 << n) - 1) ^ (1 << i) for i in range(n)])
        assert all(ctx._closure(b) == b for b in range(1 << n))
        assert best_affine_fit_residual(ctx) < 1e-6

    def test_permutation_invariant(self, cex):
        perm = [2, 0, 1]
        inc = cex.matrix[:, perm]
        assert best_affine_fit_residual(ctx_from_matrix(inc)) == pytest.approx(best_affine_fit_residual(cex))

    def test_oracle_closure_table(self, cex):
        # the fitted target is the closure table, which the oracle reproduces
        for b in oracle.all_subsets(3):
            bits = sum(1 << m for m in b)
            assert set(AttrSet(cex._closure(bits), 3).indices()) == oracle.closure(cex.matrix, b)


def test_linear_diagnostic_runs(living):
    diag = linear_derivation_diagnostic(living, samples=300, epochs=5)
    assert np.isfinite(diag.train_mse) and np.isfinite(diag.heldout_mse)
    assert 0.0 <= diag.heldout_exact <= 1.0
    assert len(diag.loss_trace) == 5
