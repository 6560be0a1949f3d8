"""Acceptance criteria 1-12, each checked at its stated tolerance.

Every test records one PASS/FAIL line (shown in the terminal summary) before
asserting. Criteria 2, 8, 9, 10 and 11 run on the bundled stand-in data when
the full public datasets are not available.
"""

import os
import time
from pathlib import Path

import numpy as np
import pytest

import oracle
from conftest import ctx_from_matrix, record
from fca2vec.cli import main
from fca2vec.closure2vec import closure2vec_config, new_model, siamese_gradient_check, train_closure2vec
from fca2vec.context import NominalTable, load_burmeister, scale_nominal
from fca2vec.eval import (TemporalSplit, clustering_experiment, covering_distance_experiment,
                          implication_distance_experiment, link_prediction_experiment)
from fca2vec.fc2vec import cbow_examples, new_net, sg_examples, target_context_pairs
from fca2vec.lattice import ConceptLattice, canonical_base, covering_relation, enumerate_concepts, lectic_key
from fca2vec.nn import gradient_check, one_hot
from fca2vec.rudolph import best_affine_fit_residual, build_closure_net, verify_closure_net

SEEDS = range(5)


def as_sets(concepts):
    return {(frozenset(c.extent.indices()), frozenset(c.intent.indices())) for c in concepts}


def cover_sets(concepts, covers):
    s = [(frozenset(c.extent.indices()), frozenset(c.intent.indices())) for c in concepts]
    return {(s[a], s[b]) for a, b in covers}


def test_01_exact_lattice_counts(cex, living):
    start = time.perf_counter()
    cs = enumerate_concepts(cex)
    cov = covering_relation(cs)
    base = canonical_base(cex)
    lb = enumerate_concepts(living)
    elapsed = time.perf_counter() - start
    ok = (len(cs) == 6 and len(cov) == 7 and len(base) == 1
          and base[0].premise.indices() == [0] and base[0].conclusion.indices() == [0, 2]
          and as_sets(cs) == oracle.concepts(cex.matrix)
          and cover_sets(cs, cov) == oracle.covers(oracle.concepts(cex.matrix))
          and oracle.pseudo_intents(cex.matrix) == [frozenset({0})]
          and len(lb) == 19 and as_sets(lb) == oracle.concepts(living.matrix)
          and elapsed < 1.0)
    assert record(1, ok, f"counterexample: {len(cs)} concepts, {len(cov)} covers, base {len(base)}; "
                         f"Living beings: {len(lb)} concepts; {elapsed:.3f} s")


def _base_sets(ctx):
    return [frozenset(i.premise.indices()) for i in canonical_base(ctx)]


def test_02_random_12x12_oracle_equivalence():
    rng = np.random.default_rng(2)
    bad = 0
    for _ in range(50):
        inc = oracle.random_context(rng, 12, 12, density=rng.uniform(0.2, 0.5))
        ctx = ctx_from_matrix(inc)
        want_base = sorted(oracle.pseudo_intents(inc), key=lambda p: lectic_key(sum(1 << m for m in p), 12))
        if as_sets(enumerate_concepts(ctx)) != oracle.concepts(inc) or _base_sets(ctx) != want_base:
            bad += 1
    assert record(2, bad == 0, f"fallback: {50 - bad}/50 random 12x12 contexts match the oracle "
                               "(concepts and canonical base)")


@pytest.mark.skipif(not os.environ.get("FCA2VEC_MUSHROOM"), reason="set FCA2VEC_MUSHROOM to agaricus-lepiota.data")
@pytest.mark.slow
def test_02_mushroom_exact():
    cols = ["class"] + [f"f{i}" for i in range(22)]
    table = NominalTable.read_csv(os.environ["FCA2VEC_MUSHROOM"], header=False, columns=cols)
    ctx = scale_nominal(table, missing_as_value=True)
    t0 = time.perf_counter()
    n_concepts = len(enumerate_concepts(ctx))
    t1 = time.perf_counter()
    n_base = len(canonical_base(ctx))
    t2 = time.perf_counter()
    ok = ctx.shape == (8124, 119) and n_concepts == 238710 and n_base == 2323 and t1 - t0 < 900 and t2 - t1 < 7200
    assert record(2, ok, f"Mushroom {ctx.shape}, {n_concepts} concepts ({t1 - t0:.0f} s), "
                         f"base {n_base} ({t2 - t1:.0f} s)")


def test_03_rudolph_net_random_contexts():
    rng = np.random.default_rng(3)
    failures = 0
    for _ in range(100):
        n_obj, n_attr = int(rng.integers(1, 11)), int(rng.integers(1, 11))
        ctx = ctx_from_matrix(rng.random((n_obj, n_attr)) < rng.uniform(0.1, 0.9))
        res = verify_closure_net(ctx, build_closure_net(ctx))
        failures += not res or res.checked != 1 << n_attr
    assert record(3, failures == 0, f"closure net exact on {100 - failures}/100 random contexts (|M| <= 10)")


def test_04_affine_residual(cex):
    start = time.perf_counter()
    r = best_affine_fit_residual(cex)
    elapsed = time.perf_counter() - start
    assert record(4, r > 1e-6 and elapsed < 1.0, f"best affine residual on counterexample = {r:.4f} ({elapsed:.3f} s)")


def test_05_cbow_no_duplicates():
    rng = np.random.default_rng(5)
    dup_contexts = 0
    total = 0
    for i in range(50):
        n_obj, n_attr = int(rng.integers(2, 11)), int(rng.integers(1, 11))
        inc = oracle.random_context(rng, n_obj, n_attr, density=rng.uniform(0.2, 0.7))
        ctx = ctx_from_matrix(inc)
        pairs = target_context_pairs(ctx, enumerate_concepts(ctx))
        keys = cbow_examples(pairs, seed=i).keys()
        total += len(keys)
        dup_contexts += len(keys) != len(set(keys)) or len(keys) != len(pairs)
    assert record(5, dup_contexts == 0, f"{total} CBoW examples over 50 contexts, "
                                        f"{dup_contexts} contexts with duplicates")


def test_06_sg_example(living):
    f, a, g = (living.objects.index(x) for x in "fag")
    pairs = target_context_pairs(living, enumerate_concepts(living))
    has_pair = any(p.target == f and p.context == living.obj_set(["a", "g"]) for p in pairs)
    source = [p for p in pairs if p.target == f and p.context == living.obj_set(["a", "g"])]
    from_pair = sorted(sg_examples(source, seed=0).keys())
    counts = []
    for seed in range(5):
        keys = sg_examples(pairs, seed).keys()
        counts.append(keys.count(((f,), g)))
    ok = has_pair and from_pair == sorted([((f,), a), ((f,), g)]) and min(counts) >= 2
    assert record(6, ok, f"(f,{{a,g}}) -> (e6,e1),(e6,e7); (e6,e7) per epoch: {counts}")


def test_07_gradient_checks(living):
    errors = {}
    model = new_model(living, d=3, seed=0)
    for layer in model.trunk.layers:
        layer.bias[:] = 0.05
    x1 = living.attr_set(["1", "4"]).to_array()
    x2 = living.attr_set(["2", "7", "9"]).to_array()
    errors["mse + relu trunk"] = siamese_gradient_check(model, x1, x2, 0.2)
    net = new_net(8, 3, seed=0)
    errors["cross-entropy + softmax head"] = gradient_check(net, (one_hot(2, 8), one_hot(6, 8)), "cross_entropy")
    cbow_in = (one_hot(1, 8) + one_hot(7, 8)) / 2
    errors["cross-entropy + softmax head, CBoW input"] = gradient_check(net, (cbow_in, one_hot(6, 8)),
                                                                       "cross_entropy")
    worst = max(errors.values())
    assert record(7, worst < 1e-4, "max relative error " + ", ".join(f"{k}: {v:.1e}" for k, v in errors.items()))


# 8 and 9 share the trained models

C2V_BUDGET = dict(lr0=0.05, epochs=10)


@pytest.fixture(scope="module")
def mushroom_models(mushroom_like):
    return [train_closure2vec(mushroom_like, cfg=closure2vec_config(seed=s, **C2V_BUDGET)).model for s in SEEDS]


def test_08_covering_signal(mushroom_like, mushroom_models):
    lattice = ConceptLattice.of(mushroom_like)
    cr, ncr = [], []
    for seed, model in zip(SEEDS, mushroom_models):
        stats = covering_distance_experiment(model, lattice, seed=seed)
        cr.append(stats["CR"].mean)
        ncr.append(stats["NonCR"].mean)
    wins = sum(c < n for c, n in zip(cr, ncr))
    ratio = np.mean(ncr) / np.mean(cr)
    detail = (f"{len(lattice.concepts)} concepts; CR<NonCR in {wins}/5 seeds; NonCR/CR = {ratio:.2f}; "
              "per seed " + ", ".join(f"{c:.3f}/{n:.3f}" for c, n in zip(cr, ncr)))
    assert record(8, wins >= 4 and ratio >= 1.5, detail)


def test_09_implication_signal(mushroom_like, mushroom_models):
    base = canonical_base(mushroom_like)
    s_wins = i_wins = 0
    rows = []
    for seed, model in zip(SEEDS, mushroom_models):
        st = implication_distance_experiment(model, base, seed=seed)
        s_wins += st["S-Imp"].mean > st["Non-S-Imp"].mean
        i_wins += st["Imp"].mean < st["Non-Imp"].mean
        rows.append(f"{st['S-Imp'].mean:.2f}/{st['Non-S-Imp'].mean:.2f} {st['Imp'].mean:.2f}/{st['Non-Imp'].mean:.2f}")
    detail = f"{len(base)} implications; S-Imp>Non-S-Imp {s_wins}/5, Imp<Non-Imp {i_wins}/5; " + "; ".join(rows)
    assert record(9, s_wins >= 4 and i_wins >= 4, detail)


@pytest.mark.slow
def test_10_clustering_superiority(data_dir):
    ctx = load_burmeister(data_dir / "blocks.cxt")
    base = canonical_base(ctx)
    rep = clustering_experiment(ctx, d=3, k_set=(2, 5, 10), rounds=5, seed=0, epochs=5, archs=("SG",), base=base)
    fails = []
    for entry in rep["rounds"]:
        for k, res in entry["embedding"]["SG"].items():
            if not res["ratio"] > res["random_mean"]:
                fails.append((entry["round"], k))
    summary = ", ".join(f"k={k}: {rep['summary'][f'SG d=3 k={k}']['ratio']['mean']:.3f} vs "
                        f"{rep['summary'][f'SG d=3 k={k}']['random_mean']['mean']:.3f}" for k in (2, 5, 10))
    assert record(10, not fails, f"100-attribute surrogate, base {len(base)}; SG vs random: {summary}; "
                                 f"{15 - len(fails)}/15 (seed, k) wins")


def test_11_link_prediction(temporal):
    split = TemporalSplit(2015, 2016, 2019)
    o2v = link_prediction_experiment(temporal, split, "CBoW", d=3, rounds=10, seed=0)
    rnd = link_prediction_experiment(temporal, split, "CBoW", d=3, rounds=10, seed=0, embedding="random")
    ok = o2v.f1[0] > 0.55 and 0.4 <= rnd.f1[0] <= 0.6
    assert record(11, ok, f"O2V-CBoW d=3 F1 {o2v.f1[0]:.3f} +- {o2v.f1[1]:.3f}; random F1 {rnd.f1[0]:.3f}; "
                          f"{o2v.info['train_examples']} train / {o2v.info['test_examples']} test examples")


def test_12_determinism(data_dir, tmp_path):
    living = data_dir / "living_beings.cxt"
    temporal = data_dir / "temporal.cxt"
    years = data_dir / "temporal_years.tsv"
    runs = {
        "train-closure2vec": (["train-closure2vec", living, "--epochs", 2],
                              ["model.ckpt", "embeddings.tsv", "loss.csv"]),
        "train-o2v": (["train-o2v", living, "--epochs", 20], ["model.ckpt", "embeddings.tsv", "loss.csv"]),
        "train-a2v": (["train-a2v", living, "--epochs", 20], ["model.ckpt", "embeddings.tsv", "loss.csv"]),
        "eval-linkpred": (["eval-linkpred", temporal, "--years", years, "--rounds", 2, "--epochs", 20],
                          ["linkpred.json", "linkpred.csv"]),
        "eval-cluster": (["eval-cluster", living, "--k", 2, 3, "--rounds", 2], ["cluster.json", "cluster.csv"]),
    }
    model_dir = tmp_path / "model"
    assert main([str(a) for a in ["train-closure2vec", living, "--epochs", 2, "--out", model_dir]]) == 0
    model = model_dir / "model.ckpt"
    runs["eval-covers"] = (["eval-covers", living, "--model", model, "--sample-cap", 20],
                           ["covers.json", "covers.csv"])
    runs["eval-implications"] = (["eval-implications", living, "--model", model],
                                 ["implications.json", "implications.csv"])
    differ = []
    for name, (argv, files) in runs.items():
        outs = []
        for rep in ("a", "b"):
            out = tmp_path / name / rep
            assert main([str(a) for a in argv] + ["--out", str(out)]) == 0
            outs.append(out)
        differ += [f"{name}/{f}" for f in files if (outs[0] / f).read_bytes() != (outs[1] / f).read_bytes()]
    assert record(12, not differ, f"{len(runs)} stochastic subcommands run twice; "
                                  + (f"differing: {differ}" if differ else "all outputs byte-identical"))
