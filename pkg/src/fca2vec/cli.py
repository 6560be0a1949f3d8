"""Command-line entry point: ``fca2vec <subcommand> ...``.

Every subcommand accepts ``--config FILE`` (a JSON object of option values;
explicit flags win) and ``--threads N`` (also read from ``FCA2VEC_THREADS``).
Outputs are accompanied by a JSON manifest recording the command, the
resolved options, the input context hash and the package version.
Exit status is 0 on success, 1 on errors and 2 when a degenerate-input
warning was raised.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .closure2vec import (closure2vec_config, embed_many, load_model, save_model, train_closure2vec)
from .context import FormalContext, NominalTable, load_context, save_burmeister, scale_nominal
from .eval import (DegenerateInputWarning, TemporalSplit, clustering_experiment, covering_distance_experiment,
                   implication_distance_experiment, intent_labeler, link_prediction_experiment, scatter_export)
from .eval.report import DISTANCE_HEADER, distance_rows, write_csv, write_json
from .fc2vec import EmbeddingTable, object2vec_config, train_attribute2vec, train_object2vec
from .lattice import (ConceptLattice, canonical_base, covering_relation, enumerate_concepts, read_base,
                      resolve_threads, write_base, write_concepts, write_covers)
from .nn import TrainingError, write_loss_trace
from .rudolph import best_affine_fit_residual, build_closure_net, linear_derivation_diagnostic, verify_closure_net

log = logging.getLogger("fca2vec")


class CliError(Exception):
    pass


# helpers

def _load(args) -> FormalContext:
    years = getattr(args, "years", None)
    if years is not None and not Path(years).exists():
        raise CliError(f"year sidecar not found: {years}")
    return load_context(args.context, drop_empty=args.drop_empty, years=years,
                        missing_as_value=args.missing_as_value)


def _options(args) -> dict:
    skip = {"func", "config"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _manifest(args, path: Path, ctx: FormalContext | None, outputs: list[str], extra: dict | None = None):
    data = {"command": args.command, "options": _options(args), "version": __version__,
            "outputs": sorted(outputs)}
    if ctx is not None:
        data["context_hash"] = ctx.content_hash()
        data["context_shape"] = list(ctx.shape)
    if extra:
        data.update(extra)
    write_json(data, path)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _check_d(d: int) -> None:
    if d < 1:
        raise CliError("d must be positive")
    if d not in (2, 3):
        log.warning("d=%d is outside the usual range {2, 3}", d)


def _positive(name: str, value) -> None:
    if value is not None and value <= 0:
        raise CliError(f"{name} must be positive")


# subcommands

def cmd_info(args) -> dict:
    ctx = _load(args)
    stats = {"objects": ctx.n_objects, "attributes": ctx.n_attributes, "incidences": ctx.n_incidences(),
             "density": ctx.density()}
    if args.full:
        concepts = enumerate_concepts(ctx)
        stats["concepts"] = len(concepts)
        stats["mean_attributes_per_concept"] = float(np.mean([len(c.intent) for c in concepts]))
        stats["mean_objects_per_concept"] = float(np.mean([len(c.extent) for c in concepts]))
        stats["canonical_base"] = len(canonical_base(ctx))
    width = max(len(k) for k in stats)
    for k, v in stats.items():
        print(f"{k:<{width}}  {v:.6g}" if isinstance(v, float) else f"{k:<{width}}  {v}")
    if args.json:
        write_json(stats, args.json)
    return stats


def cmd_concepts(args):
    ctx = _load(args)
    concepts = enumerate_concepts(ctx)
    write_concepts(concepts, args.out)
    _manifest(args, Path(str(args.out) + ".manifest.json"), ctx, [str(args.out)], {"count": len(concepts)})
    print(f"{len(concepts)} concepts -> {args.out}")


def cmd_covers(args):
    ctx = _load(args)
    concepts = enumerate_concepts(ctx)
    covers = covering_relation(concepts, threads=args.threads)
    write_covers(covers, args.out)
    _manifest(args, Path(str(args.out) + ".manifest.json"), ctx, [str(args.out)], {"count": len(covers)})
    print(f"{len(covers)} cover edges -> {args.out}")


def cmd_base(args):
    ctx = _load(args)
    base = canonical_base(ctx)
    write_base(base, ctx.attributes, args.out)
    _manifest(args, Path(str(args.out) + ".manifest.json"), ctx, [str(args.out)], {"count": len(base)})
    print(f"{len(base)} implications -> {args.out}")


def cmd_scale(args):
    table = NominalTable.read_csv(args.table, header=not args.no_header, name_column=args.name_column)
    ctx = scale_nominal(table, missing_as_value=args.missing_as_value)
    save_burmeister(ctx, args.out)
    _manifest(args, Path(str(args.out) + ".manifest.json"), ctx, [str(args.out)])
    print(f"{ctx.n_objects} objects x {ctx.n_attributes} attributes -> {args.out}")


def cmd_train_closure2vec(args):
    ctx = _load(args)
    _check_d(args.d)
    for name in ("epochs", "lr0", "batch", "t"):
        _positive(name, getattr(args, name))
    cfg = closure2vec_config(seed=args.seed, epochs=args.epochs, lr0=args.lr0, batch_size=args.batch)
    res = train_closure2vec(ctx, d=args.d, distance_kind=args.distance, cfg=cfg, t=args.t, init=args.init)
    out = _out_dir(args)
    save_model(res.model, out / "model.ckpt")
    write_loss_trace(res.loss_trace, out / "loss.csv")
    vecs = embed_many(res.model, [1 << m for m in range(ctx.n_attributes)], ctx.n_attributes)
    EmbeddingTable(list(ctx.attributes), vecs, {"method": "closure2vec", "d": args.d, "seed": args.seed,
                                                "distance": args.distance, "epochs": args.epochs, "lr0": args.lr0,
                                                "context_hash": ctx.content_hash(), "rows": "singletons"}
                   ).write(out / "embeddings.tsv")
    outputs = ["model.ckpt", "model.ckpt.json", "loss.csv", "embeddings.tsv", "embeddings.tsv.json"]
    _manifest(args, out / "manifest.json", ctx, outputs, {"config": cfg.as_dict()})
    print(f"final loss {res.loss_trace[-1]:.6g} -> {out}")


def _train_fc2vec(args, dual: bool):
    ctx = _load(args)
    _check_d(args.d)
    _positive("epochs", args.epochs)
    _positive("lr0", args.lr0)
    cfg = object2vec_config(seed=args.seed, epochs=args.epochs, lr0=args.lr0)
    fn = train_attribute2vec if dual else train_object2vec
    res = fn(ctx, args.arch, args.d, cfg, global_shuffle=args.global_shuffle)
    out = _out_dir(args)
    res.table.write(out / "embeddings.tsv")
    res.net.save(out / "model.ckpt")
    write_loss_trace(res.loss_trace, out / "loss.csv")
    outputs = ["embeddings.tsv", "embeddings.tsv.json", "model.ckpt", "loss.csv"]
    _manifest(args, out / "manifest.json", ctx, outputs, {"config": cfg.as_dict()})
    print(f"final loss {res.loss_trace[-1]:.6g} -> {out}")


def cmd_train_o2v(args):
    _train_fc2vec(args, dual=False)


def cmd_train_a2v(args):
    _train_fc2vec(args, dual=True)


def cmd_eval_linkpred(args):
    if args.years is None:
        raise CliError("link prediction needs --years (attribute year sidecar)")
    ctx = _load(args)
    _check_d(args.d)
    _positive("rounds", args.rounds)
    split = TemporalSplit(args.cutoff, args.test_start, args.test_end)
    table = EmbeddingTable.read(args.table) if args.table else None
    source = "table" if table is not None else args.embedding
    rep = link_prediction_experiment(ctx, split, args.arch, args.d, args.rounds, args.seed, args.epochs,
                                     source, table)
    out = _out_dir(args)
    write_json(rep.as_dict(), out / "linkpred.json")
    rows = [[f"{source} {args.arch} d={args.d}", rep.recall[0], rep.recall[1], rep.precision[0],
             rep.precision[1], rep.f1[0], rep.f1[1]]]
    write_csv(("method", "recall", "recall_sd", "precision", "precision_sd", "f1", "f1_sd"), rows,
              out / "linkpred.csv")
    _manifest(args, out / "manifest.json", ctx, ["linkpred.json", "linkpred.csv"])
    print(f"f1 {rep.f1[0]:.4f} +- {rep.f1[1]:.4f} over {args.rounds} rounds")


def cmd_eval_cluster(args):
    ctx = _load(args)
    _check_d(args.d)
    _positive("rounds", args.rounds)
    base = read_base(args.base, ctx.attributes) if args.base else None
    rep = clustering_experiment(ctx, args.d, args.k, args.rounds, args.seed, args.epochs, base=base)
    out = _out_dir(args)
    write_json(rep, out / "cluster.json")
    rows = []
    for key, s in rep["summary"].items():
        rnd = s.get("random_mean", {"mean": float("nan"), "stdev": float("nan")})
        rows.append([key, s["ratio"]["mean"], s["ratio"]["stdev"], rnd["mean"], rnd["stdev"],
                     s["max_size"]["mean"]])
    write_csv(("method", "ratio", "ratio_sd", "random", "random_sd", "avg_max_cluster"), rows,
              out / "cluster.csv")
    _manifest(args, out / "manifest.json", ctx, ["cluster.json", "cluster.csv"])
    for r in rows:
        print(f"{r[0]:<22} {r[1]:.4f}")


def cmd_eval_covers(args):
    ctx = _load(args)
    model = load_model(args.model)
    lattice = ConceptLattice.of(ctx, threads=args.threads)
    stats = covering_distance_experiment(model, lattice, int(args.sample_cap), args.seed)
    out = _out_dir(args)
    total = len(lattice.concepts) * (len(lattice.concepts) - 1) // 2 - len(lattice.covers)
    write_json({"stats": stats, "concepts": len(lattice.concepts), "covers": len(lattice.covers),
                "non_cover_pairs": total, "sampled": total > args.sample_cap}, out / "covers.json")
    write_csv(DISTANCE_HEADER, distance_rows(stats), out / "covers.csv")
    _manifest(args, out / "manifest.json", ctx, ["covers.json", "covers.csv"])
    for s in stats.values():
        print(f"{s.label:<6} {s.mean:.4f} +- {s.stdev:.4f} (n={s.count})")


def cmd_eval_implications(args):
    ctx = _load(args)
    model = load_model(args.model)
    base = read_base(args.base, ctx.attributes) if args.base else canonical_base(ctx)
    if not base:
        warnings.warn("canonical base is empty; nothing to measure", DegenerateInputWarning)
        return
    stats = implication_distance_experiment(model, base, args.seed)
    out = _out_dir(args)
    write_json({"stats": stats, "base_size": len(base)}, out / "implications.json")
    write_csv(DISTANCE_HEADER, distance_rows(stats), out / "implications.csv")
    _manifest(args, out / "manifest.json", ctx, ["implications.json", "implications.csv"])
    for s in stats.values():
        print(f"{s.label:<10} {s.mean:.4f} +- {s.stdev:.4f} (n={s.count})")


def cmd_scatter(args):
    if (args.model is None) == (args.table is None):
        raise CliError("give exactly one of --model (concept embeddings) or --table (entity embeddings)")
    if args.table:
        table = EmbeddingTable.read(args.table)
        n = scatter_export(table, table.names, args.out)
        ctx = None
    else:
        ctx = _load(args)
        model = load_model(args.model)
        concepts = enumerate_concepts(ctx)
        vecs = embed_many(model, [c.intent.bits for c in concepts], ctx.n_attributes)
        labels = {}
        for name in args.label_attr or []:
            if name not in ctx.attributes:
                raise CliError(f"unknown attribute {name!r}")
            labels[ctx.attributes.index(name)] = name
        n = scatter_export(vecs, intent_labeler(concepts, labels), args.out)
    _manifest(args, Path(str(args.out) + ".manifest.json"), ctx, [str(args.out)], {"count": n})
    print(f"{n} points -> {args.out}")


def cmd_verify_rudolph(args):
    ctx = _load(args)
    net = build_closure_net(ctx)
    res = verify_closure_net(ctx, net, samples=args.samples, seed=args.seed)
    if res.ok:
        print(f"closure net exact on {res.checked} attribute sets")
        return
    ce = res.counterexample
    raise CliError(f"closure net wrong on {{{', '.join(ctx.attributes[m] for m in ce.indices())}}}")


def cmd_affine_residual(args):
    ctx = _load(args)
    r = best_affine_fit_residual(ctx)
    print(f"max affine residual {r:.6g}")
    return r


def cmd_linear_diagnostic(args):
    ctx = _load(args)
    res = linear_derivation_diagnostic(ctx, d=args.d, samples=args.samples, epochs=args.epochs, seed=args.seed)
    print(f"train mse {res.train_mse:.4f} exact {res.train_exact:.3f}; "
          f"held-out mse {res.heldout_mse:.4f} exact {res.heldout_exact:.3f}")


# parser

def _context_args(p, years=False):
    p.add_argument("context", help=".cxt file or nominal .csv table")
    p.add_argument("--drop-empty", action="store_true", help="drop empty rows and columns instead of failing")
    p.add_argument("--missing-as-value", action="store_true", help="treat '?' in CSV tables as a value")
    if years:
        p.add_argument("--years", help="attribute year sidecar (name<TAB>year)")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with option values; flags override it")
    common.add_argument("--threads", type=int, default=None, help="worker cap (default: FCA2VEC_THREADS or all cores)")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(prog="fca2vec", description="Formal-concept embeddings toolkit.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_, **kw):
        p = sub.add_parser(name, parents=[common], help=help_, **kw)
        p.set_defaults(func=func)
        return p

    p = add("info", cmd_info, "context statistics")
    _context_args(p)
    p.add_argument("--full", action="store_true", help="also count concepts and the canonical base")
    p.add_argument("--json", help="write the statistics here")

    for name, func, what in (("concepts", cmd_concepts, "all concepts in lectic order"),
                             ("covers", cmd_covers, "covering relation"),
                             ("base", cmd_base, "canonical implication base")):
        p = add(name, func, what)
        _context_args(p)
        p.add_argument("--out", required=True)

    p = add("scale", cmd_scale, "nominally scale a CSV table into a .cxt context")
    p.add_argument("table")
    p.add_argument("--out", required=True)
    p.add_argument("--missing-as-value", action="store_true")
    p.add_argument("--no-header", action="store_true")
    p.add_argument("--name-column", default=None)

    p = add("train-closure2vec", cmd_train_closure2vec, "train a closure2vec siamese model")
    _context_args(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--d", type=int, default=3)
    p.add_argument("--distance", choices=("euclidean", "cosine"), default="euclidean")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--lr0", type=float, default=0.001)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--t", type=int, default=4, help="largest sampled attribute-set size")
    p.add_argument("--init", choices=("glorot", "word2vec"), default="glorot")

    for name, func, what, arch in (("train-o2v", cmd_train_o2v, "train object2vec", "CBoW"),
                                   ("train-a2v", cmd_train_a2v, "train attribute2vec", "SG")):
        p = add(name, func, what)
        _context_args(p)
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--arch", choices=("SG", "CBoW"), default=arch)
        p.add_argument("--d", type=int, default=3)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--epochs", type=int, default=200)
        p.add_argument("--lr0", type=float, default=1.0)
        p.add_argument("--global-shuffle", action="store_true")

    p = add("eval-linkpred", cmd_eval_linkpred, "temporal link prediction")
    _context_args(p, years=True)
    p.add_argument("--out", required=True)
    p.add_argument("--arch", choices=("SG", "CBoW"), default="CBoW")
    p.add_argument("--d", type=int, default=3)
    p.add_argument("--rounds", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--embedding", choices=("o2v", "random"), default="o2v")
    p.add_argument("--table", help="external embedding TSV (replaces training)")
    p.add_argument("--cutoff", type=int, default=2015)
    p.add_argument("--test-start", type=int, default=2016)
    p.add_argument("--test-end", type=int, default=2019)

    p = add("eval-cluster", cmd_eval_cluster, "attribute clustering vs canonical base")
    _context_args(p)
    p.add_argument("--out", required=True)
    p.add_argument("--d", type=int, default=3)
    p.add_argument("--k", type=int, nargs="+", default=[2, 5, 10])
    p.add_argument("--rounds", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--base", help="precomputed base file (skips computing it)")

    p = add("eval-covers", cmd_eval_covers, "distances of covering vs other concept pairs")
    _context_args(p)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--sample-cap", type=float, default=1e6)
    p.add_argument("--seed", type=int, default=0)

    p = add("eval-implications", cmd_eval_implications, "distances along base implications")
    _context_args(p)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--base", help="precomputed base file")

    p = add("scatter", cmd_scatter, "export embeddings as labelled points")
    p.add_argument("context", nargs="?")
    p.add_argument("--drop-empty", action="store_true")
    p.add_argument("--missing-as-value", action="store_true")
    p.add_argument("--model", help="closure2vec model; exports all concepts")
    p.add_argument("--table", help="embedding TSV; exports its rows labelled by name")
    p.add_argument("--label-attr", action="append", help="label concepts by this intent attribute (repeatable)")
    p.add_argument("--out", required=True)

    p = add("verify-rudolph", cmd_verify_rudolph, "check the exact closure network")
    _context_args(p)
    p.add_argument("--samples", type=int, default=None, help="random sets instead of all 2^|M|")
    p.add_argument("--seed", type=int, default=0)

    p = add("affine-residual", cmd_affine_residual, "best affine fit of the closure operator")
    _context_args(p)

    p = add("linear-diagnostic", cmd_linear_diagnostic, "linear net on the derivation operator (diagnostic)")
    _context_args(p)
    p.add_argument("--d", type=int, default=3)
    p.add_argument("--samples", type=int, default=2000)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    return parser


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            parser.error(f"cannot read config {args.config}: {exc}")
        if not isinstance(cfg, dict):
            parser.error("config file must hold a JSON object")
        cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions} - {"help", "config"}
        unknown = sorted(set(cfg) - known)
        if unknown:
            parser.error(f"unknown config keys: {', '.join(unknown)}")
        sub.set_defaults(**cfg)
        args = parser.parse_args(argv)
    args.threads = resolve_threads(args.threads)
    return args


def main(argv=None) -> int:
    args = parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            args.func(args)
        except (CliError, ValueError, OSError, TrainingError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
    degenerate = False
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
        degenerate |= issubclass(w.category, DegenerateInputWarning)
    return 2 if degenerate else 0


if __name__ == "__main__":
    sys.exit(main())
