"""Command-line entry point: ``mgembed <command> [options]``.

Exit codes: 0 success, 1 usage error, 2 data/validation error, 3 numerical
failure.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

from . import pipeline
from .errors import DataError, MGEmbedError, NumericalError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

logger = logging.getLogger("mgembed")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p):
    p.add_argument("--seed", type=int, default=None, help="global seed (default 0)")
    p.add_argument("--workers", type=int, default=None,
                   help="threads for context generation and SkipGram; 1 is fully deterministic")
    p.add_argument("--config", default=None, help="flat key=value config file")
    p.add_argument("-o", "--set", dest="overrides", action="append", default=[],
                   metavar="KEY=VALUE", help="override one config key (repeatable)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = _Parser(prog="mgembed", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    p = sub.add_parser("synth", help="generate the synthetic benchmark")
    p.add_argument("outdir")
    _common(p)

    p = sub.add_parser("train-embed", help="train SkipGram embeddings on one graph")
    p.add_argument("graph", help="edge list; a sibling .labels file fixes kind and ids")
    p.add_argument("out", help="embedding file to write")
    p.add_argument("--k", type=int, help="chunk size")
    p.add_argument("--n", type=int, help="permutations per node")
    p.add_argument("--dim", type=int, help="embedding dimension")
    p.add_argument("--epochs", type=int)
    _common(p)

    p = sub.add_parser("fuse", help="build a classification dataset from embeddings")
    p.add_argument("task", choices=pipeline.TASKS)
    p.add_argument("out")
    p.add_argument("--friendship", required=True, help="user friendship embedding")
    p.add_argument("--transaction", help="transaction-graph embedding")
    p.add_argument("--attribute", help="seller-attribute embedding (buying)")
    p.add_argument("--transaction-mimic", help="inferred transaction vectors for cold users")
    p.add_argument("--pairs", help="bipartite graph whose edges are the positives (buying)")
    p.add_argument("--labels", help="label<TAB>0|1 file (credit)")
    _common(p)

    p = sub.add_parser("mimic", help="train or apply the embedding mimic")
    msub = p.add_subparsers(dest="mode", parser_class=_Parser, required=True)
    q = msub.add_parser("train")
    q.add_argument("graph")
    q.add_argument("embeddings")
    q.add_argument("out")
    _common(q)
    q = msub.add_parser("infer")
    q.add_argument("model")
    q.add_argument("graph")
    q.add_argument("embeddings")
    q.add_argument("out")
    q.add_argument("--nodes", help="file with one node label per line (default: every missing node)")
    _common(q)

    p = sub.add_parser("classify", help="split, train and score a dataset")
    p.add_argument("dataset")
    p.add_argument("out_prefix")
    p.add_argument("--kind", choices=("logreg", "knn", "mlp"))
    p.add_argument("--rfe", action="store_true", help="select columns by RFE on the training side")
    _common(p)

    p = sub.add_parser("evaluate", help="metrics report from a predictions file")
    p.add_argument("predictions")
    p.add_argument("out_prefix")
    p.add_argument("--threshold", type=float)
    _common(p)

    p = sub.add_parser("learning-curve", help="train/CV accuracy against training size")
    p.add_argument("dataset")
    p.add_argument("out")
    p.add_argument("--kind", choices=("logreg", "knn", "mlp"))
    _common(p)

    p = sub.add_parser("e2e", help="run the whole pipeline for one task")
    p.add_argument("task", choices=pipeline.TASKS)
    p.add_argument("outdir")
    _common(p)
    return parser


def resolve_config(args):
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.workers is not None:
        overrides.append(f"workers={args.workers}")
    flag_keys = {"k": "embed.k", "n": "embed.n", "dim": "embed.dimension",
                 "epochs": "embed.epochs", "threshold": "classify.threshold"}
    for attr, key in flag_keys.items():
        v = getattr(args, attr, None)
        if v is not None:
            overrides.append(f"{key}={v}")
    if getattr(args, "rfe", False):
        overrides.append("classify.rfe=1")
    try:
        cfg = pipeline.load_config(args.config, overrides)
    except DataError:
        raise
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if cfg.workers < 1:
        raise UsageError("--workers must be >= 1")
    return cfg


def _read_nodes(path):
    with open(path, encoding="utf-8") as fh:
        return [ln.strip() for ln in fh if ln.strip()]


def dispatch(args):
    cfg = resolve_config(args)
    cmd = args.command
    if cmd == "synth":
        data = pipeline.cmd_synth(cfg, args.outdir)
        print(f"wrote {args.outdir} ({data.friendship.num_nodes} users)")
    elif cmd == "train-embed":
        e = pipeline.cmd_train_embed(cfg, args.graph, args.out)
        print(f"wrote {args.out} ({e.vocab_size} x {e.dimension})")
    elif cmd == "fuse":
        if args.task == "buying":
            missing = [f for f in ("transaction", "attribute", "pairs") if not getattr(args, f)]
        else:
            missing = [f for f in ("labels",) if not getattr(args, f)]
            if args.task == "credit" and not args.transaction:
                missing.append("transaction")
        if missing:
            raise UsageError(f"task {args.task} needs --" + ", --".join(m.replace("_", "-") for m in missing))
        ds = pipeline.cmd_fuse(cfg, args.task, args.out, pairs=args.pairs, labels=args.labels,
                               friendship=args.friendship, transaction=args.transaction,
                               attribute=args.attribute, transaction_mimic=args.transaction_mimic)
        print(f"wrote {args.out} ({ds.n_rows} rows x {ds.n_features} features)")
    elif cmd == "mimic" and args.mode == "train":
        m = pipeline.cmd_mimic_train(cfg, args.graph, args.embeddings, args.out)
        print(f"wrote {args.out} (train_mse={m.train_mse:.6g} val_mse={m.val_mse:.6g})")
    elif cmd == "mimic":
        nodes = _read_nodes(args.nodes) if args.nodes else None
        e = pipeline.cmd_mimic_infer(cfg, args.model, args.graph, args.embeddings, args.out, nodes)
        print(f"wrote {args.out} ({e.vocab_size} inferred)")
    elif cmd == "classify":
        _, tr, te = pipeline.cmd_classify(cfg, args.dataset, args.out_prefix, args.kind)
        print(f"wrote {args.out_prefix}.model and {args.out_prefix}.pred "
              f"(train {tr.n_rows}, test {te.n_rows})")
    elif cmd == "evaluate":
        pipeline.cmd_evaluate(cfg, args.predictions, args.out_prefix)
        print(open(args.out_prefix + ".table", encoding="utf-8").read(), end="")
    elif cmd == "learning-curve":
        points = pipeline.cmd_learning_curve(cfg, args.dataset, args.out, args.kind)
        for p in points:
            print(f"{p.fraction:g}\ttrain={p.train_mean:.3f}\tcv={p.cv_mean:.3f}")
    elif cmd == "e2e":
        pipeline.run_e2e(cfg, args.task, args.outdir)
        print(open(os.path.join(args.outdir, "eval.table"), encoding="utf-8").read(), end="")
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return dispatch(args)
    except UsageError as exc:
        print(f"mgembed: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"mgembed: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, MGEmbedError) as exc:
        print(f"mgembed: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"mgembed: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
