"""Command-line interface.

Exit codes: 0 success, 2 configuration error (bad flags or config files),
3 data error (unreadable/invalid input data).
"""
from __future__ import annotations

import argparse
import csv
import json
import random
import sys

from . import treeio
from .errors import (
    BadSizeError,
    DimensionMismatchError,
    EmptyGridError,
    MemoryBudgetExceededError,
    ParseError,
    TooFewPointsError,
    TreeStructureError,
    TreecutError,
)
from .harness import ExperimentSpec, generate_tree, run_experiment, tune
from .hierarchy import count_cuts, cut_to_clustering
from .linkage import agglomerate, load_vectors, tree_report
from .metrics import best_cut
from .oracles import NoiseConfig
from .priors import constant_prior, sample_cut, uniform_prior

CONFIG_ERRORS = (BadSizeError, EmptyGridError, ValueError, KeyError)
DATA_ERRORS = (
    ParseError,
    DimensionMismatchError,
    TooFewPointsError,
    MemoryBudgetExceededError,
    TreeStructureError,
    FileNotFoundError,
)


def cmd_linkage(args) -> int:
    points = load_vectors(args.input, format=args.format, label_column=args.label_column, limit=args.limit)
    h = agglomerate(points, linkage=args.linkage, matrix_cap=args.matrix_cap)
    treeio.save_tree(h, args.out)
    if args.labels_out and points.labels is not None:
        with open(args.labels_out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["leaf_id", "label"])
            for i, lab in enumerate(points.labels):
                writer.writerow([i, lab])
    print(json.dumps(tree_report(h)))
    return 0


def cmd_gen_tree(args) -> int:
    h = generate_tree(args.kind, args.n, args.seed)
    treeio.save_tree(h, args.out)
    print(json.dumps({"n": h.n, "height": h.height}))
    return 0


def cmd_plant(args) -> int:
    h = treeio.load_tree(args.tree)
    rng = random.Random(args.seed)
    if args.prior == "uniform":
        prior = uniform_prior(h, count_cuts(h))
    elif args.prior.startswith("constant:"):
        prior = constant_prior(h, float(args.prior.split(":", 1)[1]))
    else:
        raise ValueError(f"unknown prior {args.prior!r}")
    cut = sample_cut(h, prior, rng)
    # Validates the noise flags early so bad configs fail here, not at run
    # time; the flips themselves are regenerated from the seed.
    NoiseConfig(lam=args.lam, seed=args.seed, mode=args.noise_mode)
    payload = {
        "cut": treeio.cut_to_json(cut),
        "clusters": treeio.clustering_to_json(cut_to_clustering(h, cut)),
        "noise": {"lam": args.lam, "seed": args.seed, "mode": args.noise_mode},
    }
    with open(args.out, "w") as fh:
        json.dump(payload, fh)
    print(json.dumps({"k": len(cut.nodes)}))
    return 0


def cmd_best(args) -> int:
    h = treeio.load_tree(args.tree)
    labels = [0] * h.n
    with open(args.labels) as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            labels[int(row[0])] = int(row[1])
    result = best_cut(h, labels)
    print(
        json.dumps(
            {
                "cut": treeio.cut_to_json(result.cut),
                "d_h": result.d_h,
                "error_fraction": result.d_h / (h.n * h.n),
                "k": result.k,
            }
        )
    )
    return 0


def cmd_stats(args) -> int:
    h = treeio.load_tree(args.tree)
    print(json.dumps(tree_report(h)))
    return 0


def cmd_run(args) -> int:
    with open(args.config) as fh:
        spec = ExperimentSpec.from_dict(json.load(fh))
    run_experiment(spec, args.out, jobs=args.jobs)
    print(json.dumps({"out": args.out}))
    return 0


def cmd_tune(args) -> int:
    with open(args.config) as fh:
        spec = ExperimentSpec.from_dict(json.load(fh))
    chosen = tune(spec, args.algorithm)
    print(json.dumps(chosen))
    return 0


def cmd_serve(args) -> int:
    from .service import serve

    serve(port=args.port, snapshot_dir=args.snapshot_dir, static_dir=args.static_dir)
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="treecut")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("linkage", help="agglomerate vectors into a tree file")
    p.add_argument("--input", required=True)
    p.add_argument("--format", default="csv", choices=["csv", "idx-image"])
    p.add_argument("--linkage", default="single", choices=["single", "complete", "median"])
    p.add_argument("--label-column", type=int, default=None)
    p.add_argument("--limit", type=int, default=None)
    p.add_argument("--matrix-cap", type=int, default=12000)
    p.add_argument("--out", required=True)
    p.add_argument("--labels-out", default=None)
    p.set_defaults(func=cmd_linkage)

    p = sub.add_parser("gen-tree", help="generate a synthetic tree")
    p.add_argument("--kind", required=True, choices=["full", "line", "random"])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_tree)

    p = sub.add_parser("plant", help="sample a planted cut from a prior")
    p.add_argument("--tree", required=True)
    p.add_argument("--prior", default="uniform")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p.add_argument("--noise-mode", default="auto", choices=["auto", "exact-subset", "bernoulli"])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plant)

    p = sub.add_parser("best", help="best cut in hindsight for class labels")
    p.add_argument("--tree", required=True)
    p.add_argument("--labels", required=True)
    p.set_defaults(func=cmd_best)

    p = sub.add_parser("stats", help="tree statistics report")
    p.add_argument("--tree", required=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("run", help="run an experiment config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("tune", help="tune one algorithm's grid parameter")
    p.add_argument("--config", required=True)
    p.add_argument("--algorithm", required=True)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("serve", help="labeling service for a live human oracle")
    p.add_argument("--port", type=int, default=8741)
    p.add_argument("--snapshot-dir", default=None)
    p.add_argument("--static-dir", default=None)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DATA_ERRORS as e:
        print(f"data error: {e}", file=sys.stderr)
        return 3
    except CONFIG_ERRORS as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except TreecutError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
