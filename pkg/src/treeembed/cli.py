"""Command-line entry point: ``treeembed <subcommand> [options]``."""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from . import pipeline as pl
from .config import load_config


def _floats(text):
    return tuple(float(x) for x in text.split(",") if x.strip())


def _common(top: bool) -> argparse.ArgumentParser:
    # subcommand copies suppress defaults so flags given before the
    # subcommand are not reset
    d = (lambda v: v) if top else (lambda v: argparse.SUPPRESS)
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", default=d(None), help="INI config file")
    p.add_argument("--seed", type=int, default=d(None), help="root seed (overrides the config)")
    p.add_argument("--out-dir", default=d("out"), help="artifact directory (default: out)")
    p.add_argument("--paper-sentinel", action="store_true", default=d(False),
                   help="write outlier cells as -1000000 in bands.csv")
    p.add_argument("-v", "--verbose", action="store_true", default=d(False))
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common(top=False)
    parser = argparse.ArgumentParser(prog="treeembed", description=__doc__,
                                     parents=[_common(top=True)])
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("synth", parents=[common], help="generate a synthetic orchard scene")

    p = sub.add_parser("extract", parents=[common], help="find tree crowns in a cube")
    p.add_argument("--cube", help="cube header (default: <out-dir>/scene.hdr or [run] cube)")
    p.add_argument("--k", type=int, help="grid side")
    p.add_argument("--theta-g", type=int, help="leaf pixels needed to connect a grid")
    p.add_argument("--ari2", type=float)
    p.add_argument("--sipi", type=float)
    p.add_argument("--p900-max", type=float)
    p.add_argument("--p780-min", type=float)
    p.add_argument("--p660-max", type=float)
    p.add_argument("--min-tree-pixels", type=int)

    p = sub.add_parser("indices", parents=[common], help="per-pixel vegetation indices")
    p.add_argument("--cube")

    p = sub.add_parser("segment", parents=[common], help="segment means and monotone runs")
    p.add_argument("--n-segments", type=int)

    sub.add_parser("band", parents=[common], help="normalise, screen outliers and band")

    p = sub.add_parser("train", parents=[common], help="train the band embedding model")
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)

    sub.add_parser("vectors", parents=[common], help="tree embedding and direct vectors")

    p = sub.add_parser("cluster", parents=[common], help="k-means on tree vectors")
    p.add_argument("--k", type=int)
    p.add_argument("--space", choices=sorted(pl.SPACES), action="append")

    p = sub.add_parser("purity", parents=[common], help="purity of two cluster assignments")
    p.add_argument("assignments", nargs="*", help="two cluster CSVs (default: run outputs)")

    p = sub.add_parser("classify", parents=[common], help="split-sweep classification accuracy")
    p.add_argument("--algorithm", action="append",
                   choices=["gaussian-naive-bayes", "multinomial-logistic"])
    p.add_argument("--fractions", type=_floats, help="comma-separated test fractions")
    p.add_argument("--reps", type=int)
    p.add_argument("--space", choices=sorted(pl.SPACES), action="append")

    p = sub.add_parser("characterize", parents=[common], help="describe embedding clusters")
    p.add_argument("--cluster-id", type=int, action="append")
    p.add_argument("--top-n", type=int)

    p = sub.add_parser("nn", parents=[common], help="nearest vegetation-index bands")
    p.add_argument("--token", action="append", help="band name such as 'Low EVI'")
    p.add_argument("--n", type=int)
    p.add_argument("--space", choices=sorted(pl.SPACES), action="append")
    p.add_argument("--metric", choices=["euclidean", "cosine"])

    p = sub.add_parser("run", parents=[common], help="full pipeline with manifest")
    p.add_argument("--from-stage", choices=pl.STAGE_NAMES,
                   help="resume from this stage using cached outputs")
    return parser


def _override(section, **values):
    values = {k: v for k, v in values.items() if v is not None}
    return dataclasses.replace(section, **values) if values else section


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    cfg = load_config(args.config, args.seed)
    if args.paper_sentinel:
        cfg.run = dataclasses.replace(cfg.run, paper_sentinel=True)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cmd = args.command
    try:
        if cmd in ("extract", "indices") and args.cube:
            cfg.run = dataclasses.replace(cfg.run, cube=args.cube)
        if cmd == "synth":
            scene = pl.stage_synth(cfg, out)
            print(f"wrote {out / pl.F['cube']} with {len(scene.crowns)} crowns")
        elif cmd == "extract":
            cfg.extract = _override(cfg.extract, k=args.k, theta_g=args.theta_g, ari2=args.ari2,
                                    sipi=args.sipi, p900_max=args.p900_max,
                                    p780_min=args.p780_min, p660_max=args.p660_max,
                                    min_tree_pixels=args.min_tree_pixels)
            trees = pl.stage_extract(cfg, out)
            print(f"extracted {len(trees)} trees")
        elif cmd == "indices":
            pl.stage_indices(cfg, out)
        elif cmd == "segment":
            cfg.run = _override(cfg.run, n_segments=args.n_segments)
            pl.stage_segment(cfg, out)
        elif cmd == "band":
            pl.stage_band(cfg, out)
        elif cmd == "train":
            _, history = pl.stage_train(cfg, out, args.epochs, args.lr)
            print(f"final loss {history[-1]:.6g} after {history.size} epochs")
        elif cmd == "vectors":
            pl.stage_vectors(cfg, out)
        elif cmd == "cluster":
            pl.stage_cluster(cfg, out, tuple(args.space or pl.SPACES), args.k)
        elif cmd == "purity":
            if args.assignments and len(args.assignments) != 2:
                raise SystemExit("purity takes exactly two assignment CSVs")
            report = pl.stage_purity(cfg, out, *(args.assignments or (None, None)))
            print(json.dumps(report))
        elif cmd == "classify":
            pl.stage_classify(cfg, out, args.algorithm, args.fractions, args.reps,
                              tuple(args.space or pl.SPACES))
        elif cmd == "characterize":
            pl.stage_characterize(cfg, out, args.cluster_id, args.top_n)
        elif cmd == "nn":
            pl.stage_nn(cfg, out, args.token, args.n, tuple(args.space or pl.SPACES), args.metric)
        elif cmd == "run":
            pl.run_pipeline(cfg, out, args.from_stage)
            print(f"pipeline complete; manifest at {out / pl.F['manifest']}")
    except pl.StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {cmd}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
