"""Batch figure generation from optimizer export directories."""

from __future__ import annotations

import argparse
import sys

from .bundle import VizBundle
from .embedding import embed_and_panel
from .traces import traceplots
from .training import training_figures


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="viz", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (("embed", "parameter-space embedding panels"),
                            ("training", "convergence and performance curves"),
                            ("trace", "per-reward trajectory traceplots")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--in", dest="in_dirs", action="append", required=True,
                       help="export directory (repeatable for overlaid training figures)")
        p.add_argument("--out", required=True)
        p.add_argument("--neighbors", type=int, default=15)
        p.add_argument("--min-dist", type=float, default=0.1)
        p.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    bundles = [VizBundle(in_dir=d, out_dir=args.out, neighbors=args.neighbors,
                         min_dist=args.min_dist, seed=args.seed)
               for d in args.in_dirs]
    if args.command == "embed":
        written = [p for b in bundles for p in embed_and_panel(b)]
    elif args.command == "training":
        written = training_figures(bundles)
    else:
        written = [p for b in bundles for p in traceplots(b)]
    for p in written:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
