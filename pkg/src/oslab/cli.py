"""Command line entry point: ``oslab <kind> --config FILE [options]``."""

from __future__ import annotations

import argparse
import os
import sys

from . import __version__
from .config import KINDS, load_experiment
from .errors import OslabError
from .runner import run

ENV_OUT = "OSLAB_OUT"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="oslab", description="Open-system spectral experiments.")
    parser.add_argument("--version", action="version", version=f"oslab {__version__}")
    parser.add_argument("kind", choices=KINDS, help="experiment to run")
    parser.add_argument("--config", required=True, help="experiment configuration file")
    parser.add_argument("--plot", action="store_true", help="also write SVG plots")
    parser.add_argument("--serial", action="store_true", help="run in-process and bit-exact")
    parser.add_argument("--workers", type=int, default=None, help="worker processes (default: CPU count)")
    parser.add_argument("--out", default="oslab-out", help=f"output directory (overridden by ${ENV_OUT})")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.workers is not None and args.workers < 1:
        print("oslab: error: --workers must be at least 1", file=sys.stderr)
        return 1
    out_dir = os.environ.get(ENV_OUT) or args.out
    try:
        cfg = load_experiment(args.config, args.kind)
        manifest = run(cfg, out_dir, plot=args.plot, serial=args.serial, workers=args.workers)
    except OslabError as exc:
        print(f"oslab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"oslab: I/O error: {exc}", file=sys.stderr)
        return 3
    for record in manifest.outputs:
        print(os.path.join(out_dir, record["path"]))
    for key, value in manifest.summary.items():
        print(f"{key} = {value}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
