"""Command-line entry point: ``floodscope <stage> --config run.toml``."""

from __future__ import annotations

import argparse
import logging
import sys

from .errors import ConfigError, FloodscopeError
from .pipeline import STAGES, load_config, run_pipeline

EXIT_OK, EXIT_CONFIG, EXIT_STAGE = 0, 2, 3


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML config file")
    common.add_argument("--out", help="output directory (overrides paths.out)")
    common.add_argument("--seed", type=int, help="RNG seed; required for topics and relevance")
    common.add_argument("--threads", type=int, help="upper bound on worker threads")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="floodscope", description=__doc__, parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)
    for stage in STAGES:
        sub.add_parser(stage, parents=[common], help=f"run the {stage} stage")
    sub.add_parser("run-all", parents=[common], help="run every stage in order")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors, which matches the config-error code
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s"
    )
    stages = set(STAGES) if args.command == "run-all" else {args.command}
    try:
        cfg = load_config(args.config, {"out": args.out, "seed": args.seed, "threads": args.threads})
        manifest = run_pipeline(cfg, stages)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FloodscopeError as exc:
        print(f"stage failure: {exc}", file=sys.stderr)
        return EXIT_STAGE
    for stage in STAGES:
        if stage in stages:
            print(f"{stage}: {len(manifest.get(stage, {}))} file(s)")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
