"""Command line entry point: ``analog-zne run|validate <config>``.

Exit codes: 0 success, 1 invalid config, 2 failure while running.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

from .config import ConfigError, load_config
from .experiments import run_experiment, write_outputs

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2
MAX_SEED = 2**64 - 1

log = logging.getLogger("analog_zne")


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value <= MAX_SEED:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _threads(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("need at least one thread")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="analog-zne", description="Shot-to-shot noise ZNE experiments.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    # also accepted after the subcommand; SUPPRESS keeps it from resetting the top-level flag
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS, help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", parents=[common], help="run an experiment and write CSV tables")
    run.add_argument("config")
    run.add_argument("--seed", type=_seed, default=None, help="override the config seed")
    run.add_argument("--threads", type=_threads, default=1, help="worker threads across noise nodes")
    run.add_argument("--out", default=None, help="output directory (overrides the config)")
    check = sub.add_parser("validate", parents=[common], help="list config problems without running")
    check.add_argument("config")
    return parser


def _load(path):
    try:
        return load_config(path), []
    except ConfigError as exc:
        return None, str(exc).splitlines()
    except OSError as exc:
        return None, [f"cannot read config: {exc}"]


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")

    cfg, problems = _load(args.config)
    if cfg is not None:
        if getattr(args, "seed", None) is not None:
            cfg = dataclasses.replace(cfg, seed=args.seed)
        if getattr(args, "out", None) is not None:
            cfg = dataclasses.replace(cfg, output=args.out)
        problems = cfg.validate()

    if args.command == "validate":
        for p in problems:
            print(p)
        if not problems:
            print("config is valid")
        return EXIT_INVALID if problems else EXIT_OK

    if problems:
        for p in problems:
            print(f"error: {p}", file=sys.stderr)
        return EXIT_INVALID
    try:
        out = run_experiment(cfg, threads=args.threads)
        paths = write_outputs(out, cfg.output)
    except Exception as exc:  # any inner failure maps to the runtime exit code
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for p in paths:
        log.info("wrote %s", p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
