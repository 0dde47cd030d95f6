"""Command-line entry point: ``driftwave verify`` and ``driftwave simulate``."""

from __future__ import annotations

import argparse
import logging
import sys

from . import __version__
from .scenario import ConfigError, parse_config, run

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="driftwave",
        description="Operator-identity checks and drift wave simulations on cylinder grids.",
    )
    parser.add_argument("--version", action="version", version=f"driftwave {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    verify = sub.add_parser("verify", help="run a verification suite (verify_* modes)")
    verify.add_argument("--config", required=True, help="scenario file")
    verify.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    verify.add_argument("--out", default=None, help="output directory")
    simulate = sub.add_parser("simulate", help="run a simulation (simulate_* modes)")
    simulate.add_argument("--config", required=True, help="scenario file")
    simulate.add_argument("--out", default=None, help="output directory")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = parse_config(args.config)
    except ConfigError as exc:
        print(f"driftwave: {exc}", file=sys.stderr)
        return EXIT_USAGE
    wanted = "verify" if args.command == "verify" else "simulate"
    if not cfg.mode.startswith(wanted):
        print(f"driftwave: mode {cfg.mode} cannot be run with '{args.command}'", file=sys.stderr)
        return EXIT_USAGE
    if getattr(args, "seed", None) is not None:
        if not 0 <= args.seed < 2**64:
            print("driftwave: --seed must be a 64-bit unsigned integer", file=sys.stderr)
            return EXIT_USAGE
        cfg.seed = args.seed
    result = run(cfg, args.out)
    if result.exit_code == EXIT_NUMERIC:
        print(f"driftwave: numerical failure: {result.message}", file=sys.stderr)
        return EXIT_NUMERIC
    if result.report is not None:
        sys.stdout.write(result.report.to_text())
    for path in result.artifacts:
        print(f"wrote {path}")
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
