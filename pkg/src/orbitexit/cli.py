"""Command-line entry points.

Subcommands: orbit, theory-table, ldp, simulate, kernel, cycling, sweep,
validate-linear, bernstein, descent.  Exit codes: 0 success, 1 usage
error, 2 assertion-bearing experiment failure.
"""

from __future__ import annotations

import argparse
import os
import sys

from .config import ExperimentConfig
from . import experiments


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        sys.exit(1)


SUBCOMMANDS = ("orbit", "theory-table", "ldp", "simulate", "kernel",
               "kernel-trend", "cycling", "sweep", "validate-linear",
               "bernstein", "descent")


def build_parser() -> _Parser:
    parser = _Parser(prog="orbitexit",
                     description="noise-induced exit through an unstable periodic orbit")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", required=True, help="experiment config file")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--out", default=None, help="output directory override")
        p.add_argument("--threads", type=int, default=None,
                       help="worker count (wall time only, never results)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        print("error: a subcommand is required", file=sys.stderr)
        return 1

    if not os.path.exists(args.config):
        print(f"error: config file not found: {args.config}", file=sys.stderr)
        return 1

    try:
        cfg = ExperimentConfig.from_file(
            args.config, seed=args.seed, out_dir=args.out, workers=args.threads)
    except (ValueError, KeyError) as exc:
        print(f"error: bad config: {exc}", file=sys.stderr)
        return 1

    cfg.kind = args.command
    try:
        cfg.validate()
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    runner = experiments.RUNNERS[args.command]
    try:
        report = runner(cfg)
    except (experiments.InsufficientExits, experiments.InsufficientData,
            experiments.ToleranceExceeded) as exc:
        print(f"experiment failed its assertion: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    if isinstance(report, dict):
        keys = [k for k in report.keys() if k != "provenance"][:8]
        print(f"{args.command}: ok ({', '.join(keys)}) -> {cfg.out_dir}")
    else:
        print(f"{args.command}: ok -> {cfg.out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
