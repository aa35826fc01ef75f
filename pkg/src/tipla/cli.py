"""Command-line entry point.

Usage::

    tipla --config presets/quadratic_stationary.toml [--out DIR] [--seed N] [--strict] [--quiet]

Exit codes: 0 success, 1 validation failure, 2 I/O failure, 3 property-suite
failure.  Mid-run divergence is data, not failure.
"""

from __future__ import annotations

import argparse
import sys

from .config import parse_config
from .errors import ConfigurationError
from .experiments import PropertySuiteFailure, run_experiment

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tipla",
                                     description="Tamed interacting particle Langevin experiments")
    parser.add_argument("--config", required=True, help="experiment configuration (TOML)")
    parser.add_argument("--out", default=None, help="output directory (default: [output].dir or 'out')")
    parser.add_argument("--seed", type=int, default=None, help="override the configured seed")
    parser.add_argument("--strict", action="store_true",
                        help="turn stepsize-constraint violations into errors")
    parser.add_argument("--quiet", action="store_true", help="suppress progress output")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config)
        out_dir = args.out if args.out is not None else cfg.output.get("dir", "out")
        run_experiment(cfg, out_dir, seed_override=args.seed, strict=args.strict, quiet=args.quiet)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except PropertySuiteFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
