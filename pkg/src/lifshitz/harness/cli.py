"""Command line entry point: ``lifshitz <kind> [--config PATH] [--seed N] ...``.

Exit status: 0 when every certification passes, 1 when one fails,
2 for configuration errors, 3 for any other numerical failure.
"""

from __future__ import annotations

import argparse
import sys

from ..errors import ConfigurationError, LifshitzError
from .config import KINDS, load_config, parse_config
from .records import write_outputs
from .runner import ExperimentError, execute

EXIT_OK, EXIT_CERT, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML experiment file; [experiment].kind is overridden by the subcommand")
    common.add_argument("--seed", type=_u64, help="master seed (u64)")
    common.add_argument("--samples", type=_positive, help="Monte Carlo sample count")
    common.add_argument("--jobs", type=_positive, default=1, help="worker processes (results do not depend on it)")
    common.add_argument("--out", help="output directory for the record and the table")
    parser = argparse.ArgumentParser(prog="lifshitz", description="Random breather spectral experiments")
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind in KINDS:
        sub.add_parser(kind, parents=[common], help=f"run a {kind} experiment")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {"kind": args.kind, "seed": args.seed, "samples": args.samples, "out": args.out}
    try:
        cfg = load_config(args.config, overrides) if args.config else parse_config("", overrides)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        record, table = execute(cfg, args.jobs)
    except ExperimentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG if isinstance(exc.cause, ConfigurationError) else EXIT_RUNTIME
    except LifshitzError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG if isinstance(exc, ConfigurationError) else EXIT_RUNTIME
    rec_path, tab_path = write_outputs(record, table, cfg.out)
    for c in record.certifications:
        print(f"{'PASS' if c['passed'] else 'FAIL'}  {c['name']}")
    print(f"record: {rec_path}")
    print(f"table:  {tab_path}")
    return EXIT_OK if record.passed else EXIT_CERT


if __name__ == "__main__":
    sys.exit(main())
