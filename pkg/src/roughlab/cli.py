"""Command line entry point.

Exit codes: 0 success, 2 invalid configuration, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import io
import sys
from pathlib import Path

from . import config as config_mod
from .experiments import run
from .fbm import CovarianceError
from .io import records_to_csv, write_records_json
from .lift import ResourceLimitError
from .rde import BlowUpError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

COMMANDS = ("converge", "l2rates", "ldp1d", "tailrates", "expgood", "rde-wz", "validate")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="roughlab", description="Gaussian rough path experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="INI configuration file")
        sp.add_argument("--out", help="CSV output path (default: [experiment] output, else stdout)")
        sp.add_argument("--threads", type=int, default=None, help="worker threads")
        sp.add_argument("--json", action="store_true", help="also write a JSON mirror next to the CSV")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    kind = None if args.command == "validate" else args.command
    try:
        cfg = config_mod.load(args.config, kind)
    except (config_mod.ConfigError, OSError) as exc:
        print(f"config invalid: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    threads = args.threads if args.threads is not None else cfg["experiment.threads"]
    if threads < 1:
        print("config invalid: --threads must be positive", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "validate":
        print(f"ok {cfg.hash}")
        return EXIT_OK
    try:
        names, rows = run(cfg, threads)
    except (CovarianceError, BlowUpError, ResourceLimitError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    out = args.out or cfg["experiment.output"]
    if out:
        with open(out, "w", newline="") as f:
            records_to_csv(names, rows, f)
        if args.json:
            write_records_json(Path(out).with_suffix(".json"), names, rows)
    else:
        buf = io.StringIO()
        records_to_csv(names, rows, buf)
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
