"""Command-line front end: ``terafet {iv,sweep,profile,compare,check}``."""

from __future__ import annotations

import argparse
import logging
import sys

from .harness import EXIT_CONFIG, PRESETS, run_scenario
from .results import METHODS


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="terafet",
        description="Plasma-wave THz rectification: closed form, hydrodynamics and "
                    "segmented-circuit transients.",
    )
    sub = ap.add_subparsers(dest="command", required=True)
    helps = {
        "iv": "DC drain-current table of the segmented circuit",
        "sweep": "rectified response versus frequency for each method, plus a report",
        "profile": "velocity, density and Drude-inductance profiles at one frequency",
        "compare": "rebuild the comparison report from curve CSVs in --out",
        "check": "run the acceptance gate (exit 4 on failure)",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text, description=text)
        src = p.add_mutually_exclusive_group(required=name != "check")
        src.add_argument("--config", metavar="PATH", help="scenario TOML file")
        src.add_argument("--preset", choices=PRESETS, help="bundled scenario")
        p.add_argument("--method", action="append", choices=METHODS, metavar="TAG",
                       help=f"restrict to a method ({', '.join(METHODS)}); repeatable")
        p.add_argument("--out", metavar="DIR", help="output directory (default: out)")
        p.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors, which matches the config-error code
        return int(exc.code) if exc.code is not None else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    source = args.config or args.preset or "fig5a"
    return run_scenario(source, args.command, out_dir=args.out, methods=args.method)


if __name__ == "__main__":
    sys.exit(main())
