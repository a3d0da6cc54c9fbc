"""Command-line entry point: ``momentvar <command> ...``."""

from __future__ import annotations

import argparse
import logging
import sys
from typing import List, Optional

from .errors import MomentVarError
from .gateway.config import empty_config, load_config
from .gateway.pipeline import run_pipeline
from .gateway.reports import dumps_record

logger = logging.getLogger("momentvar")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="momentvar",
        description="Realized and option-implied moment variations, simulation and hedging reports.",
    )
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required: bool):
        if not config_required:
            sp.add_argument("--config", help="key = value config file")
        sp.add_argument("--out", help="output directory (default: output.dir from config)")
        sp.add_argument("--print", dest="print_records", action="store_true",
                        help="echo report records to stdout")

    sp = sub.add_parser("realized", help="realized variations from a timestamp,price CSV")
    sp.add_argument("target", metavar="ticks.csv")
    common(sp, False)

    sp = sub.add_parser("implied", help="option-implied variations and moments from an option CSV")
    sp.add_argument("target", metavar="options.csv")
    common(sp, False)

    for name, text in (
        ("simulate", "simulate Heston paths and check the moment relations"),
        ("jumps", "jump corrections for a Heston + compound-Poisson ensemble"),
        ("hedge", "variation-swap hedging study on a simulated ensemble"),
    ):
        sp = sub.add_parser(name, help=text)
        sp.add_argument("config", metavar="config")
        common(sp, True)

    sp = sub.add_parser("report", help="index the reports in a directory")
    sp.add_argument("target", metavar="dir")
    sp.add_argument("--config", help="key = value config file")
    sp.add_argument("--print", dest="print_records", action="store_true", help="echo records to stdout")
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command in ("simulate", "jumps", "hedge"):
            cfg = load_config(args.config)
            target = None
        else:
            cfg = load_config(args.config) if args.config else empty_config()
            target = args.target
        bundle = run_pipeline(cfg, args.command, target=target, out_dir=getattr(args, "out", None))
    except (MomentVarError, OSError) as exc:
        print(f"momentvar {args.command}: error: {exc}", file=sys.stderr)
        return 1
    if args.print_records:
        for rec in bundle.records:
            print(dumps_record(rec))
    for path in bundle.files:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
