#!/usr/bin/env python3
"""
calibatt - Calibrated likelihood ATT estimation, simulation and bootstrap tool
Main application entry point
"""

import argparse
import logging
import sys
from typing import List, Optional

from src import __version__
from src.cli.commands import COMMAND_HANDLERS, exit_code
from src.cli.config import COMMANDS, FORMATS, RunConfig, apply_overrides, load_config
from src.errors import CalibattError
from src.utils import setup_logging

logger = logging.getLogger("calibatt")


def build_parser() -> argparse.ArgumentParser:
    """Subcommands share one set of override flags"""
    parser = argparse.ArgumentParser(prog="calibatt", description=__doc__.strip().splitlines()[0])
    parser.add_argument("--version", action="version", version=f"calibatt {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        sub = subparsers.add_parser(command, help=f"{command} from a JSON run config")
        sub.add_argument("--config", help="JSON run config")
        sub.add_argument("--seed", type=int)
        sub.add_argument("--workers", type=int, help="worker processes (default: $CALIBATT_WORKERS or 1)")
        sub.add_argument("--out", help="output directory")
        sub.add_argument("--format", choices=FORMATS)
        sub.add_argument("--long", action="store_true", help="also write per-replicate / per-resample rows")
        sub.add_argument("--log-level", default="INFO")
        sub.add_argument("--log-file")
        sub.add_argument("--quiet", action="store_true", help="no progress bars")
        if command == "simulate":
            sub.add_argument("--preset", help="named simulation preset, e.g. qz-moderate")
            sub.add_argument("--replicates", type=int)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main application entry point"""
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level, args.log_file)

    # Merge config file and flags
    try:
        config = load_config(args.config, args.command) if args.config else RunConfig(command=args.command)
        config = apply_overrides(config, seed=args.seed, workers=args.workers, out=args.out, fmt=args.format,
                                 replicates=getattr(args, "replicates", None),
                                 preset_name=getattr(args, "preset", None), long=args.long)
    except CalibattError as e:
        logger.error("%s: %s", type(e).__name__, e)
        return exit_code(e)

    return COMMAND_HANDLERS[args.command](config, not args.quiet)


if __name__ == "__main__":
    sys.exit(main())
