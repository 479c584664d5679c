"""softerr-lab command-line entry point.

Usage:
    python -m app asm prog.s --listing
    python -m app run qsort
    python -m app campaign --benchmark qsort --location registers --faults 500 --out runs/qs-reg
    python -m app campaign --grid --faults 1000 --out runs/grid --jobs 4
    python -m app analyze runs/grid
    python -m app report runs/grid

Exit codes: 0 success, 1 usage/config/assembly, 2 golden failure, 3 I/O.
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Optional, Sequence

from pydantic import ValidationError

from app import __version__
from app.commands import COMMANDS, CommandContext
from app.config import get_settings
from app.console import get_console, print_error, setup_logging
from app.errors import LabError

logger = logging.getLogger("softerr.cli")

EXIT_OK = 0
EXIT_USAGE = 1


class LabArgumentParser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = LabArgumentParser(
        prog="softerr-lab",
        description="Deterministic soft-error fault-injection lab with PMU event multiplexing",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING (default from settings)")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True
    for command in COMMANDS:
        command.register(sub)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    settings = get_settings()
    setup_logging(args.log_level or settings.log_level)
    ctx = CommandContext(settings=settings, console=get_console())

    try:
        return args.handler(args, ctx)
    except ValidationError as e:
        print_error(ctx.console, f"invalid configuration:\n{e}")
        return EXIT_USAGE
    except LabError as e:
        print_error(ctx.console, f"{type(e).__name__}: {e}")
        return e.exit_code
    except KeyboardInterrupt:
        logger.warning("interrupted")
        return 130


if __name__ == "__main__":
    sys.exit(main())
