"""``asm``: assemble a source file into a flat memory image."""

from __future__ import annotations

import argparse
import logging
from pathlib import Path

from app.console import print_panel
from app.errors import StorageError
from app.vm.assembler import assemble

logger = logging.getLogger("softerr.cli")


def register(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("asm", help="Assemble a source file into a .bin image")
    p.add_argument("src", type=Path, help="Assembly source")
    p.add_argument("-o", "--output", type=Path, default=None, help="Image path (default: <src>.bin)")
    p.add_argument("--listing", action="store_true", help="Print the address/word/disassembly listing")
    p.add_argument("--base", type=lambda s: int(s, 0), default=0, help="Load address of the code")
    p.set_defaults(handler=run)


def run(args: argparse.Namespace, ctx) -> int:
    try:
        source = args.src.read_text(encoding="utf-8")
    except OSError as e:
        raise StorageError(f"cannot read {args.src}: {e}") from e
    image = assemble(source, base=args.base)

    out = args.output or args.src.with_suffix(".bin")
    try:
        out.write_bytes(image.to_bytes())
    except OSError as e:
        raise StorageError(f"cannot write {out}: {e}") from e
    logger.info("wrote %s (%d bytes)", out, image.end - image.code_base)

    if args.listing:
        for line in image.listing():
            print(line)
    print_panel(ctx.console, "Assembled", [
        f"Image:   {out}",
        f"Code:    0x{image.code_base:08x}-0x{image.code_end:08x} ({len(image.code)} words)",
        f"Data:    0x{image.data_base:08x} ({len(image.data)} bytes)",
        f"Entry:   0x{image.entry:08x}",
        f"Symbols: {len(image.symbols)}",
    ])
    return 0
