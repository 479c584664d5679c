"""CLI subcommands. Each module exposes ``register(subparsers)`` and ``run(args, ctx)``."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

from app.config import LabSettings

from . import analyze, asm, campaign, golden, report, run

COMMANDS = (asm, run, campaign, analyze, report, golden)


@dataclass
class CommandContext:
    settings: LabSettings
    console: Any
