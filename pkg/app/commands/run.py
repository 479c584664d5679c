"""``run``: execute a program fault-free and dump output, cycles and all events."""

from __future__ import annotations

import argparse
import logging
from pathlib import Path

from app.benchmarks.builder import BENCHMARKS, build_benchmark
from app.console import print_panel, print_table
from app.debug.port import DebugSession
from app.errors import StorageError, UndefinedLabel
from app.models.schemas import CATALOG, StopKind
from app.uarch.pmu import OracleObserver
from app.vm.assembler import ProgramImage, assemble
from app.vm.machine import read_output

logger = logging.getLogger("softerr.cli")


def register(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("run", help="Run a source file or bundled benchmark without faults")
    p.add_argument("target", help="Assembly source path or bundled benchmark name")
    p.add_argument("--budget", type=int, default=None, help="Cycle budget (default from settings)")
    p.add_argument("--mem-size", type=int, default=None, help="Memory size in bytes")
    p.set_defaults(handler=run)


def load_image(target: str) -> ProgramImage:
    if target in BENCHMARKS and not Path(target).is_file():
        return build_benchmark(target).image
    try:
        source = Path(target).read_text(encoding="utf-8")
    except OSError as e:
        raise StorageError(f"cannot read {target}: {e}") from e
    return assemble(source)


def run(args: argparse.Namespace, ctx) -> int:
    settings = ctx.settings
    image = load_image(args.target)
    session = DebugSession(image, args.mem_size or settings.mem_size, settings.stack_size,
                           settings.hpc_slots)
    oracle = session.state.attach(OracleObserver())
    try:
        session.set_breakpoint(image.symbol("__final_bp"))
    except UndefinedLabel:
        logger.debug("no __final_bp in %s; running to HALT", args.target)

    stop = session.run(args.budget or settings.golden_budget)
    output = read_output(session.state)
    counts = oracle.snapshot()

    print_panel(ctx.console, f"run {args.target}", [
        f"Stop:    {stop}",
        f"Cycles:  {session.state.cycle}",
        f"Output:  {len(output)} bytes",
        f"Hex:     {output.hex() or '-'}",
    ], style="green" if stop.kind in (StopKind.BREAKPOINT, StopKind.HALTED) else "red")
    print_table(ctx.console, "Events (PMU window)", ["event", "count"],
                [(e.name, counts[e]) for e in CATALOG])
    return 0 if stop.kind in (StopKind.BREAKPOINT, StopKind.HALTED) else 1
