"""``golden``: regenerate a benchmark's golden reference."""

from __future__ import annotations

import argparse
from pathlib import Path

from app.benchmarks.builder import build_benchmark
from app.console import print_panel
from app.models.schemas import CampaignConfig, LocationClass
from app.services.campaign_service import CampaignService
from app.services.storage_service import CampaignStore


def register(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("golden", help="Write the fault-free reference of a benchmark")
    p.add_argument("benchmark")
    p.add_argument("--out", type=Path, required=True, help="Output JSON file")
    p.add_argument("--events", default=None, help="Comma-separated event names")
    p.add_argument("--hpc", type=int, default=None, help="Counter slots in the PMU bank")
    p.set_defaults(handler=run)


def run(args: argparse.Namespace, ctx) -> int:
    settings = ctx.settings
    data = {
        "benchmark": args.benchmark,
        "location_class": LocationClass.REGISTERS,
        "num_faults": 1,
        "hpc_slots": args.hpc or settings.hpc_slots,
        "mem_size": settings.mem_size,
        "stack_size": settings.stack_size,
    }
    if args.events:
        data["events"] = args.events
    config = CampaignConfig.model_validate(data)
    golden = CampaignService(settings).golden_run(build_benchmark(args.benchmark), config)
    path = CampaignStore(args.out.parent).save_golden(golden, args.out)
    print_panel(ctx.console, f"golden {args.benchmark}", [
        f"File:        {path}",
        f"Cycles:      {golden.golden_cycles}",
        f"Output:      {golden.output_digest[:16]}…",
        f"Trace:       {len(golden.dynamic_trace)} addresses",
        f"Repetitions: {golden.repetitions}",
    ])
    return 0
