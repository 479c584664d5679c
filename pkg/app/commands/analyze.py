"""``analyze``: write pca_scatter.csv, cycles_hist.csv and breakdown.csv."""

from __future__ import annotations

import argparse
from pathlib import Path

from app.console import print_table
from app.errors import MissingRecords
from app.models.schemas import BreakdownReport
from app.services.analysis_service import AnalysisService
from app.services.storage_service import CampaignStore


def register(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("analyze", help="Run the analysis pipeline over a campaign directory")
    p.add_argument("dir", type=Path, help="Campaign directory (or grid root)")
    p.add_argument("--bins", type=int, default=None, help="Histogram bins (default from settings)")
    p.add_argument("--raw-cycles", action="store_true", help="Histogram raw CYCLES instead of preprocessed")
    p.add_argument("--grid", action="store_true", help="Treat DIR as a grid root")
    p.set_defaults(handler=run)


def breakdown_rows(report: BreakdownReport) -> list[tuple]:
    return [
        (r.benchmark, r.location.value, r.total, f"{r.benign_pct:.1f}", f"{r.sdc_pct:.1f}",
         f"{r.other_pct:.1f}")
        for r in report.rows
    ]


def run(args: argparse.Namespace, ctx) -> int:
    store = CampaignStore(args.dir)
    service = AnalysisService(ctx.settings)
    if args.grid or (not store.exists() and store.sub_campaigns()):
        report = service.analyze_grid(store, args.bins, args.raw_cycles)
    elif store.exists():
        report = service.analyze(store, args.bins, args.raw_cycles).breakdown
    else:
        raise MissingRecords(f"{args.dir} is not a campaign directory")
    print_table(ctx.console, f"Outcome breakdown ({args.dir})",
                ["benchmark", "location", "faults", "benign %", "sdc %", "other %"],
                breakdown_rows(report))
    return 0
