"""``report``: summary table from persisted campaign files."""

from __future__ import annotations

import argparse
from pathlib import Path

from app.console import print_table
from app.errors import MissingRecords
from app.services.storage_service import CampaignStore

from .campaign import SUMMARY_COLUMNS, summary_rows


def register(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("report", help="Print the campaign summary table")
    p.add_argument("dir", type=Path, help="Campaign directory (or grid root)")
    p.set_defaults(handler=run)


def run(args: argparse.Namespace, ctx) -> int:
    root = CampaignStore(args.dir)
    stores = [root] if root.exists() else root.sub_campaigns()
    if not stores:
        raise MissingRecords(f"{args.dir} holds no campaign")
    summaries = [s.load_summary() for s in stores]
    print_table(ctx.console, f"Campaign report ({args.dir})", SUMMARY_COLUMNS, summary_rows(summaries))
    return 0
