"""``campaign``: run one campaign (or the full grid) and persist it."""

from __future__ import annotations

import argparse
import json
import logging
from pathlib import Path
from typing import Any

from app.console import print_table
from app.errors import LabError, StorageError
from app.models.schemas import CampaignConfig, CampaignSummary, LocationClass, TriggerMode
from app.services.analysis_service import largest_remainder
from app.services.campaign_service import CampaignService, run_grid
from app.services.storage_service import CampaignStore

logger = logging.getLogger("softerr.cli")

# flag dest -> CampaignConfig field
FLAG_FIELDS = {
    "benchmark": "benchmark",
    "location": "location_class",
    "seed": "seed",
    "faults": "num_faults",
    "events": "events",
    "hpc": "hpc_slots",
    "timeout_mult": "timeout_multiplier",
    "trigger_mode": "trigger_sampling",
    "fault_model": "fault_model",
}


class UsageError(LabError):
    pass


def register(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("campaign", help="Run a fault-injection campaign")
    p.add_argument("config", nargs="?", type=Path, help="Campaign config JSON (fields of CampaignConfig)")
    p.add_argument("--out", type=Path, default=None, help="Campaign directory (grid: root directory)")
    p.add_argument("--benchmark", default=None)
    p.add_argument("--location", choices=[c.value for c in LocationClass], default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--faults", type=int, default=None, help="Number of faults to inject")
    p.add_argument("--events", default=None, help="Comma-separated event names (default: full catalog)")
    p.add_argument("--hpc", type=int, default=None, help="Counter slots in the PMU bank")
    p.add_argument("--timeout-mult", type=float, default=None, help="Cycle budget as a multiple of golden")
    p.add_argument("--jobs", type=int, default=None, help="Worker processes")
    p.add_argument("--grid", action="store_true", help="Run every benchmark x location campaign")
    p.add_argument("--trigger-mode", choices=[m.value for m in TriggerMode], default=None)
    p.add_argument("--fault-model", default=None, help="SBU or MBU(k)")
    p.set_defaults(handler=run)


def build_config(args: argparse.Namespace, settings) -> CampaignConfig:
    """Settings defaults, overridden by the config file, overridden by flags."""
    data: dict[str, Any] = {
        "hpc_slots": settings.hpc_slots,
        "timeout_multiplier": settings.timeout_multiplier,
        "mem_size": settings.mem_size,
        "stack_size": settings.stack_size,
    }
    if args.config is not None:
        try:
            data.update(json.loads(args.config.read_text(encoding="utf-8")))
        except OSError as e:
            raise StorageError(f"cannot read {args.config}: {e}") from e
        except json.JSONDecodeError as e:
            raise UsageError(f"{args.config} is not valid JSON: {e}") from e
    for flag, name in FLAG_FIELDS.items():
        value = getattr(args, flag)
        if value is not None:
            data[name] = value
    if args.grid:
        data.setdefault("benchmark", "qsort")
        data.setdefault("location_class", LocationClass.REGISTERS.value)
    missing = [f for f in ("benchmark", "location_class", "num_faults") if f not in data]
    if missing:
        raise UsageError(f"missing campaign parameters: {', '.join(missing)}")
    return CampaignConfig.model_validate(data)


def summary_rows(summaries: list[CampaignSummary]) -> list[tuple]:
    rows = []
    for s in summaries:
        pct = [p / 10 for p in largest_remainder([s.benign, s.sdc, s.other])] if s.faults else [0.0] * 3
        rows.append((
            s.benchmark, s.location.value, s.faults, s.executions,
            f"{s.mean_fault_ms:.2f}", f"{pct[0]:.1f}", f"{pct[1]:.1f}", f"{pct[2]:.1f}",
        ))
    return rows


SUMMARY_COLUMNS = ["benchmark", "location", "faults", "executions", "mean ms/fault",
                   "benign %", "sdc %", "other %"]


def run(args: argparse.Namespace, ctx) -> int:
    settings = ctx.settings
    config = build_config(args, settings)
    jobs = args.jobs or settings.jobs
    service = CampaignService(settings)

    if args.grid:
        out = args.out or settings.out_dir
        reports = run_grid(config, out, jobs=jobs, service=service)
    else:
        out = args.out or settings.out_dir / f"{config.benchmark}-{config.location_class.value}"
        reports = [service.run_campaign(config, jobs=jobs)]
        CampaignStore(out).save(reports[0])

    print_table(ctx.console, f"Campaign summary ({out})", SUMMARY_COLUMNS,
                summary_rows([r.summary for r in reports]))
    return 0
