"""Campaign directory layout.

One directory per campaign::

    manifest.json    config echo, seed, catalog ids, slot rotation, golden digest
    golden.json      fault-free reference
    faults.csv       the drawn fault list
    records.jsonl    one CampaignRecord per line, ordered by fault id
    timing.jsonl     per-fault wall time (kept apart so records stay byte-stable)
    summary.json     outcome totals and percentages
    *.csv            analysis outputs

A grid run nests one such directory per ``<benchmark>-<location>`` below a
common root.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Optional, TypeVar

import pandas as pd
from pydantic import BaseModel, ValidationError

from app.errors import CorruptRecords, MissingRecords, StorageError
from app.models.schemas import (
    CampaignManifest,
    CampaignRecord,
    CampaignSummary,
    Fault,
    FaultTiming,
    GoldenReference,
)

if TYPE_CHECKING:
    from app.services.campaign_service import CampaignReport

logger = logging.getLogger("softerr.storage")

MANIFEST = "manifest.json"
GOLDEN = "golden.json"
FAULTS = "faults.csv"
RECORDS = "records.jsonl"
TIMING = "timing.jsonl"
SUMMARY = "summary.json"

FAULT_COLUMNS = ["fault_id", "location_class", "target_index_or_address", "bits", "trigger"]

M = TypeVar("M", bound=BaseModel)


def fault_rows(faults: Iterable[Fault]) -> pd.DataFrame:
    rows = [
        {
            "fault_id": f.id,
            "location_class": f.target.location.value,
            "target_index_or_address": "" if f.target.index is None else f"0x{f.target.index:x}",
            "bits": ";".join(str(b) for b in f.target.bits),
            "trigger": f"0x{f.trigger:x}",
        }
        for f in faults
    ]
    return pd.DataFrame(rows, columns=FAULT_COLUMNS)


class CampaignStore:
    def __init__(self, root: Path | str) -> None:
        self.root = Path(root)

    def path(self, name: str) -> Path:
        return self.root / name

    def exists(self) -> bool:
        return self.path(MANIFEST).is_file()

    # ── Writing ──────────────────────────────────────────────────────────

    def save(self, report: "CampaignReport") -> Path:
        """Persist every artifact of a finished campaign."""
        self._ensure_root()
        self._write_model(MANIFEST, report.manifest)
        self._write_model(GOLDEN, report.golden)
        self._write_model(SUMMARY, report.summary)
        self.write_csv(FAULTS, fault_rows(report.faults))
        self._write_lines(RECORDS, (r.model_dump_json() for r in report.records))
        self._write_lines(TIMING, (t.model_dump_json() for t in report.timings))
        logger.info("campaign written to %s (%d records)", self.root, len(report.records))
        return self.root

    def save_golden(self, golden: GoldenReference, path: Optional[Path] = None) -> Path:
        target = path or self.path(GOLDEN)
        self._write_text(target, golden.model_dump_json(indent=2) + "\n")
        return target

    def write_csv(self, name: str, frame: pd.DataFrame) -> Path:
        self._ensure_root()
        target = self.path(name)
        try:
            frame.to_csv(target, index=False, lineterminator="\n")
        except OSError as e:
            raise StorageError(f"cannot write {target}: {e}") from e
        logger.debug("wrote %s (%d rows)", target, len(frame))
        return target

    # ── Reading ──────────────────────────────────────────────────────────

    def load_manifest(self) -> CampaignManifest:
        return self._read_model(MANIFEST, CampaignManifest)

    def load_golden(self) -> GoldenReference:
        return self._read_model(GOLDEN, GoldenReference)

    def load_summary(self) -> CampaignSummary:
        return self._read_model(SUMMARY, CampaignSummary)

    def load_records(self) -> list[CampaignRecord]:
        return self._read_lines(RECORDS, CampaignRecord)

    def load_timing(self) -> list[FaultTiming]:
        if not self.path(TIMING).is_file():
            return []
        return self._read_lines(TIMING, FaultTiming)

    def load_faults(self) -> pd.DataFrame:
        target = self.path(FAULTS)
        if not target.is_file():
            raise MissingRecords(f"{target} not found")
        return pd.read_csv(target, dtype=str, keep_default_na=False)

    def sub_campaigns(self) -> list["CampaignStore"]:
        """Campaign directories directly below this one (grid layout), sorted by name."""
        if not self.root.is_dir():
            return []
        return [
            CampaignStore(p) for p in sorted(self.root.iterdir())
            if p.is_dir() and (p / MANIFEST).is_file()
        ]

    # ── Internals ────────────────────────────────────────────────────────

    def _ensure_root(self) -> None:
        try:
            self.root.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise StorageError(f"cannot create {self.root}: {e}") from e

    def _write_text(self, target: Path, text: str) -> None:
        try:
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_text(text, encoding="utf-8", newline="\n")
        except OSError as e:
            raise StorageError(f"cannot write {target}: {e}") from e

    def _write_model(self, name: str, model: BaseModel) -> None:
        self._write_text(self.path(name), model.model_dump_json(indent=2) + "\n")

    def _write_lines(self, name: str, lines: Iterable[str]) -> None:
        self._write_text(self.path(name), "".join(line + "\n" for line in lines))

    def _read_text(self, name: str) -> str:
        target = self.path(name)
        if not target.is_file():
            raise MissingRecords(f"{target} not found")
        try:
            return target.read_text(encoding="utf-8")
        except OSError as e:
            raise StorageError(f"cannot read {target}: {e}") from e

    def _read_model(self, name: str, model: type[M]) -> M:
        try:
            return model.model_validate_json(self._read_text(name))
        except ValidationError as e:
            raise CorruptRecords(f"{self.path(name)}: {e.error_count()} validation error(s)") from e

    def _read_lines(self, name: str, model: type[M]) -> list[M]:
        out = []
        for lineno, line in enumerate(self._read_text(name).splitlines(), 1):
            if not line.strip():
                continue
            try:
                out.append(model.model_validate_json(line))
            except (ValidationError, json.JSONDecodeError) as e:
                raise CorruptRecords(f"{self.path(name)} line {lineno}: {e}") from e
        return out
