"""Process-wide defaults, overridable through ``SOFTERR_*`` environment variables."""

from __future__ import annotations

from functools import lru_cache
from pathlib import Path

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class LabSettings(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="SOFTERR_", extra="ignore")

    mem_size: int = Field(1 << 20, description="Target memory size in bytes")
    stack_size: int = Field(4096, description="Bytes at the top of memory reserved for the stack")
    hpc_slots: int = Field(6, ge=1, description="Hardware performance counters in the PMU bank")
    timeout_multiplier: float = Field(10.0, gt=1.0)
    golden_budget: int = Field(
        50_000_000, description="Cycle budget for fault-free runs (golden, run command)"
    )
    jobs: int = Field(1, ge=1)
    out_dir: Path = Path("campaigns")
    log_level: str = "INFO"
    hist_bins: int = Field(20, ge=1)
    progress_every: int = Field(100, ge=1, description="Log campaign progress every N faults")


@lru_cache(maxsize=1)
def get_settings() -> LabSettings:
    return LabSettings()
