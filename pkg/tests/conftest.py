from __future__ import annotations

from pathlib import Path
from typing import Callable, Optional

import pytest

from app.benchmarks.builder import BenchmarkSpec, build_benchmark
from app.config import LabSettings
from app.models.schemas import (
    CATALOG,
    CampaignConfig,
    CampaignRecord,
    Fault,
    FaultTarget,
    GoldenReference,
    LocationClass,
    OutcomeClass,
    OutcomeReason,
)
from app.services.campaign_service import CampaignService
from app.vm.assembler import assemble
from app.vm.machine import MachineState, StopReason, load_program, run_until

SMALL_MEM = 1 << 16


@pytest.fixture(scope="session")
def settings() -> LabSettings:
    return LabSettings(mem_size=1 << 20, stack_size=4096, hpc_slots=6, progress_every=1000)


@pytest.fixture(scope="session")
def service(settings: LabSettings) -> CampaignService:
    return CampaignService(settings)


def make_config(benchmark: str = "qsort", location: LocationClass = LocationClass.REGISTERS,
                **overrides) -> CampaignConfig:
    data = {"benchmark": benchmark, "location_class": location, "num_faults": 10, "seed": 1}
    data.update(overrides)
    return CampaignConfig.model_validate(data)


@pytest.fixture(scope="session")
def goldens(service: CampaignService) -> Callable[[str], GoldenReference]:
    cache: dict[str, GoldenReference] = {}

    def get(name: str) -> GoldenReference:
        if name not in cache:
            cache[name] = service.golden_run(build_benchmark(name), make_config(name))
        return cache[name]

    return get


def run_source(source: str, mem_size: int = SMALL_MEM, budget: float = 1_000_000,
               breakpoints=frozenset()) -> tuple[MachineState, StopReason]:
    state = load_program(assemble(source), mem_size)
    return state, run_until(state, breakpoints, budget)


def tiny_benchmark(name: str, source: str, expected: bytes) -> BenchmarkSpec:
    return BenchmarkSpec(name=name, image=assemble(source), expected_output=expected,
                         source_path=Path(f"{name}.s"))


def make_record(
    fid: int,
    outcome: OutcomeClass,
    events: Optional[dict[str, int]] = None,
    cycles: int = 100,
    benchmark: str = "qsort",
    location: LocationClass = LocationClass.REGISTERS,
    complete: bool = True,
) -> CampaignRecord:
    if events is None:
        events = {e.name: fid + int(e) for e in CATALOG}
    if location is LocationClass.REGISTERS:
        target = FaultTarget(location=location, index=1, bits=(0,))
    elif location is LocationClass.PC:
        target = FaultTarget(location=location, bits=(0,))
    else:
        target = FaultTarget(location=location, index=0x100, bits=(0,))
    return CampaignRecord(
        fault=Fault(id=fid, target=target, trigger=0, benchmark=benchmark),
        outcome=outcome,
        reason=OutcomeReason.TIMEOUT if outcome is OutcomeClass.OTHER else None,
        injected=True,
        events=events,
        events_complete=complete,
        output_digest="0" * 64,
        cycles=cycles,
        repetitions=[],
    )
