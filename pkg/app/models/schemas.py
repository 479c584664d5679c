"""Data models for the fault-injection lab.

Hot-path machine structures live next to the emulator as slotted
dataclasses; everything that is configured, persisted, or exchanged between
the campaign engine, the analysis pipeline and the CLI is defined here.
"""

from __future__ import annotations

import re
from enum import Enum, IntEnum
from typing import Any, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_serializer, field_validator, model_validator


# ── Enums ─────────────────────────────────────────────────────────────────────

class EventKind(IntEnum):
    """PMU event catalog. The numeric ids are the serialized ids and never change."""
    CYCLES = 0
    INSTR_RETIRED = 1
    MEM_READ = 2
    MEM_WRITE = 3
    L1D_HIT = 4
    L1D_MISS = 5
    BR_EXEC = 6
    BR_TAKEN = 7
    BR_MISPRED = 8
    JUMP_EXEC = 9
    ALU_OPS = 10
    TRAPS = 11


CATALOG: tuple[EventKind, ...] = tuple(EventKind)


class TrapKind(str, Enum):
    ILLEGAL_OPCODE = "illegal_opcode"
    FETCH_OUT_OF_BOUNDS = "fetch_out_of_bounds"
    MEM_OUT_OF_BOUNDS = "mem_out_of_bounds"
    MISALIGNED_ACCESS = "misaligned_access"


class StopKind(str, Enum):
    BREAKPOINT = "breakpoint"
    HALTED = "halted"
    TRAPPED = "trapped"
    BUDGET_EXCEEDED = "budget_exceeded"


class LocationClass(str, Enum):
    REGISTERS = "registers"
    PC = "pc"
    MEMORY = "memory"


class TriggerMode(str, Enum):
    DYNAMIC_TRACE = "dynamic"
    STATIC_CODE_SPACE = "static"


class OutcomeClass(str, Enum):
    BENIGN = "benign"
    SDC = "sdc"
    OTHER = "other"


class OutcomeReason(str, Enum):
    """Why a run landed in the Other class."""
    TIMEOUT = "timeout"
    ILLEGAL_OPCODE = "illegal_opcode"
    FETCH_OUT_OF_BOUNDS = "fetch_out_of_bounds"
    MEM_OUT_OF_BOUNDS = "mem_out_of_bounds"
    MISALIGNED_ACCESS = "misaligned_access"
    ILLEGAL_FLOW = "illegal_flow"  # HALT reached without passing the final breakpoint


def parse_event(value: Any) -> EventKind:
    if isinstance(value, EventKind):
        return value
    if isinstance(value, int):
        return EventKind(value)
    try:
        return EventKind[str(value).strip().upper()]
    except KeyError:
        raise ValueError(f"unknown event {value!r}; catalog: {[e.name for e in CATALOG]}")


# ── Fault models ──────────────────────────────────────────────────────────────

_MBU_RE = re.compile(r"^\s*mbu\s*\(\s*(\d+)\s*\)\s*$", re.IGNORECASE)


class FaultModel(BaseModel):
    """SBU flips one bit; MBU(k) flips k adjacent bits (wrapping at bit 31)."""
    model_config = ConfigDict(frozen=True)

    kind: Literal["sbu", "mbu"] = "sbu"
    bits: int = Field(1, ge=1, le=32)

    @model_validator(mode="before")
    @classmethod
    def _from_shorthand(cls, data: Any) -> Any:
        if isinstance(data, str):
            if data.strip().lower() == "sbu":
                return {"kind": "sbu", "bits": 1}
            m = _MBU_RE.match(data)
            if not m:
                raise ValueError(f"fault model must be 'SBU' or 'MBU(k)', got {data!r}")
            return {"kind": "mbu", "bits": int(m.group(1))}
        return data

    @model_validator(mode="after")
    def _check_width(self) -> "FaultModel":
        if self.kind == "sbu" and self.bits != 1:
            raise ValueError("SBU flips exactly one bit")
        return self

    def __str__(self) -> str:
        return "SBU" if self.kind == "sbu" else f"MBU({self.bits})"


class FaultTarget(BaseModel):
    """Where to flip: a register, the program counter, or an aligned memory word."""
    model_config = ConfigDict(frozen=True)

    location: LocationClass
    index: Optional[int] = Field(
        None, description="Register index (registers) or byte address of the word (memory)"
    )
    bits: tuple[int, ...]

    @model_validator(mode="after")
    def _check(self) -> "FaultTarget":
        if not self.bits:
            raise ValueError("a fault flips at least one bit")
        if len(set(self.bits)) != len(self.bits):
            raise ValueError(f"bit indices must be distinct: {self.bits}")
        if any(not 0 <= b <= 31 for b in self.bits):
            raise ValueError(f"bit indices must be in 0..31: {self.bits}")
        if self.location == LocationClass.REGISTERS:
            if self.index is None or not 0 <= self.index < 16:
                raise ValueError(f"register index must be 0..15, got {self.index}")
        elif self.location == LocationClass.MEMORY:
            if self.index is None or self.index < 0 or self.index % 4:
                raise ValueError(f"memory target must be a 4-byte aligned address, got {self.index}")
        elif self.index is not None:
            raise ValueError("program-counter targets carry no index")
        return self

    @property
    def mask(self) -> int:
        m = 0
        for b in self.bits:
            m |= 1 << b
        return m

    def describe(self) -> str:
        bits = ",".join(str(b) for b in self.bits)
        if self.location == LocationClass.REGISTERS:
            return f"R{self.index}[{bits}]"
        if self.location == LocationClass.PC:
            return f"PC[{bits}]"
        return f"mem[0x{self.index:08x}][{bits}]"


class Fault(BaseModel):
    """One injection tuple: what to flip and the code address that triggers it."""
    model_config = ConfigDict(frozen=True)

    id: int = Field(..., ge=0)
    target: FaultTarget
    trigger: int = Field(..., ge=0)
    benchmark: str

    @field_validator("trigger")
    @classmethod
    def _aligned(cls, v: int) -> int:
        if v % 4:
            raise ValueError(f"trigger 0x{v:x} is not 4-byte aligned")
        return v


# ── Config ────────────────────────────────────────────────────────────────────

class CampaignConfig(BaseModel):
    """One campaign: benchmark × location class, drawn from a seed."""
    benchmark: str
    location_class: LocationClass
    num_faults: int = Field(..., ge=1)
    seed: int = Field(0, ge=0, lt=1 << 64)
    events: list[EventKind] = Field(
        default_factory=lambda: list(CATALOG),
        description="Ordered events to collect; slot rotation chunks this list by hpc_slots",
    )
    hpc_slots: int = Field(6, ge=1)
    timeout_multiplier: float = Field(10.0, gt=1.0)
    fault_model: FaultModel = Field(default_factory=FaultModel)
    trigger_sampling: TriggerMode = TriggerMode.DYNAMIC_TRACE
    mem_size: int = Field(1 << 20, gt=0)
    stack_size: int = Field(4096, ge=4)

    @field_validator("events", mode="before")
    @classmethod
    def _parse_events(cls, v: Any) -> Any:
        if isinstance(v, str):
            v = [s for s in v.split(",") if s.strip()]
        return [parse_event(e) for e in v]

    @field_validator("events")
    @classmethod
    def _unique_events(cls, v: list[EventKind]) -> list[EventKind]:
        if not v:
            raise ValueError("at least one event must be collected")
        if len(set(v)) != len(v):
            raise ValueError("events must not repeat")
        return v

    @field_serializer("events")
    def _events_by_name(self, v: list[EventKind]) -> list[str]:
        return [e.name for e in v]

    @field_serializer("fault_model")
    def _fault_model_short(self, v: FaultModel) -> str:
        return str(v)


# ── Golden + records ──────────────────────────────────────────────────────────

class GoldenReference(BaseModel):
    """Fault-free reference for one benchmark."""
    benchmark: str
    final_bp: int = Field(..., description="Address of the final breakpoint")
    output_hex: str
    output_digest: str
    golden_cycles: int
    events: dict[str, int]
    dynamic_trace: list[int] = Field(default_factory=list, description="Sorted executed code addresses")
    repetitions: int = 1

    @property
    def output(self) -> bytes:
        return bytes.fromhex(self.output_hex)


class RepetitionResult(BaseModel):
    """One execution of one fault under one slot assignment."""
    slots: list[str]
    stop: StopKind
    stop_addr: Optional[int] = None
    trap: Optional[TrapKind] = None
    cycles: int
    output_digest: str
    injected: bool
    old_value: Optional[int] = None
    new_value: Optional[int] = None
    counts: dict[str, int]


class CampaignRecord(BaseModel):
    fault: Fault
    outcome: OutcomeClass
    reason: Optional[OutcomeReason] = None
    injected: bool
    old_value: Optional[int] = None
    new_value: Optional[int] = None
    events: dict[str, int]
    events_complete: bool
    repeatable: bool = True
    output_digest: str
    cycles: int
    repetitions: list[RepetitionResult]


class FaultTiming(BaseModel):
    fault_id: int
    wall_ms: float


class CampaignManifest(BaseModel):
    tool_version: str
    config: CampaignConfig
    seed: int
    catalog: dict[str, int]
    slot_rotation: list[list[str]]
    repetitions_per_fault: int
    golden_digest: str
    golden_cycles: int
    num_records: int = 0


class CampaignSummary(BaseModel):
    """Outcome totals and timing for one campaign."""
    benchmark: str
    location: LocationClass
    faults: int
    executions: int
    golden_executions: int
    mean_fault_ms: float
    total_ms: float
    benign: int
    sdc: int
    other: int


# ── Analysis ─────────────────────────────────────────────────────────────────

class CycleStats(BaseModel):
    outcome: OutcomeClass
    count: int
    mean: Optional[float] = None
    std: Optional[float] = None


class BreakdownRow(BaseModel):
    benchmark: str
    location: LocationClass
    total: int
    benign_pct: float
    sdc_pct: float
    other_pct: float
    cycle_stats: list[CycleStats] = Field(default_factory=list)


class BreakdownReport(BaseModel):
    rows: list[BreakdownRow]
