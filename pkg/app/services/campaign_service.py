"""Fault-injection campaign engine.

Flow of one campaign: golden run (multiplexed over the PMU bank) -> seeded
fault list -> for every fault, one faulty execution per slot assignment ->
merge the per-repetition counter readings into one event vector -> classify
the fault once. Machine traps and hangs are outcomes, never exceptions; only
a broken golden run aborts a campaign.
"""

from __future__ import annotations

import hashlib
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from app import __version__
from app.benchmarks.builder import BenchmarkSpec, build_benchmark, list_benchmarks
from app.config import LabSettings, get_settings
from app.debug.port import DebugSession, FlipResult
from app.errors import (
    CampaignError,
    EmptyTrace,
    GoldenMismatch,
    GoldenTimeout,
    GoldenTrapped,
    GoldenUnstable,
)
from app.models.schemas import (
    CATALOG,
    CampaignConfig,
    CampaignManifest,
    CampaignRecord,
    CampaignSummary,
    EventKind,
    Fault,
    FaultModel,
    FaultTarget,
    FaultTiming,
    GoldenReference,
    LocationClass,
    OutcomeClass,
    OutcomeReason,
    RepetitionResult,
    StopKind,
    TriggerMode,
)
from app.services.storage_service import CampaignStore
from app.uarch.pmu import EventVector, OracleObserver
from app.vm.assembler import ProgramImage
from app.vm.machine import StopReason, read_output

logger = logging.getLogger("softerr.campaign")


class Outcome(NamedTuple):
    kind: OutcomeClass
    reason: Optional[OutcomeReason] = None


@dataclass
class CampaignReport:
    manifest: CampaignManifest
    golden: GoldenReference
    faults: list[Fault]
    records: list[CampaignRecord]
    timings: list[FaultTiming]
    summary: CampaignSummary


@dataclass
class _Execution:
    stop: StopReason
    flip: Optional[FlipResult]
    output: bytes
    cycles: int
    counts: dict[str, int] = field(default_factory=dict)


# ── Pure helpers ──────────────────────────────────────────────────────────────

def required_repetitions(num_events: int, num_slots: int) -> int:
    """Executions needed to cover ``num_events`` with ``num_slots`` counters."""
    if num_events < 1 or num_slots < 1:
        raise ValueError("need at least one event and one counter slot")
    return math.ceil(num_events / num_slots)


def slot_rotation(events: Sequence[EventKind], num_slots: int) -> list[list[EventKind]]:
    """Configured events chunked by bank size, in configuration order."""
    return [list(events[i:i + num_slots]) for i in range(0, len(events), num_slots)]


def output_digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def classify(output: bytes, stop: StopReason, golden: GoldenReference) -> Outcome:
    """Benign / SDC at the final breakpoint, Other for traps, hangs and stray halts."""
    if stop.kind is StopKind.BREAKPOINT and stop.addr == golden.final_bp:
        if output == golden.output:
            return Outcome(OutcomeClass.BENIGN)
        return Outcome(OutcomeClass.SDC)
    if stop.kind is StopKind.TRAPPED:
        return Outcome(OutcomeClass.OTHER, OutcomeReason(stop.trap.value))
    if stop.kind is StopKind.BUDGET_EXCEEDED:
        return Outcome(OutcomeClass.OTHER, OutcomeReason.TIMEOUT)
    return Outcome(OutcomeClass.OTHER, OutcomeReason.ILLEGAL_FLOW)


def memory_word_pool(ranges: Sequence[tuple[int, int]]) -> list[range]:
    """Aligned word addresses covered by (start, length) ranges."""
    pool = []
    for start, length in ranges:
        first = (start + 3) & ~3
        last = start + length - 4
        if last >= first:
            pool.append(range(first, last + 1, 4))
    return pool


def injectable_ranges(image: ProgramImage, mem_size: int, stack_size: int) -> list[tuple[int, int]]:
    stack = min(stack_size, mem_size)
    return [*image.footprint, (mem_size - stack, stack)]


def _draw_bits(rng: np.random.Generator, model: FaultModel) -> tuple[int, ...]:
    start = int(rng.integers(0, 32))
    return tuple((start + j) % 32 for j in range(model.bits))


def generate_fault_list(
    config: CampaignConfig, golden: GoldenReference, image: ProgramImage
) -> list[Fault]:
    """Draw ``num_faults`` injection tuples from a PCG64 stream seeded with ``config.seed``.

    Per fault the draws happen in a fixed order (target, bits, trigger), so a
    (config, seed) pair always yields the same list.
    """
    if config.trigger_sampling is TriggerMode.DYNAMIC_TRACE:
        triggers = list(golden.dynamic_trace)
    else:
        triggers = list(image.code_addresses())
    if not triggers:
        raise EmptyTrace(f"no trigger addresses for {config.benchmark}")

    words = memory_word_pool(injectable_ranges(image, config.mem_size, config.stack_size))
    total_words = sum(len(r) for r in words)

    rng = np.random.default_rng(config.seed)
    faults = []
    for fid in range(config.num_faults):
        if config.location_class is LocationClass.REGISTERS:
            index: Optional[int] = int(rng.integers(0, 16))
        elif config.location_class is LocationClass.PC:
            index = None
        else:
            pick = int(rng.integers(0, total_words))
            for r in words:
                if pick < len(r):
                    index = r[pick]
                    break
                pick -= len(r)
        bits = _draw_bits(rng, config.fault_model)
        trigger = triggers[int(rng.integers(0, len(triggers)))]
        faults.append(Fault(
            id=fid,
            target=FaultTarget(location=config.location_class, index=index, bits=bits),
            trigger=trigger,
            benchmark=config.benchmark,
        ))
    return faults


def grid_configs(base: CampaignConfig, benchmarks: Sequence[str]) -> list[CampaignConfig]:
    """The benchmark x location grid, every campaign sharing the base parameters."""
    return [
        base.model_copy(update={"benchmark": b, "location_class": loc})
        for b in benchmarks
        for loc in LocationClass
    ]


# ── Engine ────────────────────────────────────────────────────────────────────

class CampaignService:
    def __init__(self, settings: Optional[LabSettings] = None) -> None:
        self.settings = settings or get_settings()

    # ── Sessions ──────────────────────────────────────────────────────────

    def _session(
        self, bench: BenchmarkSpec, config: CampaignConfig, slots: Sequence[EventKind],
        record_trace: bool = False,
    ) -> DebugSession:
        session = DebugSession(
            bench.image, config.mem_size, config.stack_size, config.hpc_slots,
            record_trace=record_trace,
        )
        for slot, event in enumerate(slots):
            session.configure_pmu(slot, event)
        session.set_breakpoint(bench.final_bp)
        return session

    @staticmethod
    def _budget(golden: GoldenReference, config: CampaignConfig) -> int:
        return math.ceil(golden.golden_cycles * config.timeout_multiplier)

    # ── Golden ────────────────────────────────────────────────────────────

    def golden_run(self, bench: BenchmarkSpec, config: CampaignConfig) -> GoldenReference:
        """Fault-free reference, measured with the same slot rotation as the faults."""
        rotation = slot_rotation(config.events, config.hpc_slots)
        merged = EventVector()
        output: Optional[bytes] = None
        cycles: Optional[int] = None
        trace: list[int] = []
        for i, slots in enumerate(rotation):
            session = self._session(bench, config, slots, record_trace=(i == 0))
            stop = session.run(self.settings.golden_budget)
            if stop.kind is StopKind.BUDGET_EXCEEDED:
                raise GoldenTimeout(
                    f"{bench.name}: golden run exceeded {self.settings.golden_budget} cycles"
                )
            if stop.kind is not StopKind.BREAKPOINT or stop.addr != bench.final_bp:
                raise GoldenTrapped(f"{bench.name}: golden run stopped with {stop}")
            run_output = read_output(session.state)
            if output is None:
                output, cycles = run_output, session.state.cycle
                trace = sorted(a for a in session.state.trace or () if bench.image.in_code(a))
            elif run_output != output or session.state.cycle != cycles:
                raise GoldenUnstable(f"{bench.name}: golden repetitions disagree")
            merged = merged.merge({e: session.read_pmu(s) for s, e in enumerate(slots)})

        if output != bench.expected_output:
            raise GoldenMismatch(f"{bench.name}: golden output differs from the reference")
        broken = merged.check_identities()
        if broken:
            raise GoldenUnstable(f"{bench.name}: golden event identities violated: {broken}")
        logger.info(
            "golden %s: %d cycles, %d output bytes, %d traced addresses, %d repetition(s)",
            bench.name, cycles, len(output), len(trace), len(rotation),
        )
        return GoldenReference(
            benchmark=bench.name,
            final_bp=bench.final_bp,
            output_hex=output.hex(),
            output_digest=output_digest(output),
            golden_cycles=cycles,
            events=merged.to_dict(),
            dynamic_trace=trace,
            repetitions=len(rotation),
        )

    # ── One execution ─────────────────────────────────────────────────────

    def _execute(self, session: DebugSession, fault: Fault, bench: BenchmarkSpec, budget: int) -> _Execution:
        arm = fault.trigger != bench.final_bp and bench.image.in_code(fault.trigger)
        if arm:
            session.set_breakpoint(fault.trigger)
        flip = None
        stop = session.run(budget)
        if arm and stop.kind is StopKind.BREAKPOINT and stop.addr == fault.trigger:
            flip = session.flip_bits(fault.target)
            session.remove_breakpoint(fault.trigger)
            stop = session.run(budget)
        return _Execution(stop, flip, read_output(session.state), session.state.cycle)

    def inject_and_run(
        self,
        fault: Fault,
        bench: BenchmarkSpec,
        slot_events: Sequence[EventKind],
        golden: GoldenReference,
        config: CampaignConfig,
    ) -> _Execution:
        """One faulty execution with ``slot_events`` programmed into the bank."""
        if len(slot_events) > config.hpc_slots:
            raise CampaignError(f"{len(slot_events)} events do not fit {config.hpc_slots} counters")
        session = self._session(bench, config, slot_events)
        result = self._execute(session, fault, bench, self._budget(golden, config))
        result.counts = {e.name: session.read_pmu(s) for s, e in enumerate(slot_events)}
        return result

    def run_fault(
        self, fault: Fault, bench: BenchmarkSpec, golden: GoldenReference, config: CampaignConfig
    ) -> tuple[CampaignRecord, float]:
        started = time.perf_counter()
        reps: list[RepetitionResult] = []
        executions: list[_Execution] = []
        merged = EventVector()
        for slots in slot_rotation(config.events, config.hpc_slots):
            ex = self.inject_and_run(fault, bench, slots, golden, config)
            executions.append(ex)
            merged = merged.merge(ex.counts)
            reps.append(RepetitionResult(
                slots=[e.name for e in slots],
                stop=ex.stop.kind,
                stop_addr=ex.stop.addr,
                trap=ex.stop.trap,
                cycles=ex.cycles,
                output_digest=output_digest(ex.output),
                injected=ex.flip is not None,
                old_value=ex.flip.old if ex.flip else None,
                new_value=ex.flip.new if ex.flip else None,
                counts=ex.counts,
            ))

        first = executions[0]
        repeatable = all(
            r.stop == reps[0].stop and r.stop_addr == reps[0].stop_addr and r.trap == reps[0].trap
            and r.cycles == reps[0].cycles and r.output_digest == reps[0].output_digest
            and r.injected == reps[0].injected
            for r in reps
        )
        if not repeatable:
            logger.warning("fault %d: repetitions disagree (%s)", fault.id, [str(e.stop) for e in executions])

        outcome = classify(first.output, first.stop, golden)
        reached_final = outcome.kind is not OutcomeClass.OTHER
        record = CampaignRecord(
            fault=fault,
            outcome=outcome.kind,
            reason=outcome.reason,
            injected=first.flip is not None,
            old_value=first.flip.old if first.flip else None,
            new_value=first.flip.new if first.flip else None,
            events=merged.to_dict(),
            events_complete=reached_final and len(merged) == len(config.events),
            repeatable=repeatable,
            output_digest=reps[0].output_digest,
            cycles=first.cycles,
            repetitions=reps,
        )
        wall_ms = (time.perf_counter() - started) * 1000.0
        logger.debug(
            "fault %d %s @0x%x -> %s%s (%.1f ms)", fault.id, fault.target.describe(), fault.trigger,
            outcome.kind.value, f"/{outcome.reason.value}" if outcome.reason else "", wall_ms,
        )
        return record, wall_ms

    def verify_multiplexing(
        self, fault: Fault, bench: BenchmarkSpec, golden: GoldenReference, config: CampaignConfig
    ) -> tuple[EventVector, EventVector]:
        """(assembled multiplexed vector, single-run oracle vector) for one fault."""
        record, _ = self.run_fault(fault, bench, golden, config)
        session = self._session(bench, config, slot_rotation(config.events, config.hpc_slots)[0])
        oracle = session.state.attach(OracleObserver())
        self._execute(session, fault, bench, self._budget(golden, config))
        wanted = set(config.events)
        full = oracle.snapshot()
        return EventVector(record.events), EventVector({e: full[e] for e in full if e in wanted})

    # ── Campaign ──────────────────────────────────────────────────────────

    def run_campaign(
        self,
        config: CampaignConfig,
        jobs: int = 1,
        on_progress: Optional[Callable[[int, int], None]] = None,
    ) -> CampaignReport:
        bench = build_benchmark(config.benchmark)
        started = time.perf_counter()
        golden = self.golden_run(bench, config)
        faults = generate_fault_list(config, golden, bench.image)
        rotation = slot_rotation(config.events, config.hpc_slots)
        logger.info(
            "campaign %s/%s: %d faults x %d repetition(s), seed %d, %d job(s)",
            config.benchmark, config.location_class.value, len(faults), len(rotation), config.seed, jobs,
        )

        results: list[tuple[CampaignRecord, float]] = []
        if jobs <= 1:
            for fault in faults:
                results.append(self.run_fault(fault, bench, golden, config))
                self._progress(len(results), len(faults), on_progress)
        else:
            chunks = [faults[i::jobs * 4] for i in range(jobs * 4)]
            payloads = [
                (config.model_dump_json(), golden.model_dump_json(),
                 [f.model_dump_json() for f in chunk], self.settings.model_dump(mode="json"))
                for chunk in chunks if chunk
            ]
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                for batch in pool.map(_run_fault_batch, payloads):
                    for record_json, wall_ms in batch:
                        results.append((CampaignRecord.model_validate_json(record_json), wall_ms))
                    self._progress(len(results), len(faults), on_progress)
        results.sort(key=lambda rw: rw[0].fault.id)

        records = [r for r, _ in results]
        timings = [FaultTiming(fault_id=r.fault.id, wall_ms=round(ms, 3)) for r, ms in results]
        total_ms = (time.perf_counter() - started) * 1000.0
        counts = {c: sum(1 for r in records if r.outcome is c) for c in OutcomeClass}
        summary = CampaignSummary(
            benchmark=config.benchmark,
            location=config.location_class,
            faults=len(records),
            executions=len(records) * len(rotation),
            golden_executions=len(rotation),
            mean_fault_ms=round(sum(t.wall_ms for t in timings) / len(timings), 3) if timings else 0.0,
            total_ms=round(total_ms, 3),
            benign=counts[OutcomeClass.BENIGN],
            sdc=counts[OutcomeClass.SDC],
            other=counts[OutcomeClass.OTHER],
        )
        manifest = CampaignManifest(
            tool_version=__version__,
            config=config,
            seed=config.seed,
            catalog={e.name: int(e) for e in CATALOG},
            slot_rotation=[[e.name for e in slots] for slots in rotation],
            repetitions_per_fault=len(rotation),
            golden_digest=golden.output_digest,
            golden_cycles=golden.golden_cycles,
            num_records=len(records),
        )
        logger.info(
            "campaign %s/%s done: benign %d, sdc %d, other %d, mean %.1f ms/fault",
            config.benchmark, config.location_class.value, summary.benign, summary.sdc,
            summary.other, summary.mean_fault_ms,
        )
        return CampaignReport(manifest, golden, faults, records, timings, summary)

    def _progress(self, done: int, total: int, on_progress: Optional[Callable[[int, int], None]]) -> None:
        if on_progress:
            on_progress(done, total)
        if done % self.settings.progress_every == 0 or done == total:
            logger.info("%d/%d faults injected", done, total)


def _run_fault_batch(payload: tuple[str, str, list[str], dict]) -> list[tuple[str, float]]:
    """Worker entry point: rebuilds the benchmark locally and runs a chunk of faults."""
    config_json, golden_json, fault_jsons, settings = payload
    config = CampaignConfig.model_validate_json(config_json)
    golden = GoldenReference.model_validate_json(golden_json)
    service = CampaignService(LabSettings(**settings))
    bench = build_benchmark(config.benchmark)
    out = []
    for fj in fault_jsons:
        record, wall_ms = service.run_fault(Fault.model_validate_json(fj), bench, golden, config)
        out.append((record.model_dump_json(), wall_ms))
    return out


def campaign_dir_name(config: CampaignConfig) -> str:
    return f"{config.benchmark}-{config.location_class.value}"


def run_grid(
    base: CampaignConfig,
    out_dir: Path,
    benchmarks: Optional[Sequence[str]] = None,
    jobs: int = 1,
    service: Optional[CampaignService] = None,
) -> list[CampaignReport]:
    """Every benchmark x location campaign, each saved under ``out_dir/<benchmark>-<location>``."""
    service = service or CampaignService()
    reports = []
    for config in grid_configs(base, benchmarks or list_benchmarks()):
        report = service.run_campaign(config, jobs=jobs)
        CampaignStore(Path(out_dir) / campaign_dir_name(config)).save(report)
        reports.append(report)
    return reports
