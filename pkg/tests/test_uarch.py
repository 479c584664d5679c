from __future__ import annotations

import pytest

from app.errors import BankEnabled, SlotOutOfRange, SlotUnconfigured
from app.models.schemas import CATALOG, EventKind
from app.uarch.cache import AccessKind, CacheModel
from app.uarch.cost import instruction_cost
from app.uarch.pmu import EventObserver, EventVector, OracleObserver, PmuBank
from app.uarch.predictor import (
    STRONG_NOT_TAKEN,
    STRONG_TAKEN,
    WEAK_NOT_TAKEN,
    BranchPredictor,
    bimodal_update,
)
from app.vm.assembler import assemble
from app.vm.machine import load_program, read_output, run_until

from tests.conftest import SMALL_MEM

E = EventKind


# ── Cache ────────────────────────────────────────────────────────────────────

def test_cache_miss_then_hit_same_line():
    cache = CacheModel()
    events = [0] * len(CATALOG)
    assert cache.access(0x100, AccessKind.READ, events) is False
    assert cache.access(0x10C, AccessKind.WRITE, events) is True
    assert events[E.L1D_MISS] == 1 and events[E.L1D_HIT] == 1
    assert events[E.MEM_READ] == 1 and events[E.MEM_WRITE] == 1


def test_cache_conflict_eviction():
    cache = CacheModel(num_lines=256, line_size=16)
    stride = 256 * 16
    assert cache.index(0) == cache.index(stride)
    assert cache.tag(0) != cache.tag(stride)
    cache.lookup(0)
    cache.lookup(stride)
    assert cache.lookup(0) is False
    assert cache.lookup(stride) is False
    assert cache.lookup(16) is False and cache.lookup(stride) is True


def test_cache_geometry_must_be_power_of_two():
    with pytest.raises(ValueError):
        CacheModel(num_lines=100)


# ── Predictor ────────────────────────────────────────────────────────────────

def test_bimodal_saturates():
    assert bimodal_update(STRONG_TAKEN, True) == STRONG_TAKEN
    assert bimodal_update(STRONG_NOT_TAKEN, False) == STRONG_NOT_TAKEN


def test_predictor_learns_a_taken_branch():
    bp = BranchPredictor()
    results = [bp.predict_and_resolve(0x40, True).mispredicted for _ in range(3)]
    assert results == [True, False, False]
    assert bp.predict(0x40) is True
    assert bp.index(0x40) == bp.index(0x40 + 64 * 4)


def test_alternating_branch_always_mispredicts_from_weak_not_taken():
    bp = BranchPredictor()
    assert bp.table[bp.index(0x80)] == WEAK_NOT_TAKEN
    outcomes = [i % 2 == 0 for i in range(200)]
    missed = [bp.predict_and_resolve(0x80, taken).mispredicted for taken in outcomes]
    assert all(missed)
    assert bp.table[bp.index(0x80)] == WEAK_NOT_TAKEN


def test_predictor_tallies_events():
    bp = BranchPredictor()
    events = [0] * len(CATALOG)
    bp.predict_and_resolve(0, True, events)
    bp.predict_and_resolve(0, False, events)
    assert (events[E.BR_EXEC], events[E.BR_TAKEN], events[E.BR_MISPRED]) == (2, 1, 2)


def test_instruction_cost():
    assert instruction_cost(0x01) == 1
    assert instruction_cost(0x30, dcache_hit=True) == 2
    assert instruction_cost(0x30, dcache_hit=False) == 11
    assert instruction_cost(0x40, mispredicted=True) == 3
    assert instruction_cost(0x40, mispredicted=False) == 1


# ── PMU bank ─────────────────────────────────────────────────────────────────

def test_bank_counts_only_while_enabled():
    totals = [0] * len(CATALOG)
    bank = PmuBank(2)
    bank.attach(totals)
    bank.configure(0, E.CYCLES)
    totals[E.CYCLES] = 10
    bank.enable()
    totals[E.CYCLES] = 15
    assert bank.read(0) == 5
    bank.disable()
    totals[E.CYCLES] = 40
    assert bank.read(0) == 5
    bank.enable()
    totals[E.CYCLES] = 42
    assert bank.read(0) == 7


def test_bank_errors():
    bank = PmuBank(2)
    with pytest.raises(SlotOutOfRange):
        bank.configure(2, E.CYCLES)
    with pytest.raises(SlotUnconfigured):
        bank.read(1)
    bank.enable()
    with pytest.raises(BankEnabled):
        bank.configure(0, E.CYCLES)
    with pytest.raises(SlotOutOfRange):
        bank.configure_all(CATALOG)
    assert bank.read_raw(1) == 0
    assert bank.read_raw(99) == 0


def test_oracle_observer_covers_catalog():
    oracle = OracleObserver()
    assert oracle.num_slots == len(CATALOG)
    assert oracle.assignment == list(CATALOG)
    assert oracle.snapshot().complete
    assert isinstance(oracle, EventObserver)


# ── Event vectors ────────────────────────────────────────────────────────────

def test_event_vector_order_and_merge():
    a = EventVector({"TRAPS": 0, E.CYCLES: 10})
    b = EventVector({E.INSTR_RETIRED: 4})
    merged = a.merge(b)
    assert list(merged.to_dict()) == ["CYCLES", "INSTR_RETIRED", "TRAPS"]
    assert merged["cycles"] == 10
    assert not merged.complete


def test_event_vector_identities():
    healthy = EventVector({E.L1D_HIT: 3, E.L1D_MISS: 1, E.MEM_READ: 2, E.MEM_WRITE: 2,
                           E.BR_EXEC: 4, E.BR_TAKEN: 2, E.BR_MISPRED: 1,
                           E.INSTR_RETIRED: 10, E.CYCLES: 20, E.TRAPS: 0})
    assert healthy.check_identities() == []
    broken = healthy.merge({E.L1D_HIT: 0, E.BR_MISPRED: 9, E.TRAPS: 2})
    assert len(broken.check_identities()) == 3


# ── Counting window on a real program ────────────────────────────────────────

TASK = """
__task_start:
        PMUON
        MOVI R1, 3
loop:   ADDI R1, R1, -1
        CMP R1, R0
        BNE loop
        PMUOFF
        PMURD R2, 0
        PMURD R3, 5
        OUT R2
        OUT R3
__final_bp:
        HALT
"""


def _window_count(init: str) -> tuple[int, bytes, list[int]]:
    state = load_program(assemble("MOVI R0, 0\n" + init + TASK), SMALL_MEM)
    bank = state.attach(PmuBank(6))
    bank.configure(0, E.INSTR_RETIRED)
    oracle = state.attach(OracleObserver())
    run_until(state)
    return bank.read(0), read_output(state), [oracle.read(int(e)) for e in CATALOG]


def test_init_phase_is_outside_the_counting_window():
    plain = _window_count("")
    padded = _window_count("NOP\n" * 25 + "MOVI R7, 1\nADD R7, R7, R7\n")
    assert plain[0] == padded[0] == 10
    assert plain[2] == padded[2]


def test_pmurd_stages_counter_values():
    count, output, _ = _window_count("")
    assert output == (10).to_bytes(4, "little") + (0).to_bytes(4, "little")
    assert count == 10


def test_oracle_window_identities():
    _, _, counts = _window_count("")
    vector = EventVector(dict(zip(CATALOG, counts)))
    assert vector.check_identities() == []
    assert vector[E.INSTR_RETIRED] == 10
    assert vector[E.BR_EXEC] == 3
