from __future__ import annotations

import pytest

from app.benchmarks.builder import build_benchmark
from app.errors import ImageTooLarge
from app.models.schemas import EventKind, StopKind, TrapKind
from app.vm.assembler import assemble
from app.vm.machine import (
    SP,
    load_program,
    next_instruction_cost,
    read_output,
    run_until,
    step,
)

from tests.conftest import SMALL_MEM, run_source


def words(data: bytes) -> list[int]:
    return [int.from_bytes(data[i:i + 4], "little") for i in range(0, len(data), 4)]


def test_arithmetic_and_output():
    state, stop = run_source("""
        MOVI R1, 7
        MOVI R2, 5
        SUB R3, R1, R2
        MUL R4, R1, R2
        XOR R5, R1, R2
        SHL R6, R1, 4
        OUT R3
        OUT R4
        OUT R5
        OUT R6
        HALT
    """)
    assert stop.kind is StopKind.HALTED
    assert words(read_output(state)) == [2, 35, 2, 112]


def test_wraparound_and_logical_shift():
    state, _ = run_source("""
        LI R1, 0xFFFFFFFF
        ADDI R2, R1, 1
        SHR R3, R1, 28
        LI R4, 0x10000
        MUL R5, R4, R4
        OUT R2
        OUT R3
        OUT R5
        HALT
    """)
    assert words(read_output(state)) == [0, 15, 0]


def test_signed_compare():
    state, _ = run_source("""
        LI R1, -1
        MOVI R2, 1
        MOVI R3, 0
        CMP R1, R2
        BGE done
        MOVI R3, 1
    done:
        OUT R3
        HALT
    """)
    assert words(read_output(state)) == [1]


def test_call_ret_push_pop():
    state, _ = run_source("""
        MOVI R1, 3
        PUSH R1
        CALL double
        POP R2
        OUT R1
        OUT R2
        HALT
    double:
        ADD R1, R1, R1
        RET
    """)
    assert words(read_output(state)) == [6, 3]
    assert state.regs[SP] == SMALL_MEM


def test_loader_sets_stack_pointer_and_entry():
    state = load_program(assemble("NOP\n_start: HALT\n"), SMALL_MEM)
    assert state.regs[SP] == SMALL_MEM
    assert state.pc == 4


def test_loader_patches_stack_top_word():
    image = assemble("HALT\n.data\n__stack_top: .word 0\nother: .word 5\n")
    state = load_program(image, SMALL_MEM)
    assert state.load_word(image.symbol("__stack_top")) == SMALL_MEM
    assert state.load_word(image.symbol("other")) == 5


def test_image_too_large():
    with pytest.raises(ImageTooLarge):
        load_program(assemble("HALT\n.data\n.space 64\n"), 32)


# ── Traps ─────────────────────────────────────────────────────────────────────

def test_fetching_zeroed_memory_traps():
    state, stop = run_source("NOP\n")
    assert stop.kind is StopKind.TRAPPED
    assert stop.trap is TrapKind.ILLEGAL_OPCODE


def test_misaligned_load_traps():
    _, stop = run_source("MOVI R1, 2\nLOADW R2, [R1+0]\nHALT\n")
    assert stop.trap is TrapKind.MISALIGNED_ACCESS


def test_out_of_bounds_store_traps():
    _, stop = run_source("LI R1, 0x10000\nSTOREW R1, [R1+0]\nHALT\n")
    assert stop.trap is TrapKind.MEM_OUT_OF_BOUNDS


def test_fetch_out_of_bounds():
    state = load_program(assemble("HALT\n"), SMALL_MEM)
    state.pc = 1 << 31
    stop = run_until(state)
    assert stop.trap is TrapKind.FETCH_OUT_OF_BOUNDS


def test_trap_retires_nothing():
    state, _ = run_source("MOVI R1, 2\nLOADW R2, [R1+0]\nHALT\n")
    ev = state.events
    assert ev[EventKind.INSTR_RETIRED] == 1
    assert ev[EventKind.TRAPS] == 1
    assert ev[EventKind.MEM_READ] == 0
    assert state.cycle == 2
    assert state.regs[2] == 0
    assert run_until(state).trap is TrapKind.MISALIGNED_ACCESS


def test_step_after_halt_is_an_error():
    state, _ = run_source("HALT\n")
    with pytest.raises(RuntimeError):
        step(state)


# ── Run control ───────────────────────────────────────────────────────────────

def test_breakpoint_stops_before_execution():
    image = assemble("MOVI R1, 1\nbp: MOVI R1, 2\nHALT\n")
    state = load_program(image, SMALL_MEM)
    stop = run_until(state, {image.symbols["bp"]})
    assert stop.kind is StopKind.BREAKPOINT and stop.addr == 4
    assert state.regs[1] == 1
    assert run_until(state).kind is StopKind.HALTED
    assert state.regs[1] == 2


def test_budget_exceeded_on_infinite_loop():
    state, stop = run_source("loop: JMP loop\n", budget=100)
    assert stop.kind is StopKind.BUDGET_EXCEEDED
    assert state.cycle == 100


MISSING_LOADS = """
        MOVI R1, 0x100
    loop:
        LOADW R2, [R1+0]
        ADDI R1, R1, 16
        JMP loop
"""


def test_budget_stops_before_an_instruction_that_would_exceed_it():
    # MOVI 1, LOADW miss 11, ADDI 1, JMP 1: the second LOADW would reach 25.
    state, stop = run_source(MISSING_LOADS, budget=20)
    assert stop.kind is StopKind.BUDGET_EXCEEDED
    assert state.cycle == 14
    state, stop = run_source(MISSING_LOADS, budget=25)
    assert stop.kind is StopKind.BUDGET_EXCEEDED
    assert state.cycle == 25


def test_next_instruction_cost_matches_execution(settings):
    state = load_program(build_benchmark("qsort").image, settings.mem_size)
    while True:
        expected = next_instruction_cost(state)
        before = state.cycle
        if step(state) is not None:
            break
        assert state.cycle - before == expected
    assert state.cycle - before == expected


def test_pc_low_bits_are_ignored():
    image = assemble("MOVI R1, 9\nOUT R1\nHALT\n")
    state = load_program(image, SMALL_MEM)
    state.pc |= 3
    assert run_until(state).kind is StopKind.HALTED
    assert words(read_output(state)) == [9]


# ── Cost model and events ────────────────────────────────────────────────────

def test_cache_costs():
    state, _ = run_source("""
        LI R1, buf
        LOADW R2, [R1+0]
        LOADW R3, [R1+4]
        HALT
        .data
    buf: .word 1, 2
    """)
    ev = state.events
    assert state.cycle == 2 + 11 + 2 + 1
    assert (ev[EventKind.L1D_MISS], ev[EventKind.L1D_HIT], ev[EventKind.MEM_READ]) == (1, 1, 2)
    assert ev[EventKind.CYCLES] == state.cycle


def test_branch_mispredict_cost():
    state, _ = run_source("MOVI R1, 0\nCMP R1, R1\nBEQ skip\nNOP\nskip: HALT\n")
    ev = state.events
    assert state.cycle == 1 + 1 + 3 + 1
    assert (ev[EventKind.BR_EXEC], ev[EventKind.BR_TAKEN], ev[EventKind.BR_MISPRED]) == (1, 1, 1)
    assert ev[EventKind.ALU_OPS] == 1
    assert ev[EventKind.INSTR_RETIRED] == 4


def test_jumps_counted():
    state, _ = run_source("CALL f\nHALT\nf: RET\n")
    assert state.events[EventKind.JUMP_EXEC] == 2


def test_benchmark_runs_are_deterministic():
    image = build_benchmark("qsort").image
    runs = []
    for _ in range(2):
        state = load_program(image)
        stop = run_until(state)
        runs.append((stop, state.cycle, list(state.events), read_output(state)))
    assert runs[0] == runs[1]
    assert runs[0][0].kind is StopKind.HALTED
