from __future__ import annotations

import pytest

from app.debug.port import DebugSession
from app.errors import BadAddress, BadIndex, InvalidTarget, NotHalted, OutOfBounds
from app.models.schemas import EventKind, FaultTarget, LocationClass, StopKind
from app.vm.assembler import assemble
from app.vm.machine import read_output

from tests.conftest import SMALL_MEM

PROGRAM = """
_start:
        LI R1, value
        LOADW R2, [R1+0]
        PMUON
trigger:
        ADDI R2, R2, 1
        OUT R2
        PMUOFF
__final_bp:
        HALT
        .data
value:  .word 41
"""


@pytest.fixture
def session() -> DebugSession:
    return DebugSession(assemble(PROGRAM), SMALL_MEM, stack_size=256, hpc_slots=2)


def test_run_to_breakpoint_and_continue(session):
    trigger = session.image.symbol("trigger")
    session.set_breakpoint(trigger)
    stop = session.run()
    assert stop.kind is StopKind.BREAKPOINT and stop.addr == trigger
    assert session.read_pc() == trigger
    assert session.read_register(2) == 41
    session.remove_breakpoint(trigger)
    assert session.run().kind is StopKind.HALTED
    assert session.last_stop.kind is StopKind.HALTED
    assert read_output(session.state) == (42).to_bytes(4, "little")


def test_access_while_running_is_rejected(session):
    session.resume()
    assert not session.halted
    with pytest.raises(NotHalted):
        session.read_register(1)
    with pytest.raises(NotHalted):
        session.read_memory(0, 4)
    with pytest.raises(NotHalted):
        session.configure_pmu(0, EventKind.CYCLES)
    session.wait()
    assert session.halted
    assert session.read_register(2) == 42


def test_bad_arguments(session):
    with pytest.raises(BadIndex):
        session.read_register(16)
    with pytest.raises(BadIndex):
        session.write_register(-1, 0)
    with pytest.raises(OutOfBounds):
        session.read_memory(SMALL_MEM - 2, 4)
    with pytest.raises(OutOfBounds):
        session.write_memory(-4, b"\0")
    with pytest.raises(BadAddress):
        session.set_breakpoint(session.image.symbol("value"))
    with pytest.raises(BadAddress):
        session.set_breakpoint(2)


def test_debug_accesses_do_not_advance_time(session):
    before = (session.state.cycle, list(session.state.events))
    session.write_register(3, 7)
    session.read_memory(0, 16)
    session.write_pc(session.read_pc())
    session.configure_pmu(0, EventKind.INSTR_RETIRED)
    assert (session.state.cycle, list(session.state.events)) == before


def test_write_register_masks_to_32_bits(session):
    session.write_register(1, -1)
    assert session.read_register(1) == 0xFFFF_FFFF


def test_pmu_via_port(session):
    session.configure_pmu(0, EventKind.INSTR_RETIRED)
    session.configure_pmu(1, EventKind.ALU_OPS)
    session.set_breakpoint(session.image.symbol("__final_bp"))
    session.run()
    assert session.read_pmu(0) == 2
    assert session.read_pmu(1) == 1


def test_flip_register_pc_and_memory(session):
    reg = session.flip_bits(FaultTarget(location=LocationClass.REGISTERS, index=3, bits=(0, 4)))
    assert (reg.old, reg.new) == (0, 0x11)
    assert session.read_register(3) == 0x11

    pc = session.flip_bits(FaultTarget(location=LocationClass.PC, bits=(2,)))
    assert pc.new == pc.old ^ 4
    assert session.read_pc() == pc.new

    addr = session.image.symbol("value")
    mem = session.flip_bits(FaultTarget(location=LocationClass.MEMORY, index=addr, bits=(31,)))
    assert (mem.old, mem.new) == (41, 41 | 1 << 31)
    assert session.read_memory(addr, 4) == (41 | 1 << 31).to_bytes(4, "little")


@pytest.mark.parametrize("target", [
    FaultTarget(location=LocationClass.REGISTERS, index=14, bits=(0, 1, 31)),
    FaultTarget(location=LocationClass.PC, bits=(5,)),
    FaultTarget(location=LocationClass.MEMORY, index=0, bits=(30, 31, 0)),
], ids=["register", "pc", "memory"])
def test_flipping_twice_restores_the_word(session, target):
    before = (list(session.state.regs), session.state.pc, bytes(session.state.mem))
    first = session.flip_bits(target)
    second = session.flip_bits(target)
    assert second.old == first.new and second.new == first.old
    assert first.new == first.old ^ target.mask
    assert (list(session.state.regs), session.state.pc, bytes(session.state.mem)) == before


def test_memory_targets_restricted_to_footprint_and_stack(session):
    start, length = session.stack_region()
    assert (start, length) == (SMALL_MEM - 256, 256)
    session.flip_bits(FaultTarget(location=LocationClass.MEMORY, index=start, bits=(0,)))
    with pytest.raises(InvalidTarget):
        session.flip_bits(FaultTarget(location=LocationClass.MEMORY, index=start - 4, bits=(0,)))
    assert (0, len(session.image.code) * 4) in session.injectable_ranges()
