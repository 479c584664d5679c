"""Halt-mode debug port over one emulated target.

The host drives the target the way a JTAG debugger does: set breakpoints,
resume, wait for a stop, then read or write registers, the pc, memory and
PMU counters while the core is halted. None of these accesses advances the
cycle counter or touches the cache, predictor or event totals.
"""

from __future__ import annotations

import logging
from typing import NamedTuple, Optional

from app.errors import BadAddress, BadIndex, InvalidTarget, NotHalted, OutOfBounds
from app.models.schemas import EventKind, FaultTarget, LocationClass
from app.uarch.pmu import PmuBank
from app.vm.assembler import ProgramImage
from app.vm.machine import (
    INFINITE_BUDGET,
    MASK32,
    NUM_REGS,
    MachineState,
    StopReason,
    load_program,
    run_until,
)

logger = logging.getLogger("softerr.debug")


class FlipResult(NamedTuple):
    old: int
    new: int


class DebugSession:
    def __init__(
        self,
        image: ProgramImage,
        mem_size: int,
        stack_size: int = 4096,
        hpc_slots: int = 6,
        record_trace: bool = False,
    ) -> None:
        self.image = image
        self.state: MachineState = load_program(image, mem_size, record_trace=record_trace)
        self.stack_size = min(stack_size, mem_size)
        self.pmu = self.state.attach(PmuBank(hpc_slots))
        self._breakpoints: set[int] = set()
        self._running = False
        self.last_stop: Optional[StopReason] = None

    # ── Breakpoints ───────────────────────────────────────────────────────

    def set_breakpoint(self, addr: int) -> None:
        self._check_code_addr(addr)
        self._breakpoints.add(addr)

    def remove_breakpoint(self, addr: int) -> None:
        self._check_code_addr(addr)
        self._breakpoints.discard(addr)

    @property
    def breakpoints(self) -> frozenset[int]:
        return frozenset(self._breakpoints)

    # ── Run control ───────────────────────────────────────────────────────

    @property
    def halted(self) -> bool:
        return not self._running

    def resume(self) -> None:
        """Let the core run; debug accesses fail until :meth:`wait` reports a stop."""
        self._running = True

    def wait(self, cycle_budget: float = INFINITE_BUDGET) -> StopReason:
        self._running = True
        try:
            stop = run_until(self.state, frozenset(self._breakpoints), cycle_budget)
        finally:
            self._running = False
        self.last_stop = stop
        logger.debug("target stopped: %s at cycle %d", stop, self.state.cycle)
        return stop

    def run(self, cycle_budget: float = INFINITE_BUDGET) -> StopReason:
        self.resume()
        return self.wait(cycle_budget)

    # ── Registers and pc ─────────────────────────────────────────────────

    def read_register(self, idx: int) -> int:
        self._require_halted()
        self._check_reg(idx)
        return self.state.regs[idx]

    def write_register(self, idx: int, value: int) -> None:
        self._require_halted()
        self._check_reg(idx)
        self.state.regs[idx] = value & MASK32

    def read_pc(self) -> int:
        self._require_halted()
        return self.state.pc

    def write_pc(self, value: int) -> None:
        self._require_halted()
        self.state.pc = value & MASK32

    # ── Memory ────────────────────────────────────────────────────────────

    def read_memory(self, addr: int, length: int) -> bytes:
        self._require_halted()
        self._check_range(addr, length)
        return bytes(self.state.mem[addr:addr + length])

    def write_memory(self, addr: int, data: bytes) -> None:
        self._require_halted()
        self._check_range(addr, len(data))
        self.state.mem[addr:addr + len(data)] = data

    # ── PMU ───────────────────────────────────────────────────────────────

    def configure_pmu(self, slot: int, event: EventKind) -> None:
        self._require_halted()
        self.pmu.configure(slot, event)

    def read_pmu(self, slot: int) -> int:
        self._require_halted()
        return self.pmu.read(slot)

    # ── Fault injection ──────────────────────────────────────────────────

    def stack_region(self) -> tuple[int, int]:
        return self.state.mem_size - self.stack_size, self.stack_size

    def injectable_ranges(self) -> list[tuple[int, int]]:
        """Image footprint plus the stack region, as (start, length) pairs."""
        return [*self.image.footprint, self.stack_region()]

    def validate_target(self, target: FaultTarget) -> None:
        if target.location is LocationClass.MEMORY:
            addr = target.index
            if not any(start <= addr and addr + 4 <= start + length
                       for start, length in self.injectable_ranges()):
                raise InvalidTarget(
                    f"memory target 0x{addr:08x} is outside the image footprint and stack region"
                )

    def flip_bits(self, target: FaultTarget) -> FlipResult:
        """XOR the target word with the target's bit mask; returns old and new values."""
        self._require_halted()
        self.validate_target(target)
        mask = target.mask
        if target.location is LocationClass.REGISTERS:
            old = self.state.regs[target.index]
            new = old ^ mask
            self.state.regs[target.index] = new
        elif target.location is LocationClass.PC:
            old = self.state.pc
            new = old ^ mask
            self.state.pc = new
        else:
            old = self.state.load_word(target.index)
            new = old ^ mask
            self.state.store_word(target.index, new)
        logger.debug("flipped %s: 0x%08x -> 0x%08x", target.describe(), old, new)
        return FlipResult(old, new)

    # ── Checks ────────────────────────────────────────────────────────────

    def _require_halted(self) -> None:
        if self._running:
            raise NotHalted("target is running; halt it before accessing state")

    def _check_reg(self, idx: int) -> None:
        if not 0 <= idx < NUM_REGS:
            raise BadIndex(f"register index {idx} outside 0..{NUM_REGS - 1}")

    def _check_range(self, addr: int, length: int) -> None:
        if addr < 0 or length < 0 or addr + length > self.state.mem_size:
            raise OutOfBounds(
                f"range 0x{addr:x}+{length} exceeds memory of {self.state.mem_size} bytes"
            )

    def _check_code_addr(self, addr: int) -> None:
        if addr % 4 or not self.image.in_code(addr):
            raise BadAddress(f"0x{addr:x} is not an instruction address of the image")
