"""Deterministic 32-bit register machine.

The program counter lives outside the register file and is masked to a word
boundary at fetch, so its two low bits never influence control flow.
Memory is little-endian; word accesses must be aligned. Event totals are
free-running from reset; PMU banks and oracle observers attached to the
state measure them over their enable window (see ``app.uarch.pmu``).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from app.errors import ImageTooLarge
from app.models.schemas import CATALOG, EventKind, StopKind, TrapKind
from app.uarch.cache import AccessKind, CacheModel
from app.uarch.cost import MAX_INSTRUCTION_COST, instruction_cost
from app.uarch.pmu import PmuBank
from app.uarch.predictor import BranchPredictor
from app.vm.assembler import ProgramImage
from app.vm.isa import Decoded, Opcode, decode, to_signed

logger = logging.getLogger("softerr.vm")

NUM_REGS = 16
SP, LR = 14, 15
DEFAULT_MEM_SIZE = 1 << 20
MASK32 = 0xFFFF_FFFF
FETCH_MASK = MASK32 & ~3
INFINITE_BUDGET = float("inf")

# Data word the loader fills with the initial stack pointer, when the image exports it.
STACK_TOP_SYMBOL = "__stack_top"

_CYCLES = EventKind.CYCLES.value
_INSTR = EventKind.INSTR_RETIRED.value
_JUMP = EventKind.JUMP_EXEC.value
_ALU = EventKind.ALU_OPS.value
_TRAPS = EventKind.TRAPS.value

# Decoding is a pure function of the word; share results across machines.
_DECODE_CACHE: dict[int, Optional[Decoded]] = {}

_NOP, _HALT = Opcode.NOP.value, Opcode.HALT.value
_MOVI, _MOVHI, _MOV = Opcode.MOVI.value, Opcode.MOVHI.value, Opcode.MOV.value
_ADD, _SUB, _MUL = Opcode.ADD.value, Opcode.SUB.value, Opcode.MUL.value
_AND, _OR, _XOR = Opcode.AND.value, Opcode.OR.value, Opcode.XOR.value
_SHL, _SHR, _ADDI, _CMP = Opcode.SHL.value, Opcode.SHR.value, Opcode.ADDI.value, Opcode.CMP.value
_LOADW, _STOREW, _PUSH, _POP = Opcode.LOADW.value, Opcode.STOREW.value, Opcode.PUSH.value, Opcode.POP.value
_BEQ, _BNE, _BLT, _BGE = Opcode.BEQ.value, Opcode.BNE.value, Opcode.BLT.value, Opcode.BGE.value
_JMP, _CALL, _RET = Opcode.JMP.value, Opcode.CALL.value, Opcode.RET.value
_OUT = Opcode.OUT.value
_PMUON, _PMUOFF, _PMURD = Opcode.PMUON.value, Opcode.PMUOFF.value, Opcode.PMURD.value


class Status(str, Enum):
    RUNNING = "running"
    HALTED = "halted"
    TRAPPED = "trapped"


@dataclass(frozen=True)
class StopReason:
    kind: StopKind
    addr: Optional[int] = None
    trap: Optional[TrapKind] = None

    @classmethod
    def breakpoint(cls, addr: int) -> "StopReason":
        return cls(StopKind.BREAKPOINT, addr=addr)

    @classmethod
    def halted(cls) -> "StopReason":
        return cls(StopKind.HALTED)

    @classmethod
    def trapped(cls, trap: TrapKind) -> "StopReason":
        return cls(StopKind.TRAPPED, trap=trap)

    @classmethod
    def budget_exceeded(cls) -> "StopReason":
        return cls(StopKind.BUDGET_EXCEEDED)

    def __str__(self) -> str:
        if self.kind is StopKind.BREAKPOINT:
            return f"breakpoint@0x{self.addr:08x}"
        if self.kind is StopKind.TRAPPED:
            return f"trapped({self.trap.value})"
        return self.kind.value


@dataclass(eq=False, slots=True)
class MachineState:
    """Architectural and micro-architectural state of one target."""
    mem: bytearray
    regs: list[int] = field(default_factory=lambda: [0] * NUM_REGS)
    pc: int = 0
    cycle: int = 0
    output: bytearray = field(default_factory=bytearray)
    status: Status = Status.RUNNING
    trap: Optional[TrapKind] = None
    flag_eq: bool = False
    flag_lt: bool = False
    cache: CacheModel = field(default_factory=CacheModel)
    predictor: BranchPredictor = field(default_factory=BranchPredictor)
    events: list[int] = field(default_factory=lambda: [0] * len(CATALOG))
    observers: list[PmuBank] = field(default_factory=list)
    trace: Optional[set[int]] = None

    @property
    def mem_size(self) -> int:
        return len(self.mem)

    def attach(self, observer: PmuBank) -> PmuBank:
        """Bind a PMU bank or oracle to this machine's event totals."""
        observer.attach(self.events)
        self.observers.append(observer)
        return observer

    def load_word(self, addr: int) -> int:
        return int.from_bytes(self.mem[addr:addr + 4], "little")

    def store_word(self, addr: int, value: int) -> None:
        self.mem[addr:addr + 4] = (value & MASK32).to_bytes(4, "little")


def load_program(
    image: ProgramImage, mem_size: int = DEFAULT_MEM_SIZE, record_trace: bool = False
) -> MachineState:
    """Fresh machine with ``image`` loaded: zeroed memory, R14 at top of memory.

    When the image exports ``__stack_top`` that word is patched with the same
    value, so start-up code can (re)load SP itself.
    """
    if mem_size % 4 or mem_size <= 0:
        raise ImageTooLarge(f"memory size {mem_size} must be a positive multiple of 4")
    if image.end > mem_size:
        raise ImageTooLarge(f"image needs {image.end} bytes, memory has {mem_size}")
    mem = bytearray(mem_size)
    flat = image.to_bytes()
    mem[image.code_base:image.code_base + len(flat)] = flat
    state = MachineState(mem=mem, pc=image.entry)
    state.regs[SP] = mem_size & MASK32
    stack_top = image.symbols.get(STACK_TOP_SYMBOL)
    if stack_top is not None:
        state.store_word(stack_top, mem_size)
    if record_trace:
        state.trace = set()
    return state


def _trap(state: MachineState, kind: TrapKind) -> StopReason:
    events = state.events
    events[_TRAPS] += 1
    events[_CYCLES] += 1
    state.cycle += 1
    state.status = Status.TRAPPED
    state.trap = kind
    return StopReason.trapped(kind)


def _data_check(state: MachineState, addr: int) -> Optional[TrapKind]:
    if addr + 4 > len(state.mem):
        return TrapKind.MEM_OUT_OF_BOUNDS
    if addr & 3:
        return TrapKind.MISALIGNED_ACCESS
    return None


def _branch_taken(state: MachineState, op: int) -> bool:
    if op == _BEQ:
        return state.flag_eq
    if op == _BNE:
        return not state.flag_eq
    if op == _BLT:
        return state.flag_lt
    return not state.flag_lt


def step(state: MachineState) -> Optional[StopReason]:
    """Execute one instruction; returns a StopReason on HALT or trap, else None."""
    if state.status is not Status.RUNNING:
        raise RuntimeError(f"step on a machine that is {state.status.value}")
    pc = state.pc & FETCH_MASK
    state.pc = pc
    mem = state.mem
    if pc + 4 > len(mem):
        return _trap(state, TrapKind.FETCH_OUT_OF_BOUNDS)
    word = int.from_bytes(mem[pc:pc + 4], "little")
    try:
        d = _DECODE_CACHE[word]
    except KeyError:
        d = _DECODE_CACHE[word] = decode(word)
    if d is None:
        return _trap(state, TrapKind.ILLEGAL_OPCODE)
    if state.trace is not None:
        state.trace.add(pc)

    op, rd, rs1, rs2, imm = d
    regs = state.regs
    events = state.events
    next_pc = pc + 4
    hit: Optional[bool] = None
    mispred: Optional[bool] = None
    pmu_on = False

    if op == _ADDI:
        regs[rd] = (regs[rs1] + imm) & MASK32
        events[_ALU] += 1
    elif op == _LOADW or op == _POP:
        addr = (regs[rs1] + imm) & MASK32 if op == _LOADW else regs[SP]
        fault = _data_check(state, addr)
        if fault is not None:
            return _trap(state, fault)
        hit = state.cache.access(addr, AccessKind.READ, events)
        value = int.from_bytes(mem[addr:addr + 4], "little")
        if op == _POP:
            regs[SP] = (addr + 4) & MASK32
        regs[rd] = value
    elif op == _STOREW or op == _PUSH:
        if op == _STOREW:
            addr = (regs[rs1] + imm) & MASK32
            value = regs[rs2]
        else:
            addr = (regs[SP] - 4) & MASK32
            value = regs[rd]
        fault = _data_check(state, addr)
        if fault is not None:
            return _trap(state, fault)
        hit = state.cache.access(addr, AccessKind.WRITE, events)
        mem[addr:addr + 4] = value.to_bytes(4, "little")
        if op == _PUSH:
            regs[SP] = addr
    elif op == _CMP:
        a, b = regs[rs1], regs[rs2]
        state.flag_eq = a == b
        state.flag_lt = to_signed(a) < to_signed(b)
        events[_ALU] += 1
    elif _BEQ <= op <= _BGE:
        taken = _branch_taken(state, op)
        mispred = state.predictor.predict_and_resolve(pc, taken, events).mispredicted
        if taken:
            next_pc = (pc + 4 + 4 * imm) & MASK32
    elif op == _MOVI:
        regs[rd] = imm
    elif op == _MOVHI:
        regs[rd] = (imm << 16) | (regs[rd] & 0xFFFF)
    elif op == _MOV:
        regs[rd] = regs[rs1]
    elif _ADD <= op <= _SHR:
        a = regs[rs1]
        if op == _ADD:
            r = a + regs[rs2]
        elif op == _SUB:
            r = a - regs[rs2]
        elif op == _MUL:
            r = a * regs[rs2]
        elif op == _AND:
            r = a & regs[rs2]
        elif op == _OR:
            r = a | regs[rs2]
        elif op == _XOR:
            r = a ^ regs[rs2]
        elif op == _SHL:
            r = a << imm
        else:
            r = a >> imm
        regs[rd] = r & MASK32
        events[_ALU] += 1
    elif op == _JMP or op == _CALL:
        if op == _CALL:
            regs[LR] = next_pc & MASK32
        next_pc = (pc + 4 + 4 * imm) & MASK32
        events[_JUMP] += 1
    elif op == _RET:
        next_pc = regs[LR]
        events[_JUMP] += 1
    elif op == _OUT:
        state.output += regs[rs1].to_bytes(4, "little")
    elif op == _HALT:
        state.status = Status.HALTED
    elif op == _PMUON:
        pmu_on = True
    elif op == _PMUOFF:
        for obs in state.observers:
            obs.disable()
    elif op == _PMURD:
        bank = state.observers[0] if state.observers else None
        regs[rd] = (bank.read_raw(imm) & MASK32) if bank is not None else 0
    # NOP falls through

    cost = instruction_cost(op, hit, mispred)
    state.cycle += cost
    events[_CYCLES] += cost
    events[_INSTR] += 1
    state.pc = next_pc
    if pmu_on:
        for obs in state.observers:
            obs.enable()
    if state.status is Status.HALTED:
        return StopReason.halted()
    return None


def next_instruction_cost(state: MachineState) -> int:
    """Cycles the instruction at pc would take, without executing it."""
    pc = state.pc & FETCH_MASK
    if pc + 4 > len(state.mem):
        return 1
    d = decode(int.from_bytes(state.mem[pc:pc + 4], "little"))
    if d is None:
        return 1
    op, regs = d.op, state.regs
    if op in (_LOADW, _STOREW, _PUSH, _POP):
        if op == _LOADW or op == _STOREW:
            addr = (regs[d.rs1] + d.imm) & MASK32
        else:
            addr = regs[SP] if op == _POP else (regs[SP] - 4) & MASK32
        if _data_check(state, addr) is not None:
            return 1
        return instruction_cost(op, dcache_hit=state.cache.would_hit(addr))
    if _BEQ <= op <= _BGE:
        mispredicted = state.predictor.predict(pc) != _branch_taken(state, op)
        return instruction_cost(op, mispredicted=mispredicted)
    return instruction_cost(op)


def run_until(
    state: MachineState,
    breakpoints: frozenset[int] | set[int] = frozenset(),
    cycle_budget: float = INFINITE_BUDGET,
) -> StopReason:
    """Step until a breakpoint, HALT, a trap, or the cycle budget.

    A breakpoint stops *before* the instruction at the (masked) pc executes.
    BudgetExceeded is returned before an instruction whose cost would take
    ``cycle`` past ``cycle_budget``, so ``cycle`` never exceeds the budget.
    """
    if state.status is Status.HALTED:
        return StopReason.halted()
    if state.status is Status.TRAPPED:
        return StopReason.trapped(state.trap)
    while True:
        pc = state.pc & FETCH_MASK
        if pc in breakpoints:
            return StopReason.breakpoint(pc)
        if (state.cycle + MAX_INSTRUCTION_COST > cycle_budget
                and state.cycle + next_instruction_cost(state) > cycle_budget):
            return StopReason.budget_exceeded()
        stop = step(state)
        if stop is not None:
            return stop


def read_output(state: MachineState) -> bytes:
    return bytes(state.output)
