"""Instruction set of the emulated target.

Every instruction is one little-endian 32-bit word::

    31      24 23  20 19  16 15  12 11                 0
    +---------+------+------+------+--------------------+
    | opcode  |  rd  | rs1  | rs2  |       imm12        |
    +---------+------+------+------+--------------------+
                            |         imm16             |   MOVI, MOVHI, PMURD
              |              imm24 (signed words)       |   branches, JMP, CALL

Opcode 0x00 is illegal so that fetching zero-filled memory traps. Fields an
instruction does not use are ignored on decode. See docs/ISA.md for the
table with semantics.
"""

from __future__ import annotations

from enum import IntEnum
from typing import NamedTuple, Optional


class Opcode(IntEnum):
    NOP = 0x01
    HALT = 0x02
    MOVI = 0x10
    MOVHI = 0x11
    MOV = 0x12
    ADD = 0x20
    SUB = 0x21
    MUL = 0x22
    AND = 0x23
    OR = 0x24
    XOR = 0x25
    SHL = 0x26
    SHR = 0x27
    ADDI = 0x28
    CMP = 0x29
    LOADW = 0x30
    STOREW = 0x31
    PUSH = 0x32
    POP = 0x33
    BEQ = 0x40
    BNE = 0x41
    BLT = 0x42
    BGE = 0x43
    JMP = 0x44
    CALL = 0x45
    RET = 0x46
    OUT = 0x50
    PMUON = 0x60
    PMUOFF = 0x61
    PMURD = 0x62


# Operand formats, used by both the assembler and the disassembler.
#   N     no operands
#   RI16  rd, imm16            RR    rd, rs1
#   RRR   rd, rs1, rs2         RRI   rd, rs1, imm12 (signed)
#   RRS   rd, rs1, shamt       CMP   rs1, rs2
#   LD    rd, [rs1+imm12]      ST    rs2, [rs1+imm12]
#   RD    rd                   RS    rs1
#   BR    label
FORMATS: dict[Opcode, str] = {
    Opcode.NOP: "N", Opcode.HALT: "N", Opcode.RET: "N",
    Opcode.PMUON: "N", Opcode.PMUOFF: "N",
    Opcode.MOVI: "RI16", Opcode.MOVHI: "RI16", Opcode.PMURD: "RI16",
    Opcode.MOV: "RR",
    Opcode.ADD: "RRR", Opcode.SUB: "RRR", Opcode.MUL: "RRR",
    Opcode.AND: "RRR", Opcode.OR: "RRR", Opcode.XOR: "RRR",
    Opcode.SHL: "RRS", Opcode.SHR: "RRS",
    Opcode.ADDI: "RRI",
    Opcode.CMP: "CMP",
    Opcode.LOADW: "LD", Opcode.STOREW: "ST",
    Opcode.PUSH: "RD", Opcode.POP: "RD",
    Opcode.OUT: "RS",
    Opcode.BEQ: "BR", Opcode.BNE: "BR", Opcode.BLT: "BR", Opcode.BGE: "BR",
    Opcode.JMP: "BR", Opcode.CALL: "BR",
}

WORD_MASK = 0xFFFF_FFFF
IMM12_MIN, IMM12_MAX = -2048, 2047
IMM24_MIN, IMM24_MAX = -(1 << 23), (1 << 23) - 1

_VALID = frozenset(int(op) for op in Opcode)


class Decoded(NamedTuple):
    op: int
    rd: int
    rs1: int
    rs2: int
    imm: int


def sign_extend(value: int, bits: int) -> int:
    sign = 1 << (bits - 1)
    return (value & (sign - 1)) - (value & sign)


def to_signed(word: int) -> int:
    return word - 0x1_0000_0000 if word & 0x8000_0000 else word


# ── Encoding ──────────────────────────────────────────────────────────────────

def encode(op: Opcode, rd: int = 0, rs1: int = 0, rs2: int = 0, imm: int = 0) -> int:
    """Pack fields into a word. ``imm`` is interpreted per the opcode's format."""
    fmt = FORMATS[op]
    word = int(op) << 24
    if fmt == "BR":
        return word | (imm & 0xFF_FFFF)
    word |= (rd & 0xF) << 20 | (rs1 & 0xF) << 16
    if fmt == "RI16":
        return word | (imm & 0xFFFF)
    return word | (rs2 & 0xF) << 12 | (imm & 0xFFF)


def decode(word: int) -> Optional[Decoded]:
    """Unpack a word; None when the opcode is not part of the ISA."""
    op = word >> 24
    if op not in _VALID:
        return None
    fmt = FORMATS[Opcode(op)]
    if fmt == "BR":
        return Decoded(op, 0, 0, 0, sign_extend(word & 0xFF_FFFF, 24))
    rd = (word >> 20) & 0xF
    rs1 = (word >> 16) & 0xF
    if fmt == "RI16":
        return Decoded(op, rd, rs1, 0, word & 0xFFFF)
    imm = word & 0xFFF
    if fmt in ("RRI", "LD", "ST"):
        imm = sign_extend(imm, 12)
    return Decoded(op, rd, rs1, (word >> 12) & 0xF, imm)


def disassemble(word: int, addr: Optional[int] = None) -> str:
    d = decode(word)
    if d is None:
        return f".word 0x{word:08x}"
    op = Opcode(d.op)
    fmt = FORMATS[op]
    name = op.name
    if fmt == "N":
        return name
    if fmt == "RI16":
        return f"{name} R{d.rd}, {d.imm}"
    if fmt == "RR":
        return f"{name} R{d.rd}, R{d.rs1}"
    if fmt == "RRR":
        return f"{name} R{d.rd}, R{d.rs1}, R{d.rs2}"
    if fmt in ("RRI", "RRS"):
        return f"{name} R{d.rd}, R{d.rs1}, {d.imm}"
    if fmt == "CMP":
        return f"{name} R{d.rs1}, R{d.rs2}"
    if fmt == "LD":
        return f"{name} R{d.rd}, [R{d.rs1}{d.imm:+d}]"
    if fmt == "ST":
        return f"{name} R{d.rs2}, [R{d.rs1}{d.imm:+d}]"
    if fmt == "RD":
        return f"{name} R{d.rd}"
    if fmt == "RS":
        return f"{name} R{d.rs1}"
    if addr is not None:
        return f"{name} 0x{(addr + 4 + 4 * d.imm) & WORD_MASK:x}"
    return f"{name} {d.imm:+d}"
