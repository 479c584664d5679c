from __future__ import annotations

import pytest

from app.errors import (
    AssemblyError,
    DuplicateLabel,
    ImmediateOutOfRange,
    MalformedOperand,
    UndefinedLabel,
    UnknownMnemonic,
)
from app.vm.assembler import assemble
from app.vm.isa import Opcode, decode, disassemble, encode, sign_extend


# ── Encoding ──────────────────────────────────────────────────────────────────

def test_encode_field_layout():
    assert encode(Opcode.MOVI, rd=1, imm=5) == 0x1010_0005
    assert encode(Opcode.ADD, rd=1, rs1=2, rs2=3) == 0x2012_3000
    assert encode(Opcode.HALT) == 0x0200_0000


def test_decode_sign_extends_offsets():
    d = decode(encode(Opcode.LOADW, rd=3, rs1=1, imm=-4))
    assert (d.op, d.rd, d.rs1, d.imm) == (Opcode.LOADW, 3, 1, -4)
    assert decode(encode(Opcode.JMP, imm=-2)).imm == -2
    assert sign_extend(0xFFF, 12) == -1


def test_opcode_zero_and_unknown_are_illegal():
    assert decode(0) is None
    assert decode(0xFF00_0000) is None


def test_disassemble():
    assert disassemble(encode(Opcode.ADD, 1, 2, 3)) == "ADD R1, R2, R3"
    assert disassemble(encode(Opcode.LOADW, rd=3, rs1=1, imm=-4)) == "LOADW R3, [R1-4]"
    assert disassemble(encode(Opcode.STOREW, rs1=2, rs2=5, imm=8)) == "STOREW R5, [R2+8]"
    assert disassemble(encode(Opcode.JMP, imm=-2), addr=4) == "JMP 0x0"
    assert disassemble(0).startswith(".word")


# ── Assembly ─────────────────────────────────────────────────────────────────

def test_simple_program():
    image = assemble("MOVI R1, 5\nHALT\n")
    assert image.code == (encode(Opcode.MOVI, rd=1, imm=5), encode(Opcode.HALT))
    assert image.entry == 0
    assert image.code_end == 8


def test_backward_branch_offset():
    image = assemble("loop: NOP\n      JMP loop\n")
    assert image.code[1] == 0x44FF_FFFE


def test_forward_label_and_tabs_and_comments():
    src = "\tJMP\tdone ; skip\n\tNOP\ndone:\tHALT\n"
    image = assemble(src)
    assert image.symbols["done"] == 8
    assert decode(image.code[0]).imm == 1


def test_li_always_two_words():
    image = assemble("LI R2, 0x12345678\nLI R3, -1\nLI R4, 1\n")
    assert len(image.code) == 6
    assert image.code[0] == encode(Opcode.MOVI, rd=2, imm=0x5678)
    assert image.code[1] == encode(Opcode.MOVHI, rd=2, imm=0x1234)
    assert image.code[2] == encode(Opcode.MOVI, rd=3, imm=0xFFFF)
    assert image.code[3] == encode(Opcode.MOVHI, rd=3, imm=0xFFFF)


def test_data_section_layout():
    src = """
        LI R1, val
        HALT
        .data
    val: .word 7, val
    buf: .space 8
    """
    image = assemble(src)
    assert image.code_end == 12
    assert image.data_base == 16
    assert image.symbols["val"] == 16
    assert image.symbols["buf"] == 24
    assert image.data[:8] == (7).to_bytes(4, "little") + (16).to_bytes(4, "little")
    assert len(image.data) == 16
    assert image.footprint == ((0, 12), (16, 16))
    assert len(image.to_bytes()) == image.end


def test_equ_and_expressions():
    image = assemble(".equ N, 4\nMOVI R1, N + 2 - 1\nMOVI R2, 0x10\nMOVI R3, 0b101\n")
    assert [decode(w).imm for w in image.code] == [5, 16, 5]


def test_align_directive():
    image = assemble("HALT\n.data\n.word 1\n.align 16\nx: .word 2\n")
    assert image.symbols["x"] == image.data_base + 16


def test_start_symbol_sets_entry():
    image = assemble("NOP\n_start: HALT\n")
    assert image.entry == 4


def test_register_aliases():
    image = assemble("PUSH LR\nMOV R1, SP\n")
    assert decode(image.code[0]).rd == 15
    assert decode(image.code[1]).rs1 == 14


def test_listing_shows_labels():
    lines = list(assemble("start: NOP\nHALT\n").listing())
    assert lines[0] == "start:"
    assert "NOP" in lines[1]


# ── Errors ────────────────────────────────────────────────────────────────────

def test_unknown_mnemonic_reports_line():
    with pytest.raises(UnknownMnemonic) as exc:
        assemble("NOP\nFROB R1\n")
    assert exc.value.line == 2


def test_undefined_label():
    with pytest.raises(UndefinedLabel):
        assemble("JMP nowhere\n")


def test_duplicate_label():
    with pytest.raises(DuplicateLabel):
        assemble("a: NOP\na: NOP\n")


@pytest.mark.parametrize("src", [
    "ADDI R1, R1, 4096",
    "MOVI R1, 65536",
    "MOVI R1, -1",
    "SHL R1, R1, 32",
    "LOADW R1, [R2+2048]",
    "LI R1, 0x100000000",
])
def test_immediates_out_of_range(src):
    with pytest.raises(ImmediateOutOfRange):
        assemble(src)


@pytest.mark.parametrize("src", [
    "MOV R16, R1",
    "ADD R1, R2",
    "LOADW R1, R2",
    ".space 2 * 4",
    "NOP\n.data\nNOP",
])
def test_malformed_operands(src):
    with pytest.raises(MalformedOperand):
        assemble(src)


def test_final_breakpoint_must_be_code():
    with pytest.raises(AssemblyError):
        assemble("HALT\n.data\n__final_bp: .word 0\n")
