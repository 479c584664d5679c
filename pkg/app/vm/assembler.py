"""Two-pass assembler for the target ISA.

Source format: one instruction or directive per line, ``;`` starts a comment,
``name:`` defines a label (several may prefix one line). Directives:
``.text``, ``.data``, ``.word v[, v...]``, ``.space n``, ``.align n``,
``.equ name, value``. Operand expressions are ``term (+|- term)*`` where a
term is a number (decimal, ``0x``, ``0b``) or a symbol.

Layout: code at ``base`` (default 0), data right after the code aligned to
16 bytes. The entry point is ``_start`` when defined, otherwise ``base``.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Iterator, Optional

from app.errors import (
    AssemblyError,
    DuplicateLabel,
    ImmediateOutOfRange,
    MalformedOperand,
    UndefinedLabel,
    UnknownMnemonic,
)
from app.vm.isa import (
    FORMATS,
    IMM12_MAX,
    IMM12_MIN,
    IMM24_MAX,
    IMM24_MIN,
    WORD_MASK,
    Opcode,
    disassemble,
    encode,
)

logger = logging.getLogger("softerr.vm.asm")

DATA_ALIGN = 16

_LABEL_RE = re.compile(r"^\s*([A-Za-z_.$][\w.$]*)\s*:")
_MEM_RE = re.compile(r"^\[\s*([A-Za-z]\w*)\s*(?:([+-])\s*(.+?))?\s*\]$")
_TERM_RE = re.compile(r"\s*([+-])?\s*([A-Za-z_.$][\w.$]*|0[xX][0-9a-fA-F_]+|0[bB][01_]+|\d[\d_]*)\s*")
_REG_ALIASES = {"SP": 14, "LR": 15}

PSEUDO = {"LI": 8}


@dataclass(frozen=True)
class ProgramImage:
    """Assembled program: code words, initialized data, symbols and used ranges."""
    code_base: int
    code: tuple[int, ...]
    data_base: int
    data: bytes
    entry: int
    symbols: dict[str, int] = field(default_factory=dict)
    footprint: tuple[tuple[int, int], ...] = ()

    @property
    def code_end(self) -> int:
        return self.code_base + 4 * len(self.code)

    @property
    def end(self) -> int:
        return max(self.code_end, self.data_base + len(self.data))

    def in_code(self, addr: int) -> bool:
        return self.code_base <= addr < self.code_end

    def code_addresses(self) -> range:
        return range(self.code_base, self.code_end, 4)

    def symbol(self, name: str) -> int:
        try:
            return self.symbols[name]
        except KeyError:
            raise UndefinedLabel(f"image does not export symbol {name!r}") from None

    def to_bytes(self) -> bytes:
        """Flat memory image from ``code_base`` up to the end of the data."""
        buf = bytearray(self.end - self.code_base)
        for i, word in enumerate(self.code):
            buf[4 * i:4 * i + 4] = word.to_bytes(4, "little")
        off = self.data_base - self.code_base
        buf[off:off + len(self.data)] = self.data
        return bytes(buf)

    def listing(self) -> Iterator[str]:
        by_addr: dict[int, list[str]] = {}
        for name, addr in self.symbols.items():
            by_addr.setdefault(addr, []).append(name)
        for i, word in enumerate(self.code):
            addr = self.code_base + 4 * i
            for name in sorted(by_addr.get(addr, ())):
                yield f"{name}:"
            yield f"  {addr:08x}:  {word:08x}   {disassemble(word, addr)}"


@dataclass
class _Item:
    section: str
    offset: int
    line: int
    kind: str               # "insn" | "li" | "word" | "space"
    mnemonic: str = ""
    operands: list[str] = field(default_factory=list)
    size: int = 4


class _Assembler:
    def __init__(self, base: int) -> None:
        self.base = base
        self.items: list[_Item] = []
        self.labels: dict[str, tuple[str, int, int]] = {}   # name -> (section, offset, line)
        self.equs: dict[str, int] = {}
        self.offsets = {"text": 0, "data": 0}
        self.section = "text"
        self.symbols: dict[str, int] = {}

    # ── Pass 1: sizes and label offsets ──────────────────────────────────

    def first_pass(self, source: str) -> None:
        for lineno, raw in enumerate(source.splitlines(), start=1):
            line = raw.split(";", 1)[0].strip()
            while True:
                m = _LABEL_RE.match(line)
                if not m:
                    break
                self._define_label(m.group(1), lineno)
                line = line[m.end():].strip()
            if not line:
                continue
            parts = line.split(None, 1)
            head, rest = parts[0], parts[1] if len(parts) > 1 else ""
            operands = _split_operands(rest)
            if head.startswith("."):
                self._directive(head.lower(), operands, lineno)
            else:
                self._instruction(head.upper(), operands, lineno)

    def _define_label(self, name: str, lineno: int) -> None:
        if name in self.labels or name in self.equs:
            raise DuplicateLabel(f"symbol {name!r} defined twice", lineno)
        self.labels[name] = (self.section, self.offsets[self.section], lineno)

    def _emit(self, item: _Item) -> None:
        self.items.append(item)
        self.offsets[item.section] += item.size

    def _directive(self, name: str, ops: list[str], lineno: int) -> None:
        if name in (".text", ".data"):
            self.section = name[1:]
        elif name == ".equ":
            if len(ops) != 2:
                raise MalformedOperand(".equ takes a name and a value", lineno)
            if ops[0] in self.labels or ops[0] in self.equs:
                raise DuplicateLabel(f"symbol {ops[0]!r} defined twice", lineno)
            self.equs[ops[0]] = self._eval(ops[1], lineno, allow_labels=False)
        elif name == ".word":
            if not ops:
                raise MalformedOperand(".word needs at least one value", lineno)
            for op in ops:
                self._emit(_Item(self.section, self.offsets[self.section], lineno, "word", operands=[op]))
        elif name == ".space":
            n = self._eval(_single(ops, lineno), lineno, allow_labels=False)
            if n < 0 or (self.section == "text" and n % 4):
                raise MalformedOperand(f".space {n} is invalid in .{self.section}", lineno)
            self._emit(_Item(self.section, self.offsets[self.section], lineno, "space", size=n))
        elif name == ".align":
            n = self._eval(_single(ops, lineno), lineno, allow_labels=False)
            if n <= 0 or n & (n - 1):
                raise MalformedOperand(f".align needs a power of two, got {n}", lineno)
            pad = -self.offsets[self.section] % n
            if pad:
                if self.section == "text" and pad % 4:
                    raise MalformedOperand(".align in .text must keep 4-byte alignment", lineno)
                self._emit(_Item(self.section, self.offsets[self.section], lineno, "space", size=pad))
        else:
            raise UnknownMnemonic(f"unknown directive {name}", lineno)

    def _instruction(self, mnemonic: str, ops: list[str], lineno: int) -> None:
        if self.section != "text":
            raise MalformedOperand(f"instruction {mnemonic} outside .text", lineno)
        if mnemonic in PSEUDO:
            self._emit(_Item("text", self.offsets["text"], lineno, "li", mnemonic, ops, PSEUDO[mnemonic]))
            return
        if mnemonic not in Opcode.__members__:
            raise UnknownMnemonic(f"unknown mnemonic {mnemonic!r}", lineno)
        self._emit(_Item("text", self.offsets["text"], lineno, "insn", mnemonic, ops))

    # ── Pass 2: encode ───────────────────────────────────────────────────

    def finalize(self) -> ProgramImage:
        code_size = self.offsets["text"]
        data_base = _align(self.base + code_size, DATA_ALIGN)
        bases = {"text": self.base, "data": data_base}
        for name, (section, offset, _) in self.labels.items():
            self.symbols[name] = bases[section] + offset

        code: list[int] = []
        data = bytearray(self.offsets["data"])
        for item in self.items:
            addr = bases[item.section] + item.offset
            if item.kind == "insn":
                code.append(self._encode(item, addr))
            elif item.kind == "li":
                code.extend(self._encode_li(item))
            elif item.kind == "word":
                value = self._eval(item.operands[0], item.line) & WORD_MASK
                if item.section == "text":
                    code.append(value)
                else:
                    data[item.offset:item.offset + 4] = value.to_bytes(4, "little")
            elif item.section == "text":
                code.extend([0] * (item.size // 4))

        footprint = [(self.base, 4 * len(code))]
        if data:
            footprint.append((data_base, len(data)))
        entry = self.symbols.get("_start", self.base)
        image = ProgramImage(
            code_base=self.base,
            code=tuple(code),
            data_base=data_base,
            data=bytes(data),
            entry=entry,
            symbols=dict(self.symbols),
            footprint=tuple(footprint),
        )
        final = self.symbols.get("__final_bp")
        if final is not None and not image.in_code(final):
            raise AssemblyError("__final_bp must label an instruction in .text", self.labels["__final_bp"][2])
        return image

    def _encode(self, item: _Item, addr: int) -> int:
        op = Opcode[item.mnemonic]
        fmt = FORMATS[op]
        ops, line = item.operands, item.line
        expected = {"N": 0, "RI16": 2, "RR": 2, "RRR": 3, "RRI": 3, "RRS": 3, "CMP": 2,
                    "LD": 2, "ST": 2, "RD": 1, "RS": 1, "BR": 1}[fmt]
        if len(ops) != expected:
            raise MalformedOperand(f"{op.name} takes {expected} operand(s), got {len(ops)}", line)
        if fmt == "N":
            return encode(op)
        if fmt == "RI16":
            imm = self._eval(ops[1], line)
            _check_range(imm, 0, 0xFFFF, op.name, line)
            return encode(op, rd=_reg(ops[0], line), imm=imm)
        if fmt == "RR":
            return encode(op, rd=_reg(ops[0], line), rs1=_reg(ops[1], line))
        if fmt == "RRR":
            return encode(op, rd=_reg(ops[0], line), rs1=_reg(ops[1], line), rs2=_reg(ops[2], line))
        if fmt == "RRI":
            imm = self._eval(ops[2], line)
            _check_range(imm, IMM12_MIN, IMM12_MAX, op.name, line)
            return encode(op, rd=_reg(ops[0], line), rs1=_reg(ops[1], line), imm=imm)
        if fmt == "RRS":
            imm = self._eval(ops[2], line)
            _check_range(imm, 0, 31, op.name, line)
            return encode(op, rd=_reg(ops[0], line), rs1=_reg(ops[1], line), imm=imm)
        if fmt == "CMP":
            return encode(op, rs1=_reg(ops[0], line), rs2=_reg(ops[1], line))
        if fmt in ("LD", "ST"):
            base, offset = self._mem(ops[1], line)
            _check_range(offset, IMM12_MIN, IMM12_MAX, op.name, line)
            if fmt == "LD":
                return encode(op, rd=_reg(ops[0], line), rs1=base, imm=offset)
            return encode(op, rs1=base, rs2=_reg(ops[0], line), imm=offset)
        if fmt == "RD":
            return encode(op, rd=_reg(ops[0], line))
        if fmt == "RS":
            return encode(op, rs1=_reg(ops[0], line))
        target = self._eval(ops[0], line)
        delta = target - (addr + 4)
        if delta % 4:
            raise MalformedOperand(f"branch target 0x{target:x} is not word aligned", line)
        _check_range(delta // 4, IMM24_MIN, IMM24_MAX, op.name, line)
        return encode(op, imm=delta // 4)

    def _encode_li(self, item: _Item) -> list[int]:
        if len(item.operands) != 2:
            raise MalformedOperand("LI takes a register and a value", item.line)
        rd = _reg(item.operands[0], item.line)
        value = self._eval(item.operands[1], item.line)
        _check_range(value, -(1 << 31), WORD_MASK, "LI", item.line)
        value &= WORD_MASK
        return [encode(Opcode.MOVI, rd=rd, imm=value & 0xFFFF), encode(Opcode.MOVHI, rd=rd, imm=value >> 16)]

    def _mem(self, text: str, line: int) -> tuple[int, int]:
        m = _MEM_RE.match(text.strip())
        if not m:
            raise MalformedOperand(f"expected [Rn+imm], got {text!r}", line)
        base = _reg(m.group(1), line)
        offset = self._eval(m.group(3), line) if m.group(3) else 0
        return base, -offset if m.group(2) == "-" else offset

    # ── Expressions ──────────────────────────────────────────────────────

    def _eval(self, text: str, line: int, allow_labels: bool = True) -> int:
        text = text.strip()
        if not text:
            raise MalformedOperand("missing value", line)
        pos, total, first = 0, 0, True
        while pos < len(text):
            m = _TERM_RE.match(text, pos)
            if not m or m.end() == pos or (not first and not m.group(1)):
                raise MalformedOperand(f"cannot parse expression {text!r}", line)
            value = self._term(m.group(2), line, allow_labels)
            total += -value if m.group(1) == "-" else value
            pos, first = m.end(), False
        return total

    def _term(self, tok: str, line: int, allow_labels: bool) -> int:
        if tok[0].isdigit():
            return int(tok.replace("_", ""), 0)
        if tok in self.equs:
            return self.equs[tok]
        if allow_labels and tok in self.symbols:
            return self.symbols[tok]
        raise UndefinedLabel(f"undefined symbol {tok!r}", line)


def _split_operands(rest: str) -> list[str]:
    rest = rest.strip()
    return [p.strip() for p in rest.split(",")] if rest else []


def _single(ops: list[str], line: int) -> str:
    if len(ops) != 1:
        raise MalformedOperand("directive takes exactly one value", line)
    return ops[0]


def _reg(text: str, line: int) -> int:
    tok = text.strip().upper()
    if tok in _REG_ALIASES:
        return _REG_ALIASES[tok]
    if tok.startswith("R") and tok[1:].isdigit() and 0 <= int(tok[1:]) <= 15:
        return int(tok[1:])
    raise MalformedOperand(f"expected a register R0..R15, got {text!r}", line)


def _check_range(value: int, lo: int, hi: int, what: str, line: int) -> None:
    if not lo <= value <= hi:
        raise ImmediateOutOfRange(f"{what}: immediate {value} outside {lo}..{hi}", line)


def _align(value: int, n: int) -> int:
    return (value + n - 1) & ~(n - 1)


def assemble(source: str, base: int = 0) -> ProgramImage:
    """Assemble ``source`` into a :class:`ProgramImage`.

    Raises an :class:`~app.errors.AssemblyError` subclass carrying the
    offending line number on unknown mnemonics, undefined labels, malformed
    operands and out-of-range immediates.
    """
    if base % 4:
        raise AssemblyError(f"code base 0x{base:x} must be 4-byte aligned")
    asm = _Assembler(base)
    asm.first_pass(source)
    image = asm.finalize()
    logger.debug(
        "assembled %d words of code, %d bytes of data, %d symbols",
        len(image.code), len(image.data), len(image.symbols),
    )
    return image
