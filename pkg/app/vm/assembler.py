"""
Assembler for the toy 8-bit VM.

Grammar, one statement per line:
    <opcode> [<operand>[, <operand>]]    [; comment]
    ;@<tag>                                annotation of the next instruction boundary (e.g. `;@noise-slot`)
    ; comment

Operands:
    rN                  register, N in 0-31
    0xNN | NNN          8-bit immediate (hexadecimal or decimal)
    0xAAAA[rI]          memory address, optionally indexed by register rI (ld source, st destination)

Forms:
    mov rD, rS | mov rD, imm      ldi rD, imm        ld rD, mem        st mem, rS
    eor/and/or/add/sub rD, rS     ori rD, imm        in rD, port       nop | trigger_high | trigger_low
"""

from dataclasses import replace
import re

from app.errors import AssemblyError
from app.vm.models import OPERAND_FORMS, Instruction, Program
from app.vm.typings import OperandKind

ANNOTATION_PREFIX = ";@"

REGISTER_RE = re.compile(r"^r(\d+)$")
MEMORY_RE = re.compile(r"^(0x[0-9a-f]+|\d+)(?:\[(r\d+)\])?$")


def _register(token: str) -> int:
    match = REGISTER_RE.match(token)
    if not match:
        raise ValueError(f"expected a register, got `{token}`")
    return int(match.group(1))


def _number(token: str) -> int:
    try:
        return int(token, 0)
    except ValueError:
        raise ValueError(f"expected a number, got `{token}`") from None


def _memory(token: str) -> tuple[int, int | None]:
    match = MEMORY_RE.match(token)
    if not match:
        raise ValueError(f"expected a memory operand, got `{token}`")
    address, index = match.groups()
    return _number(address), _register(index) if index else None


def parse_instruction(text: str) -> Instruction:
    """Parse a single statement (no comment, no annotation).

    Raises:
        ValueError: The statement does not follow the grammar.
    """
    opcode, _, rest = text.strip().lower().partition(" ")
    operands = [x.strip() for x in rest.split(",")] if rest.strip() else []
    if opcode not in OPERAND_FORMS:
        raise ValueError(f"unknown opcode `{opcode}`")
    forms = OPERAND_FORMS[opcode]

    if forms == ("none",):
        if operands:
            raise ValueError(f"`{opcode}` takes no operands")
        return Instruction(opcode)
    if len(operands) != 2:
        raise ValueError(f"`{opcode}` expects 2 operands, got {len(operands)}")

    if opcode == "st":
        address, index = _memory(operands[0])
        return Instruction(opcode, dst=_register(operands[1]), src=address, src_kind="mem", index=index)
    dst = _register(operands[0])
    if forms == ("mem",):
        address, index = _memory(operands[1])
        return Instruction(opcode, dst=dst, src=address, src_kind="mem", index=index)
    kind: OperandKind = "reg" if REGISTER_RE.match(operands[1]) else "imm"
    value = _register(operands[1]) if kind == "reg" else _number(operands[1])
    return Instruction(opcode, dst=dst, src=value, src_kind=kind)


def assemble(source: str) -> Program:
    """Assemble source text into a `Program`.

    Annotations are recorded at the index of the instruction that follows them.

    Args:
        source (str): Assembly text.

    Raises:
        AssemblyError: Unknown opcode, bad register, out-of-range immediate or malformed operands, with line number.

    Returns:
        Program: The assembled program.
    """
    instructions: list[Instruction] = []
    annotations: list[tuple[int, str]] = []
    for line_number, line in enumerate(source.splitlines(), start=1):
        line = line.strip()
        # Zero-based index of the next instruction: after `mov` then `;@noise-slot`, the slot is 1, the instruction
        # counted second from 1
        if line.startswith(ANNOTATION_PREFIX):
            annotations.append((len(instructions), line.split()[0]))
            continue
        statement = line.split(";", 1)[0].strip()
        if not statement:
            continue
        try:
            instructions.append(parse_instruction(statement))
        except ValueError as e:
            raise AssemblyError(str(e), line=line_number) from None
    return Program(instructions=instructions, annotations=annotations, source_text=source)


def disassemble(program: Program) -> str:
    """Render a program as assembly text, annotations included."""
    lines = []
    pending = sorted(program.annotations, key=lambda x: x[0])
    for index, instruction in enumerate(program.instructions):
        lines.extend(tag for i, tag in pending if i == index)
        lines.append(str(instruction))
    lines.extend(tag for i, tag in pending if i == len(program.instructions))
    return "\n".join(lines) + "\n"


def insert_instruction(program: Program, position: int, instruction: Instruction) -> Program:
    """New program with `instruction` inserted right after the instruction at `position`."""
    instructions = program.instructions[: position + 1] + [instruction] + program.instructions[position + 1 :]
    annotations = [(i + (i > position), tag) for i, tag in program.annotations]
    inserted = replace(program, instructions=instructions, annotations=annotations)
    inserted.source_text = disassemble(inserted)
    return inserted
