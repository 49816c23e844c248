from typing import Literal


Opcode = Literal[
    "mov", "ldi", "ld", "st", "eor", "and", "or", "ori", "add", "sub", "in", "nop", "trigger_high", "trigger_low"
]
OperandKind = Literal["reg", "imm", "mem", "none"]
UninitializedPolicy = Literal["zero", "error"]
