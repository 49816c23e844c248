"""
Generation of the first AES-128 round as VM assembly.

Memory map:
    STATE  0x0000  16-byte plaintext in, round-one state out
    KEY    0x0010  16-byte key
    SBOX   0x0100  256-byte S-box table
    XTIME  0x0200  256-byte xtime table

AddRoundKey and SubBytes run byte by byte into the state registers r4-r19; ShiftRows is folded into the choice of the
destination register. MixColumns reads the xtime table, so no instruction depends on a data-dependent branch and the
cycle count is the same for every input. The reserved scratch register is never used.
"""

from pydantic import BaseModel, Field

from app.aes.reference import SBOX, XTIME, shift_rows_position
from app.vm.models import MachineState

STATE_ADDRESS = 0x0000
KEY_ADDRESS = 0x0010
SBOX_ADDRESS = 0x0100
XTIME_ADDRESS = 0x0200

STATE_REGISTERS = list(range(4, 20))
T, TMP, OUT = 20, 21, 22


class CodegenOptions(BaseModel):
    scratch_register: int = Field(24, ge=0, le=31, description="Register left free for noise instructions")
    comments: bool = True


def first_round_program(options: CodegenOptions | None = None) -> str:
    """Unannotated assembly of AddRoundKey, SubBytes, ShiftRows and MixColumns, between the trigger pair."""
    options = options or CodegenOptions()
    used = set(STATE_REGISTERS) | {0, 1, T, TMP, OUT}
    if options.scratch_register in used:
        raise ValueError(f"r{options.scratch_register} is used by the AES round and cannot be reserved")

    lines = []
    comment = (lambda text: lines.append(f"; {text}")) if options.comments else (lambda text: None)

    lines.append("trigger_high")
    comment("AddRoundKey + SubBytes, ShiftRows folded into the destination register")
    for i in range(16):
        destination = STATE_REGISTERS[shift_rows_position(i)]
        lines.append(f"ld r0, 0x{STATE_ADDRESS + i:04x}")
        lines.append(f"ld r1, 0x{KEY_ADDRESS + i:04x}")
        lines.append("eor r0, r1")
        lines.append(f"ld r{destination}, 0x{SBOX_ADDRESS:04x}[r0]")

    for c in range(4):
        comment(f"MixColumns, column {c}")
        a = STATE_REGISTERS[4 * c : 4 * c + 4]
        lines.append(f"mov r{T}, r{a[0]}")
        lines.extend(f"eor r{T}, r{a[k]}" for k in (1, 2, 3))
        for k in range(4):
            lines.append(f"mov r{TMP}, r{a[k]}")
            lines.append(f"eor r{TMP}, r{a[(k + 1) % 4]}")
            lines.append(f"ld r{OUT}, 0x{XTIME_ADDRESS:04x}[r{TMP}]")
            lines.append(f"eor r{OUT}, r{T}")
            lines.append(f"eor r{OUT}, r{a[k]}")
            lines.append(f"st 0x{STATE_ADDRESS + 4 * c + k:04x}, r{OUT}")
    lines.append("trigger_low")
    return "\n".join(lines) + "\n"


def memory_image(plaintext: bytes, key: bytes) -> dict[int, bytes]:
    """Initial memory of a run of the generated program."""
    return {
        STATE_ADDRESS: bytes(plaintext),
        KEY_ADDRESS: bytes(key),
        SBOX_ADDRESS: SBOX.tobytes(),
        XTIME_ADDRESS: XTIME.tobytes(),
    }


def round_output(state: MachineState) -> bytes:
    return state.read(STATE_ADDRESS, 16)


def sbox_write_indices(byte_index: int) -> list[int]:
    """Instruction indices (in the generated program) writing Sbox(p[b] ^ k[b]) to a register."""
    lookup = 1 + 4 * byte_index + 3
    position = shift_rows_position(byte_index)
    column, k = divmod(position, 4)
    column_start = 1 + 16 * 4 + column * (4 + 4 * 6)
    writes = [lookup, column_start + 4 + k * 6]
    if k == 0:
        writes.insert(1, column_start)
    return writes

