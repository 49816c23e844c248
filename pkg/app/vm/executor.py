"""
Cycle-accurate execution of VM programs with a Hamming-weight power model.

Every executed cycle emits `samples_per_cycle` samples of
    hw_gain * HW(value written this cycle) + baseline + N(0, noise_sigma)
A write lands on the last cycle of its instruction; the other cycles of a multi-cycle instruction leak HW 0.
trigger_low cycles are forced to the sentinel level, noise-free.

The capture window opens on the cycle following the first trigger_high (cycle 0 without one) and closes after the
first trigger_low that follows (the end of the run without one).
"""

import logging
from typing import Mapping, Optional

import numpy as np

from app.errors import ExecutionError
from app.utils import HAMMING_WEIGHT
from app.vm.models import MEMORY_SIZE, REGISTER_COUNT, DeviceConfig, ExecutionEvent, Instruction, MachineState, Program
from app.vm.models import RawTrace

logger = logging.getLogger(__name__)

MemoryInit = Mapping[int, int] | Mapping[int, bytes]


class Machine:
    """Register file, memory and `op_<mnemonic>` handlers. Each handler returns the value it writes, if any."""

    def __init__(self, memory_init: Optional[MemoryInit], config: DeviceConfig):
        self.config = config
        self.registers: list[int] = [0] * REGISTER_COUNT
        self.memory = bytearray(MEMORY_SIZE)
        self.initialized = bytearray(MEMORY_SIZE)
        for address, value in (memory_init or {}).items():
            chunk = bytes([value]) if isinstance(value, int) else bytes(value)
            self.memory[address : address + len(chunk)] = chunk
            self.initialized[address : address + len(chunk)] = b"\x01" * len(chunk)

    def _address(self, instruction: Instruction) -> int:
        offset = self.registers[instruction.index] if instruction.index is not None else 0
        return (instruction.src + offset) % MEMORY_SIZE

    def _operand(self, instruction: Instruction) -> int:
        return self.registers[instruction.src] if instruction.src_kind == "reg" else instruction.src

    def _write(self, instruction: Instruction, value: int) -> int:
        value &= 0xFF
        self.registers[instruction.dst] = value
        return value

    def op_mov(self, x: Instruction) -> int:
        return self._write(x, self._operand(x))

    def op_ldi(self, x: Instruction) -> int:
        return self._write(x, x.src)

    def op_ld(self, x: Instruction) -> int:
        address = self._address(x)
        if not self.initialized[address] and self.config.uninitialized == "error":
            raise ExecutionError(f"read of uninitialized memory at 0x{address:04x}")
        return self._write(x, self.memory[address])

    def op_st(self, x: Instruction) -> Optional[int]:
        address = self._address(x)
        value = self.registers[x.dst]
        self.memory[address] = value
        self.initialized[address] = 1
        return value if self.config.store_leakage else None

    def op_eor(self, x: Instruction) -> int:
        return self._write(x, self.registers[x.dst] ^ self._operand(x))

    def op_and(self, x: Instruction) -> int:
        return self._write(x, self.registers[x.dst] & self._operand(x))

    def op_or(self, x: Instruction) -> int:
        return self._write(x, self.registers[x.dst] | self._operand(x))

    op_ori = op_or

    def op_add(self, x: Instruction) -> int:
        return self._write(x, self.registers[x.dst] + self._operand(x))

    def op_sub(self, x: Instruction) -> int:
        return self._write(x, self.registers[x.dst] - self._operand(x))

    def op_in(self, x: Instruction) -> int:
        return self._write(x, self.config.in_port_value)

    def op_nop(self, x: Instruction) -> None:
        return None

    op_trigger_high = op_nop
    op_trigger_low = op_nop


def execute(
    program: Program, memory_init: Optional[MemoryInit], config: DeviceConfig
) -> tuple[RawTrace, MachineState]:
    """Run a program and capture the power samples of its trigger window.

    Args:
        program (Program): Straight-line program to run.
        memory_init (Optional[MemoryInit]): Initial memory, as `{address: byte}` or `{address: bytes}`.
        config (DeviceConfig): Device and power-model parameters, `rng_seed` included.

    Raises:
        ExecutionError: Cycle budget exceeded or, with `uninitialized="error"`, read of uninitialized memory.

    Returns:
        tuple[RawTrace, MachineState]: Captured trace and final machine state, execution log included.
    """
    machine = Machine(memory_init, config)
    weights: list[int] = []  # HW per cycle
    sentinels: list[int] = []  # cycles of trigger_low
    events: list[ExecutionEvent] = []
    window_start: Optional[int] = None if program.index_of("trigger_high") != -1 else 0
    window_end: Optional[int] = None

    cycle = 0
    for index, instruction in enumerate(program.instructions):
        if cycle + instruction.cycles > config.cycle_budget:
            raise ExecutionError(f"cycle budget of {config.cycle_budget} exceeded at instruction {index}")
        value = getattr(machine, f"op_{instruction.opcode}")(instruction)
        events.append(ExecutionEvent(index=index, start_cycle=cycle, value=value))
        weights.extend([0] * (instruction.cycles - 1))
        weights.append(int(HAMMING_WEIGHT[value]) if value is not None else 0)

        if instruction.opcode == "trigger_high" and window_start is None:
            window_start = cycle + instruction.cycles
        elif instruction.opcode == "trigger_low":
            sentinels.append(cycle)
            if window_end is None and window_start is not None:
                window_end = cycle + instruction.cycles
        cycle += instruction.cycles

    spc = config.samples_per_cycle
    rng = np.random.default_rng(config.rng_seed)
    samples = np.repeat(config.hw_gain * np.asarray(weights, dtype=np.float64) + config.baseline, spc)
    if config.noise_sigma > 0:
        samples += rng.normal(0.0, config.noise_sigma, size=len(samples))
    for sentinel in sentinels:
        samples[sentinel * spc : (sentinel + 1) * spc] = config.trigger_low_level

    start = (window_start if window_start is not None else cycle) * spc
    end = (window_end if window_end is not None else cycle) * spc
    trace = RawTrace(samples=samples[start:end], cycle_count=cycle, trigger_window=(start, max(start, end)))
    state = MachineState(registers=machine.registers, memory=machine.memory, cycle_count=cycle, events=events)
    return trace, state
