from .assembler import ProgramImage, assemble
from .machine import MachineState, Status, StopReason, load_program, read_output, run_until, step
