from .assembly import format_program, load_program, parse_program
from .isa import BasicBlock, Condition, Instruction, Opcode, Program, ProgramMetadata
from .machine import (
    ExecutionHooks,
    ExecutionState,
    Flag,
    Machine,
    PortHandler,
    ScriptedPorts,
    Status,
    run,
    step,
)
from .validate import Defect, ValidationReport, validate

__all__ = [
    "BasicBlock",
    "Condition",
    "Defect",
    "ExecutionHooks",
    "ExecutionState",
    "Flag",
    "Instruction",
    "Machine",
    "Opcode",
    "PortHandler",
    "Program",
    "ProgramMetadata",
    "ScriptedPorts",
    "Status",
    "ValidationReport",
    "format_program",
    "load_program",
    "parse_program",
    "run",
    "step",
    "validate",
]
