from typing import List, Optional

from pydantic import BaseModel

from failscope.vm.isa import ALU_OPCODES, NUM_REGISTERS, Instruction, Opcode, Program

MAX_PORT = 255


class Defect(BaseModel):
    """One violated program invariant, located by block and instruction offset when applicable."""

    message: str
    block: Optional[int] = None
    offset: Optional[int] = None

    def __str__(self) -> str:
        if self.block is None:
            return self.message
        if self.offset is None:
            return f"L{self.block}: {self.message}"
        return f"L{self.block}+{self.offset}: {self.message}"


class ValidationReport(BaseModel):
    defects: List[Defect] = []

    @property
    def ok(self) -> bool:
        return not self.defects


def _register_defects(ins: Instruction) -> List[str]:
    messages = []
    for name in ("dst", "src", "src2", "base"):
        value = getattr(ins, name)
        if value is not None and not 0 <= value < NUM_REGISTERS:
            messages.append(f"register {name} r{value} out of range")
    return messages


def _operand_defects(ins: Instruction, program: Program) -> List[str]:
    op = ins.opcode
    messages = []

    def require(*names: str) -> None:
        for name in names:
            if getattr(ins, name) is None:
                messages.append(f"{op.value} is missing operand {name}")

    if op is Opcode.LOADI:
        require("dst", "imm")
    elif op is Opcode.LOAD:
        require("dst", "addr")
    elif op is Opcode.STORE:
        require("src", "addr")
    elif op is Opcode.MOV:
        require("dst", "src")
    elif op in ALU_OPCODES:
        require("dst", "src")
        if ins.src2 is None and ins.imm is None:
            messages.append(f"{op.value} is missing its right operand")
    elif op is Opcode.CMP:
        require("src")
        if ins.src2 is None and ins.imm is None:
            messages.append("CMP is missing its right operand")
    elif op is Opcode.BR:
        require("cond", "target")
    elif op is Opcode.JMP:
        require("target")
    elif op is Opcode.IN:
        require("dst", "port")
    elif op is Opcode.OUT:
        require("src", "port")
    elif op is Opcode.SLEEP:
        require("duration")

    if op in (Opcode.LOAD, Opcode.STORE) and ins.addr is not None:
        if ins.base is None and not 0 <= ins.addr < program.memory_size:
            messages.append(f"address {ins.addr} out of range")
        elif ins.base is not None and ins.addr < 0:
            messages.append(f"negative address offset {ins.addr}")
    if ins.target is not None and not 0 <= ins.target < len(program.blocks):
        messages.append(f"branch target {ins.target} out of range")
    if ins.port is not None and not 0 <= ins.port <= MAX_PORT:
        messages.append(f"port {ins.port} out of range")
    if ins.duration is not None and ins.duration < 0:
        messages.append(f"negative sleep duration {ins.duration}")
    return messages + _register_defects(ins)


def validate(program: Program) -> ValidationReport:
    """Check every structural invariant of a program.

    Args:
        program: The program to check.

    Returns:
        A report listing each violation with its block and instruction location. Defects are data; this never raises.
    """
    defects: List[Defect] = []
    if program.memory_size < 0:
        defects.append(Defect(message="negative memory size"))
    if not program.blocks:
        defects.append(Defect(message="program has no blocks"))
        return ValidationReport(defects=defects)
    if not 0 <= program.entry_block < len(program.blocks):
        defects.append(Defect(message=f"entry block {program.entry_block} out of range"))
    for core in program.core_blocks or ():
        if not 0 <= core < len(program.blocks):
            defects.append(Defect(message=f"core block {core} out of range"))

    expected_addr = program.base_addr
    for index, block in enumerate(program.blocks):
        if block.id != index:
            defects.append(Defect(message=f"block id {block.id} does not match its position", block=index))
        if block.start_addr != expected_addr:
            defects.append(Defect(message="code addresses are not contiguous", block=index))
        expected_addr = block.start_addr + len(block.instructions)
        if not block.instructions:
            defects.append(Defect(message="empty block", block=index))
            continue
        last = len(block.instructions) - 1
        for offset, ins in enumerate(block.instructions):
            for message in _operand_defects(ins, program):
                defects.append(Defect(message=message, block=index, offset=offset))
            if ins.is_terminator and offset != last:
                message = f"{ins.opcode.value} before the end of the block"
                defects.append(Defect(message=message, block=index, offset=offset))
        final = block.instructions[last]
        falls_through = final.opcode not in (Opcode.JMP, Opcode.HALT)
        if falls_through and index == len(program.blocks) - 1:
            defects.append(Defect(message="control falls through past the last block", block=index, offset=last))
    return ValidationReport(defects=defects)
