from enum import Enum
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel

NUM_REGISTERS = 16
DEFAULT_BASE_ADDRESS = 0x1000


class Opcode(str, Enum):
    LOADI = "LOADI"
    LOAD = "LOAD"
    STORE = "STORE"
    MOV = "MOV"
    ADD = "ADD"
    SUB = "SUB"
    MUL = "MUL"
    DIV = "DIV"
    CMP = "CMP"
    BR = "BR"
    JMP = "JMP"
    IN = "IN"
    OUT = "OUT"
    SLEEP = "SLEEP"
    NOP = "NOP"
    HALT = "HALT"


ALU_OPCODES = frozenset({Opcode.ADD, Opcode.SUB, Opcode.MUL, Opcode.DIV})
MEMORY_OPCODES = frozenset({Opcode.LOAD, Opcode.STORE})
TERMINATORS = frozenset({Opcode.BR, Opcode.JMP, Opcode.HALT})


class Condition(str, Enum):
    """Branch condition evaluated against the comparison flag."""

    EQ = "EQ"
    NE = "NE"
    LT = "LT"
    LE = "LE"
    GT = "GT"
    GE = "GE"

    def inverted(self) -> "Condition":
        return _INVERSE[self]


_INVERSE: Dict[Condition, Condition] = {
    Condition.EQ: Condition.NE,
    Condition.NE: Condition.EQ,
    Condition.LT: Condition.GE,
    Condition.GE: Condition.LT,
    Condition.GT: Condition.LE,
    Condition.LE: Condition.GT,
}


class Instruction(BaseModel):
    """A single virtual machine instruction.

    Operand fields not used by `opcode` stay `None`. Memory operands are either absolute (`addr` set, `base` unset) or
    register-indirect (`base` register plus `addr` offset).
    """

    class Config:
        frozen = True

    opcode: Opcode
    dst: Optional[int] = None
    """Destination register of LOADI, LOAD, MOV, ALU operations and IN."""
    src: Optional[int] = None
    """First source register: the stored register of STORE, the left operand of ALU operations and CMP."""
    src2: Optional[int] = None
    """Right operand register of ALU operations and CMP."""
    imm: Optional[int] = None
    """Immediate of LOADI, or the right operand of ALU operations and CMP when `src2` is unset."""
    addr: Optional[int] = None
    """Absolute address, or the offset added to `base`."""
    base: Optional[int] = None
    """Base register of a register-indirect memory operand."""
    cond: Optional[Condition] = None
    target: Optional[int] = None
    """Block index jumped to by BR and JMP."""
    port: Optional[int] = None
    duration: Optional[float] = None
    """Simulated seconds slept by SLEEP."""

    @property
    def is_terminator(self) -> bool:
        return self.opcode in TERMINATORS

    @property
    def is_register_addressed(self) -> bool:
        """Whether this is a LOAD or STORE whose address is only known at run time."""
        return self.opcode in MEMORY_OPCODES and self.base is not None


class BasicBlock(BaseModel):
    """Single-entry straight-line run of instructions."""

    class Config:
        frozen = True

    id: int
    instructions: Tuple[Instruction, ...]
    start_addr: int
    """Flat code address of the first instruction."""

    @property
    def has_register_addressing(self) -> bool:
        return any(ins.is_register_addressed for ins in self.instructions)


class ProgramMetadata(BaseModel):
    class Config:
        frozen = True

    name: str = "program"
    version: str = "v0"


class Program(BaseModel):
    """A controller program: an ordered list of basic blocks laid out contiguously from `base_addr`."""

    class Config:
        frozen = True

    blocks: Tuple[BasicBlock, ...]
    memory_size: int = 0
    entry_block: int = 0
    base_addr: int = DEFAULT_BASE_ADDRESS
    metadata: ProgramMetadata = ProgramMetadata()
    core_blocks: Optional[Tuple[int, ...]] = None
    """Blocks eligible for mutation. `None` designates every block."""

    @classmethod
    def from_blocks(
        cls,
        blocks: List[List[Instruction]],
        memory_size: int = 0,
        base_addr: int = DEFAULT_BASE_ADDRESS,
        metadata: Optional[ProgramMetadata] = None,
        core_blocks: Optional[Tuple[int, ...]] = None,
        entry_block: int = 0,
    ) -> "Program":
        """Lay out instruction lists as contiguous blocks starting at `base_addr`.

        Args:
            blocks: Instructions of each block, in block-index order.
            memory_size: Number of data memory cells.
            base_addr: Flat code address of the first instruction.
            metadata: Program name and version tag.
            core_blocks: Blocks eligible for mutation.
            entry_block: Block execution starts in.

        Examples:
            ```python
            program = Program.from_blocks(
                [[Instruction(opcode=Opcode.LOADI, dst=0, imm=1), Instruction(opcode=Opcode.HALT)]]
            )
            ```
        """
        laid_out = []
        addr = base_addr
        for index, instructions in enumerate(blocks):
            laid_out.append(BasicBlock(id=index, instructions=tuple(instructions), start_addr=addr))
            addr += len(instructions)
        return cls(
            blocks=tuple(laid_out),
            memory_size=memory_size,
            entry_block=entry_block,
            base_addr=base_addr,
            metadata=metadata or ProgramMetadata(),
            core_blocks=core_blocks,
        )

    def with_blocks(self, blocks: List[List[Instruction]]) -> "Program":
        """Return a copy of this program with the given block contents, re-laid out from the same base address."""
        return Program.from_blocks(
            blocks,
            memory_size=self.memory_size,
            base_addr=self.base_addr,
            metadata=self.metadata,
            core_blocks=self.core_blocks,
            entry_block=self.entry_block,
        )

    def block_instructions(self) -> List[List[Instruction]]:
        return [list(block.instructions) for block in self.blocks]

    @property
    def instruction_count(self) -> int:
        return sum(len(block.instructions) for block in self.blocks)

    @property
    def mutable_blocks(self) -> Tuple[int, ...]:
        if self.core_blocks is None:
            return tuple(range(len(self.blocks)))
        return self.core_blocks
