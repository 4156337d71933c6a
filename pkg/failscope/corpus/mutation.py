import logging
from enum import Enum
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel

from failscope.exceptions import ProgramValidationException
from failscope.vm.isa import ALU_OPCODES, MEMORY_OPCODES, Instruction, Opcode, Program
from failscope.vm.validate import validate

logger = logging.getLogger(__name__)

Site = Tuple[int, int]


class MutationKind(str, Enum):
    ARITH_SWAP = "arith_swap"
    """ADD and SUB swapped, MUL and DIV swapped."""
    CONST_PERTURB = "const_perturb"
    """An immediate moved by +1 or -1, doubled, or zeroed."""
    BRANCH_FLIP = "branch_flip"
    """A branch condition replaced by its negation."""
    INSTR_DELETE = "instr_delete"
    """An instruction replaced by NOP."""
    ADDR_PERTURB = "addr_perturb"
    """The address or offset of a LOAD or STORE moved by one."""


_ARITH_SWAPS: Dict[Opcode, Opcode] = {
    Opcode.ADD: Opcode.SUB,
    Opcode.SUB: Opcode.ADD,
    Opcode.MUL: Opcode.DIV,
    Opcode.DIV: Opcode.MUL,
}
_CONST_VARIANTS = ("+1", "-1", "x2", "zero")


class MutationOperator(BaseModel):
    """One operator applied at one instruction."""

    class Config:
        frozen = True

    kind: MutationKind
    site: Site
    """Block index and instruction offset."""
    variant: str
    """Which application of `kind`, e.g. `ADD->SUB`, `+1` or `EQ->NE`."""

    def __str__(self) -> str:
        block, offset = self.site
        return f"{self.kind.value}({self.variant})@L{block}+{offset}"


class Mutant(BaseModel):
    class Config:
        frozen = True

    mutant_id: str
    operator: Optional[MutationOperator] = None
    """`None` for the unmutated program."""
    program: Program


def _perturb_constant(value: int, variant: str) -> int:
    if variant == "+1":
        return value + 1
    if variant == "-1":
        return value - 1
    if variant == "x2":
        return value * 2
    return 0


def applications(ins: Instruction) -> List[Tuple[MutationKind, str, Instruction]]:
    """Every single-operator rewrite of one instruction.

    Constant perturbations that would leave the immediate unchanged (doubling or zeroing a zero) are not
    applications. NOP has none.

    Returns:
        `(kind, variant, rewritten instruction)` triples in `MutationKind` order.
    """
    rewrites: List[Tuple[MutationKind, str, Instruction]] = []
    op = ins.opcode
    if op in _ARITH_SWAPS:
        swapped = _ARITH_SWAPS[op]
        variant = f"{op.value}->{swapped.value}"
        rewrites.append((MutationKind.ARITH_SWAP, variant, ins.copy(update={"opcode": swapped})))
    has_immediate = op is Opcode.LOADI or ((op in ALU_OPCODES or op is Opcode.CMP) and ins.src2 is None)
    if has_immediate:
        for variant in _CONST_VARIANTS:
            value = _perturb_constant(ins.imm, variant)  # type: ignore[arg-type]
            if value != ins.imm:
                rewrites.append((MutationKind.CONST_PERTURB, variant, ins.copy(update={"imm": value})))
    if op is Opcode.BR:
        inverted = ins.cond.inverted()  # type: ignore[union-attr]
        rewrites.append(
            (MutationKind.BRANCH_FLIP, f"{ins.cond.value}->{inverted.value}", ins.copy(update={"cond": inverted}))
        )
    if op is not Opcode.NOP:
        rewrites.append((MutationKind.INSTR_DELETE, "NOP", Instruction(opcode=Opcode.NOP)))
    if op in MEMORY_OPCODES:
        for variant, delta in (("+1", 1), ("-1", -1)):
            rewrites.append((MutationKind.ADDR_PERTURB, variant, ins.copy(update={"addr": ins.addr + delta})))
    return rewrites


def count_applications(program: Program) -> int:
    """Number of candidate mutants of `program`, valid or not."""
    return sum(
        len(applications(ins)) for index in program.mutable_blocks for ins in program.blocks[index].instructions
    )


def enumerate_mutants(program: Program, prefix: str = "m") -> List[Mutant]:
    """Apply every operator at every applicable site of the mutable blocks.

    Each mutant carries exactly one rewrite. Rewrites are tried block by block, instruction by instruction, in
    `MutationKind` order; candidates failing `validate` are logged and left out. Mutant ids number the valid mutants in
    that order.

    Args:
        program: A valid program.
        prefix: Prefix of the generated mutant ids.

    Returns:
        The valid mutants.

    Raises:
        ProgramValidationException: If `program` itself is invalid.
    """
    report = validate(program)
    if not report.ok:
        raise ProgramValidationException(report.defects)
    mutants: List[Mutant] = []
    candidates = 0
    blocks = program.block_instructions()
    for block_index in program.mutable_blocks:
        for offset, ins in enumerate(blocks[block_index]):
            for kind, variant, rewritten in applications(ins):
                candidates += 1
                operator = MutationOperator(kind=kind, site=(block_index, offset), variant=variant)
                mutated = [list(instructions) for instructions in blocks]
                mutated[block_index][offset] = rewritten
                mutant_program = program.with_blocks(mutated)
                mutant_report = validate(mutant_program)
                if not mutant_report.ok:
                    defects = "; ".join(str(defect) for defect in mutant_report.defects)
                    logger.debug("discarding %s: %s", operator, defects)
                    continue
                mutant_id = f"{prefix}{len(mutants):04d}"
                mutants.append(Mutant(mutant_id=mutant_id, operator=operator, program=mutant_program))
    logger.info("%d of %d candidate mutants are valid", len(mutants), candidates)
    return mutants
