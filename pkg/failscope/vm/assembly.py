"""Textual assembly format.

```
.name controller        # directives come before the first label
.version v1
.memory 16
.base 0x1000
.core L1 L2             # optional: blocks eligible for mutation
L0:
    LOADI r0, 5         # immediates are bare integers
    LOAD  r1, @3        # absolute address
    STORE r1, [r2+4]    # register-indirect address
    ADD   r0, r0, r1
    CMP   r0, 10
    BR    LT, L0
L1:
    OUT   8, r0
    SLEEP 0.1
    HALT
```
"""
import re
from pathlib import Path
from typing import TYPE_CHECKING, Dict, List, Optional, Tuple, Union

from failscope.exceptions import AssemblyParseException, ProgramValidationException
from failscope.vm.isa import (
    ALU_OPCODES,
    DEFAULT_BASE_ADDRESS,
    Condition,
    Instruction,
    Opcode,
    Program,
    ProgramMetadata,
)
from failscope.vm.validate import validate

if TYPE_CHECKING:
    from failscope.vm.isa import BasicBlock

_LABEL = re.compile(r"^L(\d+):$")
_REGISTER = re.compile(r"^r(\d+)$", re.IGNORECASE)
_TARGET = re.compile(r"^L(\d+)$")
_ABSOLUTE = re.compile(r"^@(-?\d+)$")
_INDIRECT = re.compile(r"^\[\s*r(\d+)\s*(?:\+\s*(-?\d+)\s*)?\]$", re.IGNORECASE)
_INTEGER = re.compile(r"^-?(?:0x[0-9a-f]+|0|[1-9]\d*)$", re.IGNORECASE)


class _LineParser:
    def __init__(self, line_number: int) -> None:
        self.line_number = line_number

    def fail(self, message: str) -> AssemblyParseException:
        return AssemblyParseException(message, self.line_number)

    def register(self, token: str) -> int:
        match = _REGISTER.match(token)
        if not match:
            raise self.fail(f"expected a register, got {token!r}")
        return int(match.group(1))

    def integer(self, token: str) -> int:
        if not _INTEGER.match(token):
            raise self.fail(f"expected an integer, got {token!r}")
        return int(token, 0)

    def register_or_immediate(self, token: str) -> Dict[str, int]:
        if _REGISTER.match(token):
            return {"src2": self.register(token)}
        return {"imm": self.integer(token)}

    def memory(self, token: str) -> Dict[str, Optional[int]]:
        absolute = _ABSOLUTE.match(token)
        if absolute:
            return {"addr": int(absolute.group(1)), "base": None}
        indirect = _INDIRECT.match(token)
        if indirect:
            return {"base": int(indirect.group(1)), "addr": int(indirect.group(2) or 0)}
        raise self.fail(f"expected a memory operand, got {token!r}")

    def target(self, token: str) -> int:
        match = _TARGET.match(token)
        if not match:
            raise self.fail(f"expected a block label, got {token!r}")
        return int(match.group(1))

    def condition(self, token: str) -> Condition:
        try:
            return Condition(token.upper())
        except ValueError as e:
            raise self.fail(f"unknown branch condition {token!r}") from e

    def instruction(self, mnemonic: str, operands: List[str]) -> Instruction:  # pylint: disable=R0911
        try:
            opcode = Opcode(mnemonic.upper())
        except ValueError as e:
            raise self.fail(f"unknown mnemonic {mnemonic!r}") from e

        arity = {
            Opcode.LOADI: 2,
            Opcode.LOAD: 2,
            Opcode.STORE: 2,
            Opcode.MOV: 2,
            Opcode.CMP: 2,
            Opcode.BR: 2,
            Opcode.JMP: 1,
            Opcode.IN: 2,
            Opcode.OUT: 2,
            Opcode.SLEEP: 1,
            Opcode.NOP: 0,
            Opcode.HALT: 0,
        }.get(opcode, 3)
        if len(operands) != arity:
            raise self.fail(f"{opcode.value} takes {arity} operands, got {len(operands)}")

        if opcode is Opcode.LOADI:
            return Instruction(opcode=opcode, dst=self.register(operands[0]), imm=self.integer(operands[1]))
        if opcode is Opcode.LOAD:
            return Instruction(opcode=opcode, dst=self.register(operands[0]), **self.memory(operands[1]))
        if opcode is Opcode.STORE:
            return Instruction(opcode=opcode, src=self.register(operands[0]), **self.memory(operands[1]))
        if opcode is Opcode.MOV:
            return Instruction(opcode=opcode, dst=self.register(operands[0]), src=self.register(operands[1]))
        if opcode in ALU_OPCODES:
            return Instruction(
                opcode=opcode,
                dst=self.register(operands[0]),
                src=self.register(operands[1]),
                **self.register_or_immediate(operands[2]),
            )
        if opcode is Opcode.CMP:
            return Instruction(
                opcode=opcode, src=self.register(operands[0]), **self.register_or_immediate(operands[1])
            )
        if opcode is Opcode.BR:
            return Instruction(opcode=opcode, cond=self.condition(operands[0]), target=self.target(operands[1]))
        if opcode is Opcode.JMP:
            return Instruction(opcode=opcode, target=self.target(operands[0]))
        if opcode is Opcode.IN:
            return Instruction(opcode=opcode, dst=self.register(operands[0]), port=self.integer(operands[1]))
        if opcode is Opcode.OUT:
            return Instruction(opcode=opcode, port=self.integer(operands[0]), src=self.register(operands[1]))
        if opcode is Opcode.SLEEP:
            try:
                return Instruction(opcode=opcode, duration=float(operands[0]))
            except ValueError as e:
                raise self.fail(f"expected a duration in seconds, got {operands[0]!r}") from e
        return Instruction(opcode=opcode)


def parse_program(text: str) -> Program:
    """Parse assembly text into a program.

    The result is not validated; see `load_program` for the validating loader.

    Args:
        text: Assembly source.

    Raises:
        AssemblyParseException: If a line cannot be parsed.
    """
    directives: Dict[str, str] = {}
    blocks: List[List[Instruction]] = []
    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parser = _LineParser(line_number)
        if line.startswith("."):
            if blocks:
                raise parser.fail("directives must precede the first block")
            name, _, value = line[1:].partition(" ")
            if name not in ("name", "version", "memory", "base", "core"):
                raise parser.fail(f"unknown directive .{name}")
            directives[name] = value.strip()
            continue
        label = _LABEL.match(line)
        if label:
            if int(label.group(1)) != len(blocks):
                raise parser.fail(f"expected label L{len(blocks)}, got L{label.group(1)}")
            blocks.append([])
            continue
        if not blocks:
            raise parser.fail("instruction before the first block label")
        mnemonic, *rest_parts = line.split(None, 1)
        rest = rest_parts[0] if rest_parts else ""
        operands = [operand.strip() for operand in rest.split(",")] if rest.strip() else []
        blocks[-1].append(parser.instruction(mnemonic, operands))

    core: Optional[Tuple[int, ...]] = None
    if directives.get("core"):
        parser = _LineParser(0)
        core = tuple(parser.target(token) for token in directives["core"].split())
    try:
        memory_size = int(directives.get("memory", "0"), 0)
        base_addr = int(directives.get("base", str(DEFAULT_BASE_ADDRESS)), 0)
    except ValueError as e:
        raise AssemblyParseException(f"malformed directive: {e}", 0) from e
    defaults = ProgramMetadata()
    metadata = ProgramMetadata(
        name=directives.get("name", defaults.name), version=directives.get("version", defaults.version)
    )
    return Program.from_blocks(
        blocks, memory_size=memory_size, base_addr=base_addr, metadata=metadata, core_blocks=core
    )


def load_program(source: Union[str, Path]) -> Program:
    """Read, parse and validate an assembly file.

    Raises:
        AssemblyParseException: If the file cannot be parsed.
        ProgramValidationException: If the parsed program fails static validation.
    """
    program = parse_program(Path(source).read_text(encoding="utf-8"))
    report = validate(program)
    if not report.ok:
        raise ProgramValidationException(report.defects)
    return program


def _memory_operand(ins: Instruction) -> str:
    if ins.base is None:
        return f"@{ins.addr}"
    return f"[r{ins.base}+{ins.addr}]" if ins.addr else f"[r{ins.base}]"


def format_instruction(ins: Instruction) -> str:
    op = ins.opcode
    if op is Opcode.LOADI:
        operands = [f"r{ins.dst}", str(ins.imm)]
    elif op is Opcode.LOAD:
        operands = [f"r{ins.dst}", _memory_operand(ins)]
    elif op is Opcode.STORE:
        operands = [f"r{ins.src}", _memory_operand(ins)]
    elif op is Opcode.MOV:
        operands = [f"r{ins.dst}", f"r{ins.src}"]
    elif op in ALU_OPCODES:
        operands = [f"r{ins.dst}", f"r{ins.src}", f"r{ins.src2}" if ins.src2 is not None else str(ins.imm)]
    elif op is Opcode.CMP:
        operands = [f"r{ins.src}", f"r{ins.src2}" if ins.src2 is not None else str(ins.imm)]
    elif op is Opcode.BR:
        operands = [ins.cond.value, f"L{ins.target}"]  # type: ignore[union-attr]
    elif op is Opcode.JMP:
        operands = [f"L{ins.target}"]
    elif op is Opcode.IN:
        operands = [f"r{ins.dst}", str(ins.port)]
    elif op is Opcode.OUT:
        operands = [str(ins.port), f"r{ins.src}"]
    elif op is Opcode.SLEEP:
        operands = [repr(ins.duration)]
    else:
        operands = []
    return f"{op.value:<5} {', '.join(operands)}".rstrip()


def _format_block(block: "BasicBlock") -> List[str]:
    return [f"L{block.id}:"] + [f"    {format_instruction(ins)}" for ins in block.instructions]


def format_program(program: Program) -> str:
    """Render a program in the assembly format accepted by `parse_program`."""
    lines = [
        f".name {program.metadata.name}",
        f".version {program.metadata.version}",
        f".memory {program.memory_size}",
        f".base {program.base_addr:#x}",
    ]
    if program.core_blocks is not None:
        lines.append(".core " + " ".join(f"L{index}" for index in program.core_blocks))
    for block in program.blocks:
        lines.extend(_format_block(block))
    return "\n".join(lines) + "\n"
