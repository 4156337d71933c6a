from collections import defaultdict
from dataclasses import dataclass, replace
from enum import Enum
from typing import TYPE_CHECKING, DefaultDict, Dict, List, Mapping, Optional, Protocol, Sequence, Tuple

from failscope.config import ExecutionLimits
from failscope.exceptions import ProgramValidationException
from failscope.vm.isa import NUM_REGISTERS, Condition, Opcode
from failscope.vm.validate import validate

if TYPE_CHECKING:
    from failscope.vm.isa import BasicBlock, Instruction, Program

DIVIDE_BY_ZERO = "divide-by-zero"
MEMORY_FAULT = "memory-fault"

_WORD = 1 << 64
_HALF_WORD = 1 << 63


class Status(str, Enum):
    RUNNING = "running"
    HALTED = "halted"
    CRASHED = "crashed"
    TIMED_OUT = "timed_out"


class Flag(str, Enum):
    LT = "LT"
    EQ = "EQ"
    GT = "GT"


_CONDITION_FLAGS: Dict[Condition, frozenset] = {
    Condition.EQ: frozenset({Flag.EQ}),
    Condition.NE: frozenset({Flag.LT, Flag.GT}),
    Condition.LT: frozenset({Flag.LT}),
    Condition.LE: frozenset({Flag.LT, Flag.EQ}),
    Condition.GT: frozenset({Flag.GT}),
    Condition.GE: frozenset({Flag.GT, Flag.EQ}),
}


class PortHandler(Protocol):
    """Source of IN values and sink of OUT values."""

    def read(self, port: int) -> int:
        ...

    def write(self, port: int, value: int) -> None:
        ...


class ExecutionHooks(Protocol):
    """Observer of an execution.

    `block_enter` is called once per block visit and decides whether `instruction` is called for each instruction
    retired during that visit. `block_exit` closes the visit; `completed` is False when the execution ended part way
    through the block.
    """

    def block_enter(self, block: "BasicBlock", retired_so_far: int) -> bool:
        ...

    def instruction(self, ins: "Instruction", addr: int, mem_addr: Optional[int], taken: bool) -> None:
        ...

    def block_exit(self, block: "BasicBlock", retired_in_block: int, taken: bool, completed: bool) -> None:
        ...


class ScriptedPorts:
    """Port handler replaying fixed input scripts and recording every write.

    Reads past the end of a port's script return `default`, or restart the script when `cycle` is set.
    """

    def __init__(self, inputs: Optional[Mapping[int, Sequence[int]]] = None, default: int = 0, cycle: bool = False):
        self.inputs: Dict[int, List[int]] = {port: list(values) for port, values in (inputs or {}).items()}
        self.default = default
        self.cycle = cycle
        self.writes: List[Tuple[int, int]] = []
        self._cursor: DefaultDict[int, int] = defaultdict(int)

    def read(self, port: int) -> int:
        values = self.inputs.get(port)
        if not values:
            return self.default
        index = self._cursor[port]
        if index >= len(values):
            if not self.cycle:
                return self.default
            index = 0
        self._cursor[port] = index + 1
        return values[index]

    def write(self, port: int, value: int) -> None:
        self.writes.append((port, value))


@dataclass
class ExecutionState:
    registers: List[int]
    memory: List[int]
    flags: Flag = Flag.EQ
    block: int = 0
    offset: int = 0
    sim_clock: float = 0.0
    status: Status = Status.RUNNING
    crash_reason: Optional[str] = None
    instructions_executed: int = 0
    """Retired instructions. A crashing instruction does not retire."""

    @classmethod
    def initial(cls, program: "Program") -> "ExecutionState":
        return cls(
            registers=[0] * NUM_REGISTERS,
            memory=[0] * program.memory_size,
            block=program.entry_block,
        )

    @property
    def pc(self) -> Tuple[int, int]:
        return self.block, self.offset

    def copy(self) -> "ExecutionState":
        return replace(self, registers=list(self.registers), memory=list(self.memory))


def _wrap(value: int) -> int:
    return (value + _HALF_WORD) % _WORD - _HALF_WORD


def _divide(dividend: int, divisor: int) -> int:
    quotient = abs(dividend) // abs(divisor)
    return quotient if (dividend < 0) == (divisor < 0) else -quotient


def _crash(state: ExecutionState, reason: str) -> Tuple[Optional[int], bool]:
    state.status = Status.CRASHED
    state.crash_reason = reason
    return None, False


def execute(
    state: ExecutionState, program: "Program", ins: "Instruction", io: PortHandler
) -> Tuple[Optional[int], bool]:
    """Execute `ins` against `state` in place and advance the program counter.

    Retirement accounting is left to the caller.

    Returns:
        The effective data address of a LOAD or STORE (else `None`) and whether a BR was taken.
    """
    op = ins.opcode
    regs = state.registers
    mem_addr: Optional[int] = None
    taken = False

    if op is Opcode.LOADI:
        regs[ins.dst] = _wrap(ins.imm)  # type: ignore[index,arg-type]
    elif op is Opcode.LOAD or op is Opcode.STORE:
        mem_addr = ins.addr if ins.base is None else regs[ins.base] + ins.addr  # type: ignore[operator]
        if not 0 <= mem_addr < len(state.memory):  # type: ignore[operator]
            return _crash(state, MEMORY_FAULT)
        if op is Opcode.LOAD:
            regs[ins.dst] = state.memory[mem_addr]  # type: ignore[index]
        else:
            state.memory[mem_addr] = regs[ins.src]  # type: ignore[index]
    elif op is Opcode.MOV:
        regs[ins.dst] = regs[ins.src]  # type: ignore[index]
    elif op is Opcode.ADD or op is Opcode.SUB or op is Opcode.MUL or op is Opcode.DIV:
        left = regs[ins.src]  # type: ignore[index]
        right = ins.imm if ins.src2 is None else regs[ins.src2]
        if op is Opcode.ADD:
            result = left + right  # type: ignore[operator]
        elif op is Opcode.SUB:
            result = left - right  # type: ignore[operator]
        elif op is Opcode.MUL:
            result = left * right  # type: ignore[operator]
        else:
            if right == 0:
                return _crash(state, DIVIDE_BY_ZERO)
            result = _divide(left, right)  # type: ignore[arg-type]
        regs[ins.dst] = _wrap(result)  # type: ignore[index]
    elif op is Opcode.CMP:
        left = regs[ins.src]  # type: ignore[index]
        right = ins.imm if ins.src2 is None else regs[ins.src2]
        state.flags = Flag.LT if left < right else Flag.GT if left > right else Flag.EQ  # type: ignore[operator]
    elif op is Opcode.BR:
        taken = state.flags in _CONDITION_FLAGS[ins.cond]  # type: ignore[index]
        if taken:
            state.block, state.offset = ins.target, 0  # type: ignore[assignment]
            return mem_addr, taken
    elif op is Opcode.JMP:
        state.block, state.offset = ins.target, 0  # type: ignore[assignment]
        return mem_addr, taken
    elif op is Opcode.IN:
        regs[ins.dst] = _wrap(int(io.read(ins.port)))  # type: ignore[index,arg-type]
    elif op is Opcode.OUT:
        io.write(ins.port, regs[ins.src])  # type: ignore[arg-type,index]
    elif op is Opcode.SLEEP:
        state.sim_clock += ins.duration  # type: ignore[operator]
    elif op is Opcode.HALT:
        state.status = Status.HALTED
        return mem_addr, taken

    state.offset += 1
    if state.offset == len(program.blocks[state.block].instructions):
        state.block, state.offset = state.block + 1, 0
    return mem_addr, taken


def step(state: ExecutionState, program: "Program", io: PortHandler) -> ExecutionState:
    """Execute exactly one instruction.

    Args:
        state: A running state. It is not modified.
        program: The program being executed.
        io: Port handler serving IN and OUT.

    Returns:
        The successor state. A divide-by-zero or out-of-range memory access yields a `CRASHED` state with the reason
        recorded and the program counter left on the faulting instruction.
    """
    if state.status is not Status.RUNNING:
        raise ValueError(f"cannot step a {state.status.value} execution")
    successor = state.copy()
    ins = program.blocks[successor.block].instructions[successor.offset]
    execute(successor, program, ins, io)
    if successor.status is not Status.CRASHED:
        successor.instructions_executed += 1
    return successor


class Machine:
    """Stateful driver of one execution, invoking hooks around block visits."""

    def __init__(
        self,
        program: "Program",
        io: PortHandler,
        limits: Optional[ExecutionLimits] = None,
        hooks: Optional[ExecutionHooks] = None,
    ) -> None:
        """Machine constructor.

        Args:
            program: A program that passes `validate`.
            io: Port handler serving IN and OUT.
            limits: Instruction and simulated-time bounds, defaults to `ExecutionLimits()`.
            hooks: Optional observer; `None` runs uninstrumented.

        Raises:
            ProgramValidationException: If the program fails static validation.
        """
        report = validate(program)
        if not report.ok:
            raise ProgramValidationException(report.defects)
        self.program = program
        self.io = io
        self.limits = limits or ExecutionLimits()
        self.hooks = hooks
        self.state = ExecutionState.initial(program)
        self.hook_calls = 0
        """Number of hook invocations made so far."""
        self._visit_open = False
        self._per_instruction = False
        self._retired_in_block = 0

    @property
    def running(self) -> bool:
        return self.state.status is Status.RUNNING

    def step(self) -> "Instruction":
        """Execute one instruction, dispatching hooks and enforcing limits."""
        state = self.state
        block = self.program.blocks[state.block]
        hooks = self.hooks
        if not self._visit_open:
            self._visit_open = True
            self._retired_in_block = 0
            if hooks is not None:
                self.hook_calls += 1
                self._per_instruction = hooks.block_enter(block, state.instructions_executed)
        addr = block.start_addr + state.offset
        ins = block.instructions[state.offset]
        mem_addr, taken = execute(state, self.program, ins, self.io)
        if state.status is Status.CRASHED:
            self.finalize()
            return ins
        state.instructions_executed += 1
        self._retired_in_block += 1
        if hooks is not None and self._per_instruction:
            self.hook_calls += 1
            hooks.instruction(ins, addr, mem_addr, taken)
        if state.offset == 0 or state.status is Status.HALTED:
            self._close_visit(block, taken, completed=True)
        if state.status is Status.RUNNING and (
            state.instructions_executed >= self.limits.max_instructions
            or state.sim_clock > self.limits.max_sim_seconds
        ):
            self.terminate()
        return ins

    def advance(self) -> Optional[float]:
        """Run until a SLEEP retires or the execution ends.

        Returns:
            The slept duration, or `None` once the execution is no longer running.
        """
        while self.state.status is Status.RUNNING:
            ins = self.step()
            if ins.opcode is Opcode.SLEEP and self.state.status is Status.RUNNING:
                return ins.duration
        return None

    def run(self) -> ExecutionState:
        while self.state.status is Status.RUNNING:
            self.step()
        return self.state

    def terminate(self) -> None:
        """Stop a running execution as timed out, closing any open block visit."""
        if self.state.status is Status.RUNNING:
            self.state.status = Status.TIMED_OUT
        self.finalize()

    def finalize(self) -> None:
        """Close an in-progress block visit. Safe to call more than once."""
        if self._visit_open:
            self._close_visit(self.program.blocks[self.state.block], False, completed=False)

    def _close_visit(self, block: "BasicBlock", taken: bool, completed: bool) -> None:
        self._visit_open = False
        if self.hooks is not None:
            self.hook_calls += 1
            self.hooks.block_exit(block, self._retired_in_block, taken, completed)


def run(
    program: "Program",
    io: PortHandler,
    limits: Optional[ExecutionLimits] = None,
    hooks: Optional[ExecutionHooks] = None,
) -> Tuple[ExecutionState, Status]:
    """Run a program to completion.

    Args:
        program: A program that passes `validate`.
        io: Port handler serving IN and OUT.
        limits: Instruction and simulated-time bounds, defaults to `ExecutionLimits()`.
        hooks: Optional observer.

    Returns:
        The final state and its exit kind.
    """
    machine = Machine(program, io, limits, hooks)
    state = machine.run()
    return state, state.status
