from typing import TYPE_CHECKING, List, NamedTuple, Optional

if TYPE_CHECKING:
    from failscope.vm.isa import BasicBlock, Instruction, Opcode


class TraceEvent(NamedTuple):
    kind: str
    """One of `enter`, `ins` or `exit`."""
    block: Optional[int] = None
    addr: Optional[int] = None
    opcode: Optional["Opcode"] = None
    mem_addr: Optional[int] = None
    taken: bool = False
    completed: bool = False


class TraceRecorder:
    """Debug hooks recording every block visit and retired instruction.

    The log grows with the execution, so this is only meant for checking collectors against a recount, never for
    timing runs.
    """

    def __init__(self) -> None:
        self.events: List[TraceEvent] = []

    def block_enter(self, block: "BasicBlock", retired_so_far: int) -> bool:
        self.events.append(TraceEvent("enter", block=block.id))
        return True

    def instruction(self, ins: "Instruction", addr: int, mem_addr: Optional[int], taken: bool) -> None:
        self.events.append(TraceEvent("ins", addr=addr, opcode=ins.opcode, mem_addr=mem_addr, taken=taken))

    def block_exit(self, block: "BasicBlock", retired_in_block: int, taken: bool, completed: bool) -> None:
        self.events.append(TraceEvent("exit", block=block.id, completed=completed))

    @property
    def instructions(self) -> List[TraceEvent]:
        return [event for event in self.events if event.kind == "ins"]
