from typing import Dict, List, Optional, Sequence, Tuple

from pydantic import BaseModel, validator

from failscope.vm.isa import Opcode

COUNT_NAMES: Tuple[str, ...] = (
    "InsCount",
    "LoadCount",
    "StoreCount",
    "WrTmpCount",
    "ExitCount",
    "BranchTakenCount",
    "JumpCount",
    "SBEnter",
    "SBExit",
    "ALUCount",
    "ImmCount",
    "CmpCount",
    "MovCount",
    "InPortCount",
    "OutPortCount",
    "NopCount",
    "HaltSeen",
)
EXTREME_NAMES: Tuple[str, ...] = (
    "MinInsAddr",
    "MaxInsAddr",
    "InsAddrDiff",
    "MinLoadAddr",
    "MaxLoadAddr",
    "LoadAddrDiff",
    "MinStoreAddr",
    "MaxStoreAddr",
    "StoreAddrDiff",
)
SIGNAL_NAMES: Tuple[str, ...] = COUNT_NAMES + EXTREME_NAMES
"""The canonical signal order. Datasets, CSV files and feature vectors all use it."""
NUM_SIGNALS = len(SIGNAL_NAMES)
UNDEFINED = -1
"""Value of the three extreme signals of an event family that has not occurred."""

(
    INS,
    LOAD,
    STORE,
    WRTMP,
    EXIT,
    BRANCH_TAKEN,
    JUMP,
    SB_ENTER,
    SB_EXIT,
    ALU,
    IMM,
    CMP,
    MOV,
    IN_PORT,
    OUT_PORT,
    NOP,
    HALT_SEEN,
) = range(len(COUNT_NAMES))

PRIMARY_CATEGORIES = (
    "WrTmpCount",
    "StoreCount",
    "ExitCount",
    "JumpCount",
    "CmpCount",
    "OutPortCount",
    "NopCount",
    "HaltSeen",
)
"""Counts that partition `InsCount`: every opcode falls into exactly one of them."""

OPCODE_COUNTS: Dict[Opcode, Tuple[int, ...]] = {
    Opcode.LOADI: (INS, WRTMP, IMM),
    Opcode.LOAD: (INS, WRTMP, LOAD),
    Opcode.STORE: (INS, STORE),
    Opcode.MOV: (INS, WRTMP, MOV),
    Opcode.ADD: (INS, WRTMP, ALU),
    Opcode.SUB: (INS, WRTMP, ALU),
    Opcode.MUL: (INS, WRTMP, ALU),
    Opcode.DIV: (INS, WRTMP, ALU),
    Opcode.CMP: (INS, CMP),
    Opcode.BR: (INS, EXIT),
    Opcode.JMP: (INS, JUMP),
    Opcode.IN: (INS, WRTMP, IN_PORT),
    Opcode.OUT: (INS, OUT_PORT),
    Opcode.SLEEP: (INS, NOP),
    Opcode.NOP: (INS, NOP),
    Opcode.HALT: (INS, HALT_SEEN),
}
"""Count slots incremented by one retired instruction of each opcode, branch outcome aside."""


class SignalSummary(BaseModel):
    """Cumulative 26-signal summary of an execution prefix."""

    class Config:
        frozen = True

    InsCount: int = 0
    LoadCount: int = 0
    StoreCount: int = 0
    WrTmpCount: int = 0
    """Instructions writing a register: LOADI, LOAD, MOV, ADD, SUB, MUL, DIV and IN."""
    ExitCount: int = 0
    """Conditional branches executed."""
    BranchTakenCount: int = 0
    JumpCount: int = 0
    SBEnter: int = 0
    SBExit: int = 0
    ALUCount: int = 0
    ImmCount: int = 0
    CmpCount: int = 0
    MovCount: int = 0
    InPortCount: int = 0
    OutPortCount: int = 0
    NopCount: int = 0
    """NOP and SLEEP: bookkeeping events with no architectural effect."""
    HaltSeen: int = 0
    MinInsAddr: int = UNDEFINED
    MaxInsAddr: int = UNDEFINED
    InsAddrDiff: int = UNDEFINED
    MinLoadAddr: int = UNDEFINED
    MaxLoadAddr: int = UNDEFINED
    LoadAddrDiff: int = UNDEFINED
    MinStoreAddr: int = UNDEFINED
    MaxStoreAddr: int = UNDEFINED
    StoreAddrDiff: int = UNDEFINED

    def as_vector(self) -> Tuple[int, ...]:
        return tuple(getattr(self, name) for name in SIGNAL_NAMES)

    @classmethod
    def from_vector(cls, values: Sequence[int]) -> "SignalSummary":
        if len(values) != NUM_SIGNALS:
            raise ValueError(f"expected {NUM_SIGNALS} signal values, got {len(values)}")
        return cls(**{name: int(value) for name, value in zip(SIGNAL_NAMES, values)})

    @classmethod
    def from_accumulator(cls, counts: Sequence[int], extremes: Sequence[Optional[int]]) -> "SignalSummary":
        """Build a summary from 17 counts and the six raw extremes, min then max of each address family."""
        values: List[int] = list(counts)
        for low, high in zip(extremes[0::2], extremes[1::2]):
            if low is None or high is None:
                values.extend((UNDEFINED, UNDEFINED, UNDEFINED))
            else:
                values.extend((low, high, high - low))
        return cls.from_vector(values)

    def category_total(self) -> int:
        return sum(getattr(self, name) for name in PRIMARY_CATEGORIES)


class StreamEntry(BaseModel):
    class Config:
        frozen = True

    instructions_executed: int
    summary: SignalSummary


class SummaryStream(BaseModel):
    """Interval summaries of one execution, plus the summary at its end."""

    interval_size: int = 10_000
    entries: List[StreamEntry] = []
    final: SignalSummary = SignalSummary()

    @validator("interval_size")
    def validate_interval_size(cls, value: int) -> int:  # pylint: disable=E0213
        if value < 1:
            raise ValueError("interval_size must be at least 1")
        return value

    def summary_at(self, interval: int) -> Optional[SignalSummary]:
        """Return the summary at the `interval`-th boundary (1-based), if the execution reached it."""
        if 1 <= interval <= len(self.entries):
            return self.entries[interval - 1].summary
        return None
