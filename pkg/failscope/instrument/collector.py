import copy
import logging
import time
from statistics import median
from typing import TYPE_CHECKING, List, NamedTuple, Optional, Tuple

from pydantic import BaseModel

from failscope.config import ExecutionLimits, InstrumentationMode
from failscope.exceptions import InstrumentationException
from failscope.instrument.signals import (
    BRANCH_TAKEN,
    COUNT_NAMES,
    INS,
    OPCODE_COUNTS,
    SB_ENTER,
    SB_EXIT,
    SignalSummary,
    StreamEntry,
    SummaryStream,
)
from failscope.vm.isa import Opcode
from failscope.vm.machine import Machine, Status

if TYPE_CHECKING:
    from failscope.vm.isa import BasicBlock, Instruction, Program
    from failscope.vm.machine import PortHandler

logger = logging.getLogger(__name__)

_Range = Optional[Tuple[int, int]]


class _Prefix(NamedTuple):
    counts: Tuple[Tuple[int, int], ...]
    ins_range: _Range
    load_range: _Range
    store_range: _Range


class _BlockProfile(NamedTuple):
    length: int
    dynamic: bool
    """Contains a register-addressed LOAD or STORE, so it can only be observed per instruction."""
    prefixes: Tuple[_Prefix, ...]
    """Signal deltas of retiring the first `n` instructions, indexed by `n`."""


def _widen(current: _Range, addr: int) -> _Range:
    if current is None:
        return addr, addr
    return min(current[0], addr), max(current[1], addr)


def _profile(block: "BasicBlock") -> _BlockProfile:
    totals = [0] * len(COUNT_NAMES)
    prefixes = [_Prefix((), None, None, None)]
    ins_range: _Range = None
    load_range: _Range = None
    store_range: _Range = None
    for offset, ins in enumerate(block.instructions):
        for slot in OPCODE_COUNTS[ins.opcode]:
            totals[slot] += 1
        ins_range = _widen(ins_range, block.start_addr + offset)
        if ins.base is None and ins.opcode is Opcode.LOAD:
            load_range = _widen(load_range, ins.addr)  # type: ignore[arg-type]
        elif ins.base is None and ins.opcode is Opcode.STORE:
            store_range = _widen(store_range, ins.addr)  # type: ignore[arg-type]
        counts = tuple((slot, value) for slot, value in enumerate(totals) if value)
        prefixes.append(_Prefix(counts, ins_range, load_range, store_range))
    return _BlockProfile(len(block.instructions), block.has_register_addressing, tuple(prefixes))


class SignalCollector:
    """Execution hooks maintaining the 26-signal summary in a fixed accumulator.

    In `NAIVE` mode every retired instruction is observed. In `OPTIMIZED` mode a block visit is accounted for in one
    step at its exit, using deltas precomputed per block, unless the block addresses memory through a register or an
    interval boundary falls inside it; such visits are observed per instruction.
    """

    def __init__(
        self,
        program: "Program",
        mode: InstrumentationMode = InstrumentationMode.OPTIMIZED,
        interval_size: int = 10_000,
    ) -> None:
        """Collector constructor.

        Args:
            program: The program that will be observed.
            mode: `NAIVE` or `OPTIMIZED`.
            interval_size: Retired instructions between interval summaries.

        Raises:
            InstrumentationException: If `mode` is `NONE` or `interval_size` is not positive.
        """
        if mode is InstrumentationMode.NONE:
            raise InstrumentationException("mode none collects nothing; it only exists for baseline timing")
        if interval_size < 1:
            raise InstrumentationException("interval_size must be at least 1")
        self.mode = mode
        self.interval_size = interval_size
        self.counts: List[int] = [0] * len(COUNT_NAMES)
        # min/max of instruction, load and store addresses
        self.extremes: List[Optional[int]] = [None] * 6
        self.entries: List[StreamEntry] = []
        self._next_boundary = interval_size
        self._per_instruction = True
        self._profiles = [_profile(block) for block in program.blocks]

    def block_enter(self, block: "BasicBlock", retired_so_far: int) -> bool:
        self.counts[SB_ENTER] += 1
        if self.mode is InstrumentationMode.NAIVE:
            self._per_instruction = True
        else:
            profile = self._profiles[block.id]
            self._per_instruction = profile.dynamic or retired_so_far + profile.length > self._next_boundary
        return self._per_instruction

    def instruction(self, ins: "Instruction", addr: int, mem_addr: Optional[int], taken: bool) -> None:
        counts = self.counts
        for slot in OPCODE_COUNTS[ins.opcode]:
            counts[slot] += 1
        if taken:
            counts[BRANCH_TAKEN] += 1
        self._extend(0, addr, addr)
        if mem_addr is not None:
            self._extend(2 if ins.opcode is Opcode.LOAD else 4, mem_addr, mem_addr)
        if counts[INS] == self._next_boundary:
            self._emit()

    def block_exit(self, block: "BasicBlock", retired_in_block: int, taken: bool, completed: bool) -> None:
        if not self._per_instruction and retired_in_block:
            prefix = self._profiles[block.id].prefixes[retired_in_block]
            counts = self.counts
            for slot, value in prefix.counts:
                counts[slot] += value
            if taken:
                counts[BRANCH_TAKEN] += 1
            for index, span in enumerate((prefix.ins_range, prefix.load_range, prefix.store_range)):
                if span is not None:
                    self._extend(2 * index, span[0], span[1])
            if counts[INS] == self._next_boundary:
                self._emit()
        if completed:
            self.counts[SB_EXIT] += 1

    def snapshot(self) -> SignalSummary:
        return SignalSummary.from_accumulator(self.counts, self.extremes)

    def stream(self) -> SummaryStream:
        """The interval entries emitted so far and the current summary as the final one."""
        return SummaryStream(interval_size=self.interval_size, entries=list(self.entries), final=self.snapshot())

    def _extend(self, index: int, low: int, high: int) -> None:
        extremes = self.extremes
        if extremes[index] is None or low < extremes[index]:  # type: ignore[operator]
            extremes[index] = low
        if extremes[index + 1] is None or high > extremes[index + 1]:  # type: ignore[operator]
            extremes[index + 1] = high

    def _emit(self) -> None:
        self.entries.append(StreamEntry(instructions_executed=self._next_boundary, summary=self.snapshot()))
        self._next_boundary += self.interval_size


class OverheadMeter(BaseModel):
    wall_seconds: float
    hook_calls: int


def collect(
    program: "Program",
    io: "PortHandler",
    limits: Optional[ExecutionLimits] = None,
    mode: InstrumentationMode = InstrumentationMode.OPTIMIZED,
    interval_size: int = 10_000,
) -> Tuple[SummaryStream, Status, OverheadMeter]:
    """Run a program under instrumentation and return its summary stream.

    Args:
        program: A program that passes `validate`.
        io: Port handler serving IN and OUT.
        limits: Instruction and simulated-time bounds.
        mode: `NAIVE` or `OPTIMIZED`.
        interval_size: Retired instructions between interval summaries.

    Returns:
        The summary stream (complete up to a crash or timeout), the exit kind, and the wall-clock duration and hook
        invocation count of the run.
    """
    collector = SignalCollector(program, mode, interval_size)
    machine = Machine(program, io, limits, collector)
    started = time.perf_counter()
    machine.run()
    elapsed = time.perf_counter() - started
    return collector.stream(), machine.state.status, OverheadMeter(wall_seconds=elapsed, hook_calls=machine.hook_calls)


class OverheadReport(BaseModel):
    repeats: int
    none_s: float
    """Median wall-clock seconds without instrumentation."""
    naive_s: float
    optimized_s: float
    naive_hooks: int
    optimized_hooks: int
    none_hooks: int = 0

    @property
    def naive_ratio(self) -> float:
        return self.naive_s / self.none_s if self.none_s else 0.0

    @property
    def optimized_ratio(self) -> float:
        return self.optimized_s / self.none_s if self.none_s else 0.0


def _timed_run(
    program: "Program", io: "PortHandler", limits: Optional[ExecutionLimits], mode: InstrumentationMode
) -> Tuple[float, Machine]:
    hooks = None if mode is InstrumentationMode.NONE else SignalCollector(program, mode)
    machine = Machine(program, copy.deepcopy(io), limits, hooks)
    started = time.perf_counter()
    machine.run()
    return time.perf_counter() - started, machine


def measure_overhead(
    program: "Program", io: "PortHandler", limits: Optional[ExecutionLimits] = None, repeats: int = 11
) -> OverheadReport:
    """Time the same execution without instrumentation and under both instrumentation modes.

    Every run gets a fresh copy of `io`, so scripted inputs replay identically.

    Args:
        program: A program expected to halt within `limits`.
        io: Port handler template.
        limits: Instruction and simulated-time bounds.
        repeats: Timed runs per mode; the median is reported.

    Raises:
        InstrumentationException: If the modes disagree on the final machine state.
    """
    if repeats < 1:
        raise InstrumentationException("repeats must be at least 1")
    timings = {mode: [] for mode in InstrumentationMode}  # type: ignore[var-annotated]
    hooks = {}
    finals = {}
    for _ in range(repeats):
        for mode in InstrumentationMode:
            elapsed, machine = _timed_run(program, io, limits, mode)
            timings[mode].append(elapsed)
            hooks[mode] = machine.hook_calls
            finals[mode] = machine.state
    baseline = finals[InstrumentationMode.NONE]
    if any(final != baseline for final in finals.values()):
        raise InstrumentationException("instrumentation changed the outcome of the execution")
    if baseline.status is not Status.HALTED:
        logger.warning("overhead measured on an execution that did not halt (%s)", baseline.status.value)
    return OverheadReport(
        repeats=repeats,
        none_s=median(timings[InstrumentationMode.NONE]),
        naive_s=median(timings[InstrumentationMode.NAIVE]),
        optimized_s=median(timings[InstrumentationMode.OPTIMIZED]),
        naive_hooks=hooks[InstrumentationMode.NAIVE],
        optimized_hooks=hooks[InstrumentationMode.OPTIMIZED],
        none_hooks=hooks[InstrumentationMode.NONE],
    )
