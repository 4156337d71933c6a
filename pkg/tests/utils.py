import dataclasses
import json
from pathlib import Path
from typing import TYPE_CHECKING, List, Optional, Tuple

import numpy as np
import pytest

from failscope.config import CorpusConfig
from failscope.corpus.dataset import LabeledDataset, LabeledExample, Provenance
from failscope.corpus.labeling import Label
from failscope.corpus.store import SUMMARY_DIR, Corpus, CorpusInfo, ManifestRecord
from failscope.instrument.signals import NUM_SIGNALS, SIGNAL_NAMES, SignalSummary, StreamEntry, SummaryStream
from failscope.vm.isa import Condition, Instruction, Opcode, Program
from failscope.vm.machine import ExecutionState, ScriptedPorts, Status

if TYPE_CHECKING:
    from failscope.instrument.trace import TraceEvent

GOLDEN_DIR = Path(__file__).parent / "golden"
MEMORY_SIZE = 8
_BODY_OPCODES = (
    Opcode.LOADI,
    Opcode.LOAD,
    Opcode.STORE,
    Opcode.MOV,
    Opcode.ADD,
    Opcode.SUB,
    Opcode.MUL,
    Opcode.DIV,
    Opcode.CMP,
    Opcode.IN,
    Opcode.OUT,
    Opcode.NOP,
    Opcode.SLEEP,
)


def _register(rng: np.random.Generator) -> int:
    return int(rng.integers(0, 16))


def _body_instruction(rng: np.random.Generator) -> Instruction:
    op = _BODY_OPCODES[int(rng.integers(len(_BODY_OPCODES)))]
    if op is Opcode.LOADI:
        return Instruction(opcode=op, dst=_register(rng), imm=int(rng.integers(-8, 9)))
    if op in (Opcode.LOAD, Opcode.STORE):
        register = "dst" if op is Opcode.LOAD else "src"
        if rng.random() < 0.5:
            return Instruction(opcode=op, addr=int(rng.integers(MEMORY_SIZE)), **{register: _register(rng)})
        # register-indirect accesses may fault, which is a legitimate outcome
        return Instruction(opcode=op, base=_register(rng), addr=int(rng.integers(0, 3)), **{register: _register(rng)})
    if op is Opcode.MOV:
        return Instruction(opcode=op, dst=_register(rng), src=_register(rng))
    if op in (Opcode.ADD, Opcode.SUB, Opcode.MUL, Opcode.DIV, Opcode.CMP):
        dst = None if op is Opcode.CMP else _register(rng)
        if rng.random() < 0.5:
            return Instruction(opcode=op, dst=dst, src=_register(rng), src2=_register(rng))
        return Instruction(opcode=op, dst=dst, src=_register(rng), imm=int(rng.integers(-4, 5)))
    if op is Opcode.IN:
        return Instruction(opcode=op, dst=_register(rng), port=int(rng.integers(0, 4)))
    if op is Opcode.OUT:
        return Instruction(opcode=op, src=_register(rng), port=int(rng.integers(8, 11)))
    if op is Opcode.SLEEP:
        return Instruction(opcode=op, duration=0.1)
    return Instruction(opcode=op)


def random_program(rng: np.random.Generator) -> Program:
    """A random program that passes validation; it may loop, crash or halt."""
    block_count = int(rng.integers(1, 7))
    blocks: List[List[Instruction]] = []
    for index in range(block_count):
        body = [_body_instruction(rng) for _ in range(int(rng.integers(1, 8)))]
        last = index == block_count - 1
        choice = rng.random()
        if last:
            if choice < 0.3:
                body.append(Instruction(opcode=Opcode.JMP, target=int(rng.integers(block_count))))
            else:
                body.append(Instruction(opcode=Opcode.HALT))
        elif choice < 0.4:
            condition = list(Condition)[int(rng.integers(len(Condition)))]
            body.append(Instruction(opcode=Opcode.BR, cond=condition, target=int(rng.integers(block_count))))
        elif choice < 0.55:
            body.append(Instruction(opcode=Opcode.JMP, target=int(rng.integers(index + 1, block_count))))
        elif choice < 0.65:
            body.append(Instruction(opcode=Opcode.HALT))
        blocks.append(body)
    return Program.from_blocks(blocks, memory_size=MEMORY_SIZE)


def random_ports(rng: np.random.Generator) -> ScriptedPorts:
    scripts = {port: [int(value) for value in rng.integers(-5, 6, size=4)] for port in range(4)}
    return ScriptedPorts(scripts, cycle=True)


_WRITES_REGISTER = {Opcode.LOADI, Opcode.LOAD, Opcode.MOV, Opcode.ADD, Opcode.SUB, Opcode.MUL, Opcode.DIV, Opcode.IN}


def recount(events: List["TraceEvent"]) -> SignalSummary:
    """Recompute all 26 signals from a raw instruction trace, one event at a time."""
    values = {name: 0 for name in SIGNAL_NAMES[:17]}
    addresses: List[int] = []
    loads: List[int] = []
    stores: List[int] = []
    for event in events:
        if event.kind == "enter":
            values["SBEnter"] += 1
            continue
        if event.kind == "exit":
            values["SBExit"] += int(event.completed)
            continue
        op = event.opcode
        values["InsCount"] += 1
        addresses.append(event.addr)  # type: ignore[arg-type]
        if op in _WRITES_REGISTER:
            values["WrTmpCount"] += 1
        if op is Opcode.LOAD:
            values["LoadCount"] += 1
            loads.append(event.mem_addr)  # type: ignore[arg-type]
        elif op is Opcode.STORE:
            values["StoreCount"] += 1
            stores.append(event.mem_addr)  # type: ignore[arg-type]
        elif op is Opcode.BR:
            values["ExitCount"] += 1
            values["BranchTakenCount"] += int(event.taken)
        elif op is Opcode.JMP:
            values["JumpCount"] += 1
        elif op in (Opcode.ADD, Opcode.SUB, Opcode.MUL, Opcode.DIV):
            values["ALUCount"] += 1
        elif op is Opcode.LOADI:
            values["ImmCount"] += 1
        elif op is Opcode.CMP:
            values["CmpCount"] += 1
        elif op is Opcode.MOV:
            values["MovCount"] += 1
        elif op is Opcode.IN:
            values["InPortCount"] += 1
        elif op is Opcode.OUT:
            values["OutPortCount"] += 1
        elif op in (Opcode.NOP, Opcode.SLEEP):
            values["NopCount"] += 1
        elif op is Opcode.HALT:
            values["HaltSeen"] += 1
    for prefix, seen in (("Ins", addresses), ("Load", loads), ("Store", stores)):
        low, high = (min(seen), max(seen)) if seen else (-1, -1)
        values[f"Min{prefix}Addr"] = low
        values[f"Max{prefix}Addr"] = high
        values[f"{prefix}AddrDiff"] = high - low if seen else -1
    return SignalSummary(**values)


def metric_oracle(tp: int, fp: int, tn: int, fn: int) -> Tuple[float, float, float, float]:
    total = tp + fp + tn + fn
    acc = (tp + tn) / total if total else 0.0
    prec = tp / (tp + fp) if tp + fp else 0.0
    rec = tp / (tp + fn) if tp + fn else 0.0
    f = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
    return acc, prec, rec, f


def separable_data(rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """At most 20 points split by a random line, embedded in the first two signals of a 26-signal matrix.

    Coordinates are distinct per axis and both classes are present.
    """
    while True:
        n = int(rng.integers(4, 21))
        points = np.stack([rng.choice(1000, size=n, replace=False) for _ in range(2)], axis=1)
        normal = rng.normal(size=2)
        offset = normal @ np.median(points, axis=0)
        labels = (points @ normal > offset).astype(np.int64)
        if 0 < labels.sum() < n:
            break
    X = np.zeros((n, NUM_SIGNALS), dtype=np.int64)
    X[:, :2] = points
    return X, labels


def _summary(instructions: int, failing: bool) -> SignalSummary:
    vector = [0] * NUM_SIGNALS
    vector[SIGNAL_NAMES.index("InsCount")] = instructions
    vector[SIGNAL_NAMES.index("StoreCount")] = instructions // (4 if failing else 10)
    vector[SIGNAL_NAMES.index("LoadCount")] = instructions // 5
    return SignalSummary.from_vector(vector)


def synthetic_corpus(
    runs: int = 60, seed: int = 0, version: str = "v1", interval_size: int = 100, fail_every: int = 3
) -> Corpus:
    """A corpus of fabricated runs whose label is decided by the store rate, without simulating anything.

    Every third run fails. Run lengths vary, so shorter runs drop out of later intervals.
    """
    rng = np.random.default_rng(seed)
    records: List[ManifestRecord] = []
    examples: List[LabeledExample] = []
    streams = {}
    for index in range(runs):
        failing = index % fail_every == 0
        length = int(rng.integers(250, 450))
        mutant_id = f"m{index:04d}"
        run_id = f"{mutant_id}-s"
        entries = [
            StreamEntry(instructions_executed=boundary, summary=_summary(boundary, failing))
            for boundary in range(interval_size, length + 1, interval_size)
        ]
        final = _summary(length, failing)
        streams[run_id] = SummaryStream(interval_size=interval_size, entries=entries, final=final)
        label_value = Label.FAIL if failing else Label.PASS
        records.append(
            ManifestRecord(
                run_id=run_id,
                mutant_id=mutant_id,
                operator="const_perturb",
                variant="+1",
                site=(1, 0),
                mission_id="s",
                seed=seed,
                exit_kind=Status.CRASHED if failing else Status.HALTED,
                label=label_value,
                instructions=length,
                retained=True,
                summary_file=f"{SUMMARY_DIR}/{run_id}.csv",
            )
        )
        provenance = Provenance(mutant_id=mutant_id, mission_id="s")
        examples.append(LabeledExample(features=final, label=label_value, provenance=provenance))
    info = CorpusInfo(
        version_tag=version,
        program_name="synthetic",
        mission_ids=["s"],
        seeds={"s": seed},
        config=CorpusConfig(interval_size=interval_size, seed=seed),
        mutants=runs,
    )
    dataset = LabeledDataset(examples=examples, version_tag=version)
    timings = {record.run_id: 0.5 for record in records}
    return Corpus(info=info, dataset=dataset, records=records, streams=streams, timings=timings)


def labeled_dataset(labels: List[int], version: str = "v0", interval: Optional[int] = None) -> LabeledDataset:
    """One example per label, with distinct provenance and a feature vector recording its position."""
    examples = [
        LabeledExample(
            features=_summary(100 + position, bool(value)),
            label=Label(value),
            provenance=Provenance(mutant_id=f"m{position:04d}", mission_id="s", interval=interval),
        )
        for position, value in enumerate(labels)
    ]
    return LabeledDataset(examples=examples, version_tag=version)


def state_json(state: ExecutionState) -> str:
    return json.dumps(dataclasses.asdict(state), indent=2, sort_keys=True) + "\n"


class GoldenFiles:
    """Byte-for-byte comparison of outputs against files under `tests/golden/`.

    A missing file, or any file when `--update-golden` is given, is recorded from the output and the test is skipped.
    """

    def __init__(self, root: Path, update: bool) -> None:
        self.root = root
        self.update = update

    def check(self, name: str, text: str) -> None:
        path = self.root / name
        if self.update or not path.is_file():
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_bytes(text.encode("utf-8"))
            pytest.skip(f"recorded {path.name}")
        assert text == path.read_bytes().decode("utf-8"), f"{name} differs from its golden copy"
