from pathlib import Path

import pandas as pd
import pytest

from failscope.config import CorpusConfig, SimulationConfig
from failscope.corpus import (
    DATASET_COLUMNS,
    ORIGINAL_ID,
    Corpus,
    Label,
    LabeledDataset,
    MutationKind,
    applications,
    balance,
    build_corpus,
    corpus_summary,
    count_applications,
    enumerate_mutants,
    label,
    load_corpus,
    mission_seed,
)
from failscope.exceptions import ConfigurationException, CorpusException, DatasetException, EmptyCorpusException
from failscope.robosim import Mission, Trajectory
from failscope.vm import Instruction, Opcode, Program, Status, parse_program, validate

from .utils import labeled_dataset

TINY_SOURCE = """
.memory 2
L0:
    LOAD  r0, @0
    ADD   r0, r0, 1
    STORE r0, @0
    CMP   r0, 3
    BR    LT, L0
L1:
    HALT
"""


@pytest.fixture()
def tiny() -> Program:
    return parse_program(TINY_SOURCE)


class TestMutation:
    def test_applications_of_an_alu_immediate(self) -> None:
        rewrites = applications(Instruction(opcode=Opcode.ADD, dst=0, src=0, imm=1))
        assert [(kind, variant) for kind, variant, _ in rewrites] == [
            (MutationKind.ARITH_SWAP, "ADD->SUB"),
            (MutationKind.CONST_PERTURB, "+1"),
            (MutationKind.CONST_PERTURB, "-1"),
            (MutationKind.CONST_PERTURB, "x2"),
            (MutationKind.CONST_PERTURB, "zero"),
            (MutationKind.INSTR_DELETE, "NOP"),
        ]
        assert rewrites[0][2].opcode is Opcode.SUB
        assert [rewritten.imm for _, _, rewritten in rewrites[1:5]] == [2, 0, 2, 0]

    def test_zero_immediate_has_no_identity_rewrites(self) -> None:
        rewrites = applications(Instruction(opcode=Opcode.LOADI, dst=0, imm=0))
        assert [variant for _, variant, _ in rewrites] == ["+1", "-1", "NOP"]

    def test_branch_and_memory_operators(self) -> None:
        branch = applications(Instruction(opcode=Opcode.BR, cond="LT", target=0))
        assert [(kind, variant) for kind, variant, _ in branch] == [
            (MutationKind.BRANCH_FLIP, "LT->GE"),
            (MutationKind.INSTR_DELETE, "NOP"),
        ]
        store = applications(Instruction(opcode=Opcode.STORE, src=0, base=1, addr=2))
        assert [rewritten.addr for kind, _, rewritten in store if kind is MutationKind.ADDR_PERTURB] == [3, 1]
        assert applications(Instruction(opcode=Opcode.NOP)) == []

    def test_enumeration_keeps_valid_mutants(self, tiny: Program) -> None:
        mutants = enumerate_mutants(tiny)
        assert count_applications(tiny) == 20
        assert len(mutants) == 17
        assert [mutant.mutant_id for mutant in mutants[:3]] == ["m0000", "m0001", "m0002"]
        assert all(validate(mutant.program).ok for mutant in mutants)
        first = mutants[0]
        assert first.operator.kind is MutationKind.INSTR_DELETE  # type: ignore[union-attr]
        assert first.operator.site == (0, 0)  # type: ignore[union-attr]
        assert first.program.blocks[0].instructions[0].opcode is Opcode.NOP

    def test_each_mutant_differs_at_one_site(self, tiny: Program) -> None:
        for mutant in enumerate_mutants(tiny):
            block, offset = mutant.operator.site  # type: ignore[union-attr]
            changed = [
                (b, o)
                for b, (ours, theirs) in enumerate(zip(mutant.program.blocks, tiny.blocks))
                for o, (x, y) in enumerate(zip(ours.instructions, theirs.instructions))
                if x != y
            ]
            assert changed == [(block, offset)]

    def test_core_blocks_limit_sites(self) -> None:
        program = parse_program(TINY_SOURCE.replace(".memory 2", ".memory 2\n.core L1"))
        assert count_applications(program) == 1
        assert enumerate_mutants(program) == []


class TestLabeling:
    mission = Mission.from_points([(0, 0), (2, 0)])
    complete = Trajectory.record([(0.0, 0.0, 0.0), (1.0, 2.0, 0.0), (2.0, 0.2, 0.0)], mission)
    partial = Trajectory.record([(0.0, 0.0, 0.0), (1.0, 0.5, 0.0)], mission)

    def test_pass_requires_halt_and_every_waypoint(self) -> None:
        assert label(self.complete, self.mission, Status.HALTED) is Label.PASS
        assert label(self.complete, self.mission, Status.CRASHED) is Label.FAIL
        assert label(self.complete, self.mission, Status.TIMED_OUT) is Label.FAIL
        assert label(self.partial, self.mission, Status.HALTED) is Label.FAIL

    def test_empty_trajectory_fails(self) -> None:
        assert label(Trajectory(samples=[], reached=[]), self.mission, Status.HALTED) is Label.FAIL

    def test_halting_away_from_home_fails(self) -> None:
        mission = Mission.from_points([(0, 0), (5, 0)])
        outbound = Trajectory.record([(0.0, 0.0, 0.0), (1.0, 2.5, 0.0), (2.0, 5.0, 0.0)], mission)
        assert outbound.reached == [True, True, False]
        assert label(outbound, mission, Status.HALTED) is Label.FAIL

    def test_leaving_home_after_the_loop_fails(self) -> None:
        wandered = Trajectory.record([(0.0, 0.0, 0.0), (1.0, 2.0, 0.0), (2.0, 0.2, 0.0), (3.0, 0.0, 3.0)], self.mission)
        assert wandered.reached_all
        assert label(wandered, self.mission, Status.HALTED) is Label.FAIL


class TestBalance:
    def test_upsamples_minority(self) -> None:
        dataset = labeled_dataset([0, 0, 0, 0, 1, 1])
        balanced = balance(dataset, seed=1)
        assert balanced.class_counts() == (4, 4)
        assert balanced.examples[:6] == dataset.examples
        assert all(example.label is Label.FAIL for example in balanced.examples[6:])
        assert balance(dataset, seed=1) == balanced

    def test_balanced_input_is_returned(self) -> None:
        dataset = labeled_dataset([0, 1, 1, 0])
        assert balance(dataset, seed=0) is dataset

    def test_single_class(self) -> None:
        with pytest.raises(DatasetException):
            balance(labeled_dataset([1, 1, 1]), seed=0)


def test_dataset_csv(tmp_path: Path) -> None:
    dataset = labeled_dataset([0, 1, 0, 1, 1], version="v2")
    path = dataset.to_csv(tmp_path / "dataset.csv")
    frame = pd.read_csv(path)
    assert list(frame.columns) == list(DATASET_COLUMNS)
    assert frame["label"].tolist() == [0, 1, 0, 1, 1]
    assert LabeledDataset.from_csv(path, version_tag="v2") == dataset


def test_dataset_csv_requires_columns() -> None:
    with pytest.raises(DatasetException):
        LabeledDataset.from_frame(pd.DataFrame({"run_id": ["a"]}))


def test_mission_seeds_are_stable() -> None:
    assert mission_seed(0, 0) == mission_seed(0, 0)
    assert mission_seed(0, 0) != mission_seed(0, 1)
    assert mission_seed(0, 0) != mission_seed(1, 0)


class TestSyntheticCorpus:
    def test_interval_datasets(self, corpus: Corpus) -> None:
        first = corpus.interval_dataset(1)
        assert first is not None
        assert len(first) == len(corpus.dataset)
        assert all(example.provenance.interval == 1 for example in first.examples)
        assert corpus.interval_dataset(corpus.max_interval + 1) is None
        last = corpus.interval_dataset(corpus.max_interval)
        assert last is not None and len(last) < len(corpus.dataset)

    def test_write_and_load(self, corpus: Corpus, corpus_dir: Path) -> None:
        loaded = load_corpus(corpus_dir)
        assert loaded.info == corpus.info
        assert loaded.records == corpus.records
        assert loaded.dataset == corpus.dataset
        assert loaded.streams == corpus.streams
        assert loaded.timings == corpus.timings
        assert loaded.mean_wall_seconds == 0.5
        assert (corpus_dir / "summaries" / "m0000-s.csv").is_file()
        assert "wall_seconds" not in (corpus_dir / "manifest.jsonl").read_text(encoding="utf-8")

    def test_missing_directory(self, tmp_path: Path) -> None:
        with pytest.raises(CorpusException):
            load_corpus(tmp_path / "nowhere")

    def test_summary_rows(self, corpus: Corpus) -> None:
        rows = dict(corpus_summary(corpus))
        assert rows["retained"] == 60
        assert rows["fail"] == 20
        assert rows["pass"] == 40
        assert rows["exit:crashed"] == 20


class TestBuild:
    def test_small_build(self, tmp_path: Path, controller: Program, short_mission: Mission) -> None:
        config = CorpusConfig(max_mutants=3, interval_size=500, seed=1)
        corpus = build_corpus(controller, [short_mission], config, SimulationConfig(mission_time_limit=30))
        run_ids = [record.run_id for record in corpus.records]
        assert len(run_ids) == 4
        assert run_ids == sorted(run_ids)
        assert corpus.info.mutants == 3
        original = next(record for record in corpus.records if record.mutant_id == ORIGINAL_ID)
        assert original.exit_kind is Status.HALTED
        assert original.label is Label.PASS
        assert original.retained
        assert set(corpus.streams) == {record.run_id for record in corpus.retained}
        assert len(corpus.dataset) == len(corpus.retained)
        assert corpus.mean_wall_seconds is not None

        loaded = load_corpus(corpus.write(tmp_path / "built"))
        assert loaded.dataset == corpus.dataset
        assert loaded.streams == corpus.streams

    def test_immediate_crashes_leave_nothing(self, short_mission: Mission) -> None:
        program = parse_program(".memory 1\n.core L1\nL0:\n    DIV r0, r0, 0\nL1:\n    HALT\n")
        with pytest.raises(EmptyCorpusException):
            build_corpus(program, [short_mission], CorpusConfig(), SimulationConfig(mission_time_limit=5))

    def test_unmutated_runs_alone_are_no_corpus(self, short_mission: Mission) -> None:
        program = parse_program(TINY_SOURCE.replace(".memory 2", ".memory 2\n.core L1"))
        assert enumerate_mutants(program) == []
        config = CorpusConfig(include_original=True)
        with pytest.raises(EmptyCorpusException):
            build_corpus(program, [short_mission], config, SimulationConfig(mission_time_limit=5))

    def test_mission_ids_must_be_distinct(self, controller: Program, short_mission: Mission) -> None:
        with pytest.raises(ConfigurationException):
            build_corpus(controller, [short_mission, short_mission])
        with pytest.raises(ConfigurationException):
            build_corpus(controller, [])
