from pathlib import Path
from typing import List

import pandas as pd
import pytest

from failscope.cli import main
from failscope.corpus import load_corpus
from failscope.instrument import STREAM_COLUMNS
from failscope.learn import DecisionTree
from failscope.robosim.lab import NOMINAL

from .utils import synthetic_corpus

CRASHING_SOURCE = """
.memory 1
L0:
    SLEEP 0.5
    DIV   r0, r0, 0
    HALT
"""


def _read(path: Path) -> str:
    return path.read_text(encoding="utf-8")


class TestExitCodes:
    def test_unknown_command(self) -> None:
        assert main(["fly"]) == 1

    def test_missing_command(self) -> None:
        assert main([]) == 1

    def test_unknown_flag(self, corpus_dir: Path) -> None:
        assert main(["train", "--corpus", str(corpus_dir), "--depth", "3"]) == 1

    def test_invalid_value(self, tmp_path: Path, corpus_dir: Path) -> None:
        assert main(["features", "--corpus", str(corpus_dir), "--top-k", "0", "--out", str(tmp_path)]) == 1

    def test_missing_corpus(self, tmp_path: Path) -> None:
        assert main(["train", "--corpus", str(tmp_path / "nowhere"), "--out", str(tmp_path / "out")]) == 2

    def test_missing_mission_file(self, tmp_path: Path) -> None:
        assert main(["trace", "--mission", str(tmp_path / "absent.txt"), "--out", str(tmp_path)]) == 1

    def test_oversized_curve(self, tmp_path: Path, corpus_dir: Path) -> None:
        assert main(["curve", "--corpus", str(corpus_dir), "--sizes", "20", "61", "--out", str(tmp_path)]) == 1


class TestTrace:
    def test_writes_run_files(self, tmp_path: Path, short_mission_file: Path) -> None:
        out = tmp_path / "trace"
        assert main(["trace", "--mission", str(short_mission_file), "--interval", "500", "--out", str(out)]) == 0
        summary = pd.read_csv(out / "summary.csv")
        assert list(summary.columns) == list(STREAM_COLUMNS)
        assert summary["final"].tolist()[-1] == 1
        assert summary["run_id"].iloc[0].endswith("-short")
        assert "/cmd_vel" in _read(out / "topology.txt")
        assert (out / "trajectory.csv").is_file()
        run = pd.read_csv(out / "trace_run.csv")
        counts = dict(zip(run["item"], run["count"]))
        assert counts["waypoints_reached"] == counts["waypoints"] == 3
        assert "exit: halted" in _read(out / "trace.txt")

    def test_strict_crash(self, tmp_path: Path, short_mission_file: Path) -> None:
        program = tmp_path / "crash.asm"
        program.write_text(CRASHING_SOURCE, encoding="utf-8")
        args = ["trace", "--program", str(program), "--mission", str(short_mission_file)]
        assert main([*args, "--out", str(tmp_path / "lenient")]) == 0
        assert main([*args, "--strict", "--out", str(tmp_path / "strict")]) == 2
        assert "exit: crashed" in _read(tmp_path / "strict" / "trace.txt")


class TestCorpusExperiments:
    def test_train_and_eval(self, tmp_path: Path, corpus_dir: Path) -> None:
        assert main(["train", "--corpus", str(corpus_dir), "--out", str(tmp_path / "train")]) == 0
        model = tmp_path / "train" / "model.json"
        assert DecisionTree.load(model).split_count >= 1
        folds = pd.read_csv(tmp_path / "train" / "train_folds.csv")
        assert len(folds) == 7
        assert "k=6 n=60" in _read(tmp_path / "train" / "train.txt")

        out = tmp_path / "eval"
        assert main(["eval", "--corpus", str(corpus_dir), "--model", str(model), "--out", str(out)]) == 0
        assert (out / "eval_model.csv").is_file()
        assert (out / "eval_importance.csv").is_file()

    def test_reports_replay(self, tmp_path: Path, corpus_dir: Path) -> None:
        for out in ("first", "second"):
            assert main(["train", "--corpus", str(corpus_dir), "--seed", "3", "--out", str(tmp_path / out)]) == 0
        for table in ("train_folds.csv", "train_importance.csv"):
            assert _read(tmp_path / "first" / table) == _read(tmp_path / "second" / table)
        assert _read(tmp_path / "first" / "model.json") == _read(tmp_path / "second" / "model.json")

    def test_early(self, tmp_path: Path, corpus_dir: Path) -> None:
        assert main(["early", "--corpus", str(corpus_dir), "--out", str(tmp_path)]) == 0
        early = pd.read_csv(tmp_path / "early_early.csv", dtype={"interval": str})
        assert early["interval"].tolist()[0] == "1"
        assert early["interval"].tolist()[-1] == "final"

    def test_curve(self, tmp_path: Path, corpus_dir: Path) -> None:
        assert main(["curve", "--corpus", str(corpus_dir), "--sizes", "20", "40", "--out", str(tmp_path)]) == 0
        curve = pd.read_csv(tmp_path / "curve_curve.csv")
        assert curve["n"].tolist() == [20, 40]
        assert curve["k"].tolist() == [2, 4]
        assert list(curve.columns) == ["n", "k", "acc", "prec", "rec", "f"]
        assert "estimated generation minutes: n=20: 0.2, n=40: 0.3" in _read(tmp_path / "curve.txt")

    def test_curve_replays(self, tmp_path: Path, corpus_dir: Path) -> None:
        for out in ("first", "second"):
            args = ["curve", "--corpus", str(corpus_dir), "--sizes", "20", "60", "--seed", "2"]
            assert main([*args, "--out", str(tmp_path / out)]) == 0
        assert _read(tmp_path / "first" / "curve_curve.csv") == _read(tmp_path / "second" / "curve_curve.csv")

    def test_features(self, tmp_path: Path, corpus_dir: Path) -> None:
        assert main(["features", "--corpus", str(corpus_dir), "--top-k", "3", "--out", str(tmp_path)]) == 0
        comparison = pd.read_csv(tmp_path / "features_comparison.csv")
        assert comparison["count"].tolist() == [26, 3]
        assert "StoreCount" in comparison["signals"].iloc[1]

    def test_xversion(self, tmp_path: Path) -> None:
        train_dir = synthetic_corpus(runs=60, seed=1, version="v1").write(tmp_path / "v1")
        test_dir = synthetic_corpus(runs=40, seed=2, version="v2").write(tmp_path / "v2")
        args = ["xversion", "--train-corpus", str(train_dir), "--test-corpus", str(test_dir)]
        assert main([*args, "--out", str(tmp_path / "out")]) == 0
        text = _read(tmp_path / "out" / "xversion.txt")
        assert "v1 -> v2" in text
        assert (tmp_path / "out" / "xversion_same_version_folds.csv").is_file()

    def test_output_root_from_environment(
        self, tmp_path: Path, corpus_dir: Path, monkeypatch: pytest.MonkeyPatch
    ) -> None:
        monkeypatch.setenv("FAILSCOPE_OUTPUT_ROOT", str(tmp_path / "root"))
        assert main(["early", "--corpus", str(corpus_dir)]) == 0
        assert (tmp_path / "root" / "early" / "early.txt").is_file()


def test_corpus_command(tmp_path: Path, short_mission_file: Path) -> None:
    out = tmp_path / "corpus"
    args = ["corpus", "--missions", str(short_mission_file), "--max-mutants", "2", "--interval", "500", "--seed", "1"]
    assert main([*args, "--out", str(out)]) == 0
    summary = pd.read_csv(out / "corpus_summary.csv")
    counts = dict(zip(summary["item"], summary["count"]))
    assert counts["retained"] >= 1
    assert counts["pass"] >= 1
    built = load_corpus(out)
    assert len(built.records) == 3
    assert built.info.mission_ids == ["short"]
    # three runs are too few to cross-validate
    assert main(["early", "--corpus", str(out), "--out", str(tmp_path / "early")]) == 2


def test_corpus_command_replays(tmp_path: Path, short_mission_file: Path) -> None:
    args = ["corpus", "--missions", str(short_mission_file), "--max-mutants", "2", "--interval", "500", "--seed", "4"]
    first, second = tmp_path / "first", tmp_path / "second"
    for out in (first, second):
        assert main([*args, "--out", str(out)]) == 0
    for name in ("corpus.json", "manifest.jsonl", "dataset.csv", "corpus_summary.csv"):
        assert _read(first / name) == _read(second / name)
    summaries = sorted(path.name for path in (first / "summaries").iterdir())
    assert summaries == sorted(path.name for path in (second / "summaries").iterdir())
    for name in summaries:
        assert _read(first / "summaries" / name) == _read(second / "summaries" / name)
    assert (first / "timing.csv").is_file()


def test_overhead(tmp_path: Path, short_mission_file: Path) -> None:
    args = ["overhead", "--mission", str(short_mission_file), "--repeats", "3", "--out", str(tmp_path)]
    assert main(args) == 0
    overhead = pd.read_csv(tmp_path / "overhead_overhead.csv")
    assert overhead["mode"].tolist() == ["none", "naive", "optimized"]
    hooks = overhead["hook_calls"].tolist()
    assert hooks[0] == 0
    assert 0 < hooks[2] < hooks[1]


def _delaylab_args(mission_file: Path, out: Path) -> List[str]:
    return [
        "delaylab",
        "--missions",
        str(mission_file),
        "--topics",
        "/cmd_vel",
        "--delays",
        "0.0",
        "--seeds",
        "2",
        "--out",
        str(out),
    ]


def test_delaylab(tmp_path: Path, short_mission_file: Path) -> None:
    assert main([*_delaylab_args(short_mission_file, tmp_path), "--sleep-delays", "0.125"]) == 0
    distances = pd.read_csv(tmp_path / "delaylab_mean_distance.csv").set_index("condition")
    assert set(distances.index) == {NOMINAL, "/cmd_vel", "sleep p=0.1", "sleep p=0.5", "sleep p=1"}
    assert distances.loc[NOMINAL, "total"] == pytest.approx(distances.loc["/cmd_vel", "total"])
    crashes = pd.read_csv(tmp_path / "delaylab_crash_rate.csv")
    assert crashes["runs"].tolist() == [2] * 5
    assert len(pd.read_csv(tmp_path / "delaylab_runs.csv")) == 2 * 5 * 3


def test_delaylab_without_sleeps(tmp_path: Path, short_mission_file: Path) -> None:
    assert main([*_delaylab_args(short_mission_file, tmp_path), "--no-sleeps"]) == 0
    distances = pd.read_csv(tmp_path / "delaylab_mean_distance.csv").set_index("condition")
    assert set(distances.index) == {NOMINAL, "/cmd_vel"}
    assert len(pd.read_csv(tmp_path / "delaylab_runs.csv")) == 2 * 2 * 3


def test_delaylab_rejects_off_grid_delay(tmp_path: Path, short_mission_file: Path) -> None:
    args = ["delaylab", "--missions", str(short_mission_file), "--delays", "0.3", "--out", str(tmp_path)]
    assert main(args) == 1
