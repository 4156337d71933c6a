import json
import logging
from pathlib import Path
from typing import TYPE_CHECKING, Dict, List, Sequence, Tuple, Union

import pandas as pd

from failscope.corpus.builder import corpus_summary
from failscope.instrument.signals import SIGNAL_NAMES

if TYPE_CHECKING:
    from failscope.config import ExperimentConfig
    from failscope.corpus.store import Corpus
    from failscope.instrument.collector import OverheadReport
    from failscope.learn.experiments import EarlyDetectionRow, LearningCurveRow, ReducedFeatureReport
    from failscope.learn.metrics import MeanMetrics, Metrics
    from failscope.learn.validation import CvReport

logger = logging.getLogger(__name__)

METRIC_COLUMNS = ["acc", "prec", "rec", "f"]
COUNT_COLUMNS = ["train", "test", "tp", "fp", "tn", "fn"]


class Report:
    """Named tables written both as an aligned text report and as one CSV file per table.

    The text report starts with the experiment configuration so the run can be replayed; CSV files hold data only.
    """

    def __init__(self, name: str, config: "ExperimentConfig") -> None:
        """Report constructor.

        Args:
            name: Used as the file name stem.
            config: Configuration of the experiment that produced the report.
        """
        self.name = name
        self.config = config
        self.tables: Dict[str, pd.DataFrame] = {}
        self.notes: List[str] = []

    @property
    def config_json(self) -> str:
        return json.dumps(json.loads(self.config.json()), sort_keys=True)

    def add(self, title: str, frame: pd.DataFrame) -> "Report":
        self.tables[title] = frame
        return self

    def note(self, text: str) -> "Report":
        self.notes.append(text)
        return self

    def render(self) -> str:
        lines = [f"# failscope {self.name}", f"# config: {self.config_json}"]
        lines.extend(f"# {note}" for note in self.notes)
        for title, frame in self.tables.items():
            lines.extend(["", f"## {title}", frame.to_string(index=False, float_format=lambda value: f"{value:.4f}")])
        return "\n".join(lines) + "\n"

    def write(self, out: Path) -> List[Path]:
        out.mkdir(parents=True, exist_ok=True)
        paths = [out / f"{self.name}.txt"]
        paths[0].write_text(self.render(), encoding="utf-8")
        for title, frame in self.tables.items():
            path = out / f"{self.name}_{title}.csv"
            frame.to_csv(path, index=False)
            paths.append(path)
        logger.info("wrote %s report to %s", self.name, out)
        return paths


def _metric_values(metrics: Union["Metrics", "MeanMetrics"]) -> List[float]:
    return [metrics.acc, metrics.prec, metrics.rec, metrics.f]


def cv_frame(report: "CvReport") -> pd.DataFrame:
    """Per-fold confusion counts and metrics, followed by the mean row."""
    rows = [
        [str(fold.fold), fold.train_size, fold.test_size, fold.metrics.tp, fold.metrics.fp, fold.metrics.tn,
         fold.metrics.fn, *_metric_values(fold.metrics)]
        for fold in report.folds
    ]  # fmt: skip
    mean = report.mean
    rows.append(["mean", None, None, None, None, None, None, mean.acc, mean.prec, mean.rec, mean.f])
    frame = pd.DataFrame(rows, columns=["fold", *COUNT_COLUMNS, *METRIC_COLUMNS])
    return frame.astype({column: "Int64" for column in COUNT_COLUMNS})


def importance_frame(report: "CvReport") -> pd.DataFrame:
    """Signals with non-zero importance in at least one fold, by decreasing mean importance."""
    rows = [
        (name, report.nonzero_folds[index], report.mean_importances[index])
        for index, name in enumerate(SIGNAL_NAMES)
        if report.nonzero_folds[index] > 0
    ]
    rows.sort(key=lambda row: -row[2])
    return pd.DataFrame(rows, columns=["signal", "nonzero_folds", "mean_importance"])


def metrics_frame(named: Dict[str, "Metrics"]) -> pd.DataFrame:
    rows = [[name, m.tp, m.fp, m.tn, m.fn, *_metric_values(m)] for name, m in named.items()]
    return pd.DataFrame(rows, columns=["evaluation", "tp", "fp", "tn", "fn", *METRIC_COLUMNS])


def ratio_frame(named: Dict[str, Union["Metrics", "MeanMetrics"]]) -> pd.DataFrame:
    """Ratios only, so single evaluations and K-fold means can share a table."""
    rows = [[name, *_metric_values(m)] for name, m in named.items()]
    return pd.DataFrame(rows, columns=["evaluation", *METRIC_COLUMNS])


def early_frame(rows: Sequence["EarlyDetectionRow"]) -> pd.DataFrame:
    data = [
        ["final" if row.interval is None else str(row.interval), row.n, row.report.k, row.report.mean.acc,
         row.report.mean.prec, row.report.mean.rec, row.report.mean.f]
        for row in rows
    ]  # fmt: skip
    return pd.DataFrame(data, columns=["interval", "n", "k", *METRIC_COLUMNS])


def curve_frame(rows: Sequence["LearningCurveRow"]) -> pd.DataFrame:
    data = [[row.n, row.k, row.mean.acc, row.mean.prec, row.mean.rec, row.mean.f] for row in rows]
    return pd.DataFrame(data, columns=["n", "k", *METRIC_COLUMNS])


def reduced_frame(report: "ReducedFeatureReport") -> pd.DataFrame:
    data = [
        ["all", len(SIGNAL_NAMES), report.full.mean.acc, report.full.mean.prec, report.full.mean.rec,
         report.full.mean.f],
        [" ".join(report.selected_names), len(report.selected), report.reduced.mean.acc, report.reduced.mean.prec,
         report.reduced.mean.rec, report.reduced.mean.f],
    ]  # fmt: skip
    return pd.DataFrame(data, columns=["signals", "count", *METRIC_COLUMNS])


def overhead_frame(report: "OverheadReport") -> pd.DataFrame:
    return pd.DataFrame(
        [
            ["none", report.none_s, 1.0, report.none_hooks],
            ["naive", report.naive_s, report.naive_ratio, report.naive_hooks],
            ["optimized", report.optimized_s, report.optimized_ratio, report.optimized_hooks],
        ],
        columns=["mode", "median_seconds", "ratio", "hook_calls"],
    )


def counts_frame(rows: Sequence[Tuple[str, int]]) -> pd.DataFrame:
    return pd.DataFrame(list(rows), columns=["item", "count"])


def corpus_frame(corpus: "Corpus") -> pd.DataFrame:
    """Runs by exit kind and retained runs by label."""
    return counts_frame(corpus_summary(corpus))
