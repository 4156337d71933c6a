import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import pandas as pd
from pydantic import BaseModel

from failscope.config import CorpusConfig
from failscope.corpus.dataset import LabeledDataset, LabeledExample, Provenance
from failscope.corpus.labeling import Label
from failscope.exceptions import CorpusException
from failscope.instrument.io import read_stream_csv, write_stream_csv
from failscope.instrument.signals import SummaryStream
from failscope.vm.machine import Status

logger = logging.getLogger(__name__)

CORPUS_FILE = "corpus.json"
MANIFEST_FILE = "manifest.jsonl"
DATASET_FILE = "dataset.csv"
SUMMARY_DIR = "summaries"
TIMING_FILE = "timing.csv"


class ManifestRecord(BaseModel):
    """One executed run, retained or not."""

    run_id: str
    mutant_id: str
    operator: Optional[str] = None
    """Mutation kind, absent for the unmutated program."""
    variant: Optional[str] = None
    site: Optional[Tuple[int, int]] = None
    mission_id: str
    seed: int
    exit_kind: Status
    crash_reason: Optional[str] = None
    label: Label
    instructions: int = 0
    """Instructions retired by the controller."""
    retained: bool = False
    summary_file: Optional[str] = None
    """Path of the run's summary CSV relative to the corpus directory; set for retained runs."""
    error: Optional[str] = None
    """Set when the run could not be simulated at all."""


class CorpusInfo(BaseModel):
    version_tag: str
    program_name: str
    mission_ids: List[str]
    seeds: Dict[str, int]
    """Odometry noise seed of each mission."""
    config: CorpusConfig
    mutants: int = 0
    """Valid mutants run, the unmutated program excluded."""


class Corpus(BaseModel):
    """A built corpus: the final-summary dataset, every run's manifest record and the retained runs' streams."""

    info: CorpusInfo
    dataset: LabeledDataset
    records: List[ManifestRecord]
    streams: Dict[str, SummaryStream] = {}
    """Summary streams of retained runs, by run id."""
    timings: Dict[str, float] = {}
    """Wall-clock seconds spent simulating each run, by run id. Kept apart from the replayable files."""

    @property
    def retained(self) -> List[ManifestRecord]:
        return [record for record in self.records if record.retained]

    @property
    def mean_wall_seconds(self) -> Optional[float]:
        """Mean wall-clock seconds spent simulating one retained run, if any were timed."""
        timings = [self.timings[record.run_id] for record in self.retained if record.run_id in self.timings]
        return sum(timings) / len(timings) if timings else None

    def interval_dataset(self, interval: int) -> Optional[LabeledDataset]:
        """Summaries at the `interval`-th boundary of every retained run that got that far, with the run's label.

        Returns:
            The dataset, or `None` if no run reached the interval.
        """
        examples = []
        for record in self.retained:
            stream = self.streams.get(record.run_id)
            summary = None if stream is None else stream.summary_at(interval)
            if summary is None:
                continue
            examples.append(
                LabeledExample(
                    features=summary,
                    label=record.label,
                    provenance=Provenance(mutant_id=record.mutant_id, mission_id=record.mission_id, interval=interval),
                )
            )
        if not examples:
            return None
        return LabeledDataset(examples=examples, version_tag=self.dataset.version_tag)

    @property
    def max_interval(self) -> int:
        return max((len(stream.entries) for stream in self.streams.values()), default=0)

    def write(self, root: Union[str, Path]) -> Path:
        """Persist the corpus under `root`: `corpus.json`, `manifest.jsonl`, `summaries/` and `dataset.csv`.

        Run timings go to `timing.csv`, the one file that differs between replays of the same build.
        """
        root = Path(root)
        root.mkdir(parents=True, exist_ok=True)
        (root / CORPUS_FILE).write_text(self.info.json(indent=2), encoding="utf-8")
        with (root / MANIFEST_FILE).open("w", encoding="utf-8") as manifest:
            for record in self.records:
                manifest.write(record.json() + "\n")
        for record in self.retained:
            path = root / str(record.summary_file)
            write_stream_csv(self.streams[record.run_id], path, record.run_id, int(record.label))
        self.dataset.to_csv(root / DATASET_FILE)
        if self.timings:
            timing = pd.DataFrame(list(self.timings.items()), columns=["run_id", "wall_seconds"])
            timing.to_csv(root / TIMING_FILE, index=False)
        logger.info("wrote corpus of %d runs to %s", len(self.dataset), root)
        return root


def load_corpus(root: Union[str, Path]) -> Corpus:
    """Load a corpus directory written by `Corpus.write`.

    Raises:
        CorpusException: If a required file is missing.
    """
    root = Path(root)
    for name in (CORPUS_FILE, MANIFEST_FILE, DATASET_FILE):
        if not (root / name).is_file():
            raise CorpusException(f"{root} is not a corpus directory, {name} is missing")
    info = CorpusInfo.parse_raw((root / CORPUS_FILE).read_text(encoding="utf-8"))
    records = [
        ManifestRecord.parse_obj(json.loads(line))
        for line in (root / MANIFEST_FILE).read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]
    streams = {}
    for record in records:
        if record.retained and record.summary_file:
            _, streams[record.run_id] = read_stream_csv(root / record.summary_file, info.config.interval_size)
    dataset = LabeledDataset.from_csv(root / DATASET_FILE, version_tag=info.version_tag)
    timings = {}
    if (root / TIMING_FILE).is_file():
        timing = pd.read_csv(root / TIMING_FILE, dtype={"run_id": str})
        timings = dict(zip(timing["run_id"], timing["wall_seconds"].astype(float)))
    return Corpus(info=info, dataset=dataset, records=records, streams=streams, timings=timings)
