import logging
from pathlib import Path
from typing import Any, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, validator

from failscope.corpus.labeling import Label
from failscope.exceptions import DatasetException
from failscope.instrument.io import NO_LABEL, STREAM_COLUMNS
from failscope.instrument.signals import SIGNAL_NAMES, SignalSummary

logger = logging.getLogger(__name__)

PROVENANCE_COLUMNS = ("mutant_id", "mission_id")
DATASET_COLUMNS = (*STREAM_COLUMNS, "label", *PROVENANCE_COLUMNS)
"""Column order of `dataset.csv`: the summary CSV contract, the label, then where the row came from."""


class Provenance(BaseModel):
    class Config:
        frozen = True

    mutant_id: str
    mission_id: str
    interval: Optional[int] = None
    """1-based interval the summary was taken at; `None` for the final summary."""

    @property
    def run_id(self) -> str:
        return f"{self.mutant_id}-{self.mission_id}"


class LabeledExample(BaseModel):
    class Config:
        frozen = True

    features: SignalSummary
    label: Label
    provenance: Provenance


class LabeledDataset(BaseModel):
    """Labeled signal summaries of one program version."""

    examples: List[LabeledExample]
    version_tag: str = "v0"
    """Version of the program the examples were recorded on."""

    @validator("examples")
    def validate_examples(cls, value: List[LabeledExample]) -> List[LabeledExample]:  # pylint: disable=E0213
        if not value:
            raise ValueError("a dataset needs at least one example")
        return value

    def __len__(self) -> int:
        return len(self.examples)

    def features(self) -> np.ndarray:
        """The `(n, 26)` feature matrix in canonical signal order."""
        return np.array([example.features.as_vector() for example in self.examples], dtype=np.int64)

    def labels(self) -> np.ndarray:
        return np.array([int(example.label) for example in self.examples], dtype=np.int64)

    def class_counts(self) -> Tuple[int, int]:
        """Number of passing and failing examples."""
        failing = sum(example.label is Label.FAIL for example in self.examples)
        return len(self.examples) - failing, failing

    def take(self, indices: Sequence[int]) -> "LabeledDataset":
        return LabeledDataset(examples=[self.examples[i] for i in indices], version_tag=self.version_tag)

    def to_frame(self) -> pd.DataFrame:
        rows: List[Tuple[Any, ...]] = []
        for example in self.examples:
            provenance = example.provenance
            rows.append(
                (
                    provenance.run_id,
                    example.features.InsCount,
                    NO_LABEL,
                    *example.features.as_vector(),
                    int(provenance.interval is None),
                    int(example.label),
                    provenance.mutant_id,
                    provenance.mission_id,
                )
            )
        return pd.DataFrame(rows, columns=list(DATASET_COLUMNS))

    def to_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False)
        return path

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, version_tag: str = "v0", interval_size: int = 10_000) -> "LabeledDataset":
        """Rebuild a dataset from the rows written by `to_frame`.

        Args:
            frame: Rows in the `dataset.csv` layout.
            version_tag: Version of the program the rows were recorded on.
            interval_size: Used to recover the interval of non-final rows.

        Raises:
            DatasetException: If columns are missing or the frame is empty.
        """
        missing = [column for column in DATASET_COLUMNS if column not in frame.columns]
        if missing:
            raise DatasetException(f"dataset is missing columns: {', '.join(missing)}")
        if frame.empty:
            raise DatasetException("dataset has no rows")
        examples = []
        for record in frame.to_dict("records"):
            interval = None if record["final"] else int(record["instructions_executed"]) // interval_size
            examples.append(
                LabeledExample(
                    features=SignalSummary.from_vector([record[name] for name in SIGNAL_NAMES]),
                    label=Label(int(record["label"])),
                    provenance=Provenance(
                        mutant_id=str(record["mutant_id"]), mission_id=str(record["mission_id"]), interval=interval
                    ),
                )
            )
        return cls(examples=examples, version_tag=version_tag)

    @classmethod
    def from_csv(cls, path: Union[str, Path], version_tag: str = "v0") -> "LabeledDataset":
        return cls.from_frame(pd.read_csv(path, dtype={"mutant_id": str, "mission_id": str}), version_tag)


def balance(dataset: LabeledDataset, seed: int) -> LabeledDataset:
    """Upsample the minority class by duplicating pseudo-randomly chosen minority examples.

    Duplicates are drawn with replacement and appended after the original examples, which are kept in order and
    unchanged.

    Args:
        dataset: A dataset containing both classes.
        seed: Seed of the draws.

    Returns:
        A dataset with equal class counts. An already balanced dataset is returned unchanged.

    Raises:
        DatasetException: If only one class is present.
    """
    passing, failing = dataset.class_counts()
    if not passing or not failing:
        raise DatasetException("cannot balance a dataset containing a single class")
    if passing == failing:
        return dataset
    minority = Label.FAIL if failing < passing else Label.PASS
    candidates = [index for index, example in enumerate(dataset.examples) if example.label is minority]
    deficit = abs(passing - failing)
    rng = np.random.default_rng(seed)
    duplicates = rng.choice(np.array(candidates), size=deficit, replace=True)
    logger.debug("duplicating %d %s examples", deficit, minority.name.lower())
    return LabeledDataset(
        examples=dataset.examples + [dataset.examples[int(index)] for index in duplicates],
        version_tag=dataset.version_tag,
    )
