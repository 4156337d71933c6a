import logging
from typing import TYPE_CHECKING, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel

from failscope.corpus.dataset import LabeledDataset, balance
from failscope.corpus.labeling import Label
from failscope.exceptions import DatasetException
from failscope.instrument.signals import NUM_SIGNALS, SIGNAL_NAMES
from failscope.learn.metrics import MeanMetrics, Metrics
from failscope.learn.tree import fit
from failscope.learn.validation import MIN_FOLD_SIZE, CvReport, kfold

if TYPE_CHECKING:
    from failscope.corpus.store import Corpus

logger = logging.getLogger(__name__)


def cross_version_eval(
    train_ds: LabeledDataset, test_ds: LabeledDataset, seed: int = 0, feature_mask: Optional[Sequence[int]] = None
) -> Metrics:
    """Train on one program version and score on another, without cross validation.

    The training set is balanced before fitting; the test set is scored as is.

    Raises:
        DatasetException: If the training set holds a single class.
    """
    if train_ds.version_tag == test_ds.version_tag:
        logger.warning("training and test sets share version tag %s", train_ds.version_tag)
    tree = fit(balance(train_ds, seed), feature_mask)
    return Metrics.from_predictions(test_ds.labels(), tree.predict_batch(test_ds.features()))


class EarlyDetectionRow(BaseModel):
    interval: Optional[int] = None
    """1-based summary interval; `None` for the final summaries."""
    n: int
    report: CvReport


def early_detection_sweep(corpus: "Corpus", seed: int = 0) -> List[EarlyDetectionRow]:
    """Cross-validate on the summaries taken at each interval boundary, then on the final summaries.

    Each interval's dataset holds the retained executions that reached it, labeled with their final outcome.
    Intervals with fewer than 20 such executions are skipped.
    """
    rows = []
    for interval in range(1, corpus.max_interval + 1):
        dataset = corpus.interval_dataset(interval)
        n = 0 if dataset is None else len(dataset)
        if dataset is None or n < 2 * MIN_FOLD_SIZE:
            logger.info("skipping interval %d: %d executions reached it", interval, n)
            continue
        rows.append(EarlyDetectionRow(interval=interval, n=n, report=kfold(dataset, seed)))
    rows.append(EarlyDetectionRow(n=len(corpus.dataset), report=kfold(corpus.dataset, seed)))
    return rows


class LearningCurveRow(BaseModel):
    n: int
    k: int
    mean: MeanMetrics
    generation_minutes: Optional[float] = None
    """Estimated simulation time needed to produce `n` executions."""


def stratified_sample(dataset: LabeledDataset, size: int, seed: int) -> LabeledDataset:
    """Draw `size` examples keeping the class ratio, with at least one of each class present.

    The sample keeps the dataset's example order.

    Raises:
        DatasetException: If `size` exceeds the dataset.
    """
    if size > len(dataset):
        raise DatasetException(f"cannot sample {size} examples from {len(dataset)}")
    if size == len(dataset):
        return dataset
    labels = dataset.labels()
    failing = np.nonzero(labels == Label.FAIL)[0]
    passing = np.nonzero(labels == Label.PASS)[0]
    fail_count = int(round(size * len(failing) / len(dataset)))
    if len(failing) and len(passing):
        fail_count = min(max(fail_count, 1), size - 1)
    fail_count = min(fail_count, len(failing))
    pass_count = min(size - fail_count, len(passing))
    rng = np.random.default_rng(seed)
    chosen = np.concatenate(
        [rng.choice(failing, size=fail_count, replace=False), rng.choice(passing, size=pass_count, replace=False)]
    )
    return dataset.take(sorted(int(index) for index in chosen))


def learning_curve(
    dataset: LabeledDataset, sizes: Sequence[int], seed: int = 0, seconds_per_run: Optional[float] = None
) -> List[LearningCurveRow]:
    """Cross-validate on stratified subsamples of increasing size.

    Args:
        dataset: The full dataset.
        sizes: Sample sizes, each between 20 and the dataset size.
        seed: Seed of the subsampling and of cross validation.
        seconds_per_run: Mean simulation time of one execution, used to estimate generation time.

    Returns:
        One row per size, in the order given.
    """
    rows = []
    for size in sizes:
        report = kfold(stratified_sample(dataset, size, seed), seed)
        minutes = None if seconds_per_run is None else size * seconds_per_run / 60
        rows.append(LearningCurveRow(n=size, k=report.k, mean=report.mean, generation_minutes=minutes))
    return rows


class ReducedFeatureReport(BaseModel):
    selected: List[int]
    """Indices of the retained signals, ascending."""
    full: CvReport
    reduced: CvReport

    @property
    def selected_names(self) -> List[str]:
        return [SIGNAL_NAMES[index] for index in self.selected]


def rank_features(report: CvReport) -> List[int]:
    """Signal indices by decreasing mean importance; equal importances keep signal order."""
    return sorted(range(NUM_SIGNALS), key=lambda index: (-report.mean_importances[index], index))


def reduced_feature_eval(dataset: LabeledDataset, top_k: int = 5, seed: int = 0) -> ReducedFeatureReport:
    """Cross-validate on all signals, then again on only the `top_k` most important ones.

    Raises:
        DatasetException: If `top_k` is outside 1..26.
    """
    if not 1 <= top_k <= NUM_SIGNALS:
        raise DatasetException(f"top_k must lie between 1 and {NUM_SIGNALS}")
    full = kfold(dataset, seed)
    selected = sorted(rank_features(full)[:top_k])
    reduced = kfold(dataset, seed, selected)
    return ReducedFeatureReport(selected=selected, full=full, reduced=reduced)
