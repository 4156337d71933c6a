import logging
from typing import List, NamedTuple, Optional, Sequence

import numpy as np
from pydantic import BaseModel

from failscope.corpus.dataset import LabeledDataset, balance
from failscope.exceptions import DatasetException
from failscope.instrument.signals import NUM_SIGNALS
from failscope.learn.metrics import MeanMetrics, Metrics
from failscope.learn.tree import fit

logger = logging.getLogger(__name__)

MIN_FOLD_SIZE = 10
MAX_FOLDS = 10


def fold_count(n: int) -> int:
    """Number of folds for `n` examples: 10 from 100 examples on, else the largest K leaving 10 examples per fold.

    Raises:
        DatasetException: If `n` is below 20, which leaves fewer than two folds of ten.
    """
    if n < 2 * MIN_FOLD_SIZE:
        raise DatasetException(f"K-fold cross validation needs at least {2 * MIN_FOLD_SIZE} examples, got {n}")
    if n >= MAX_FOLDS * MIN_FOLD_SIZE:
        return MAX_FOLDS
    return n // MIN_FOLD_SIZE


class FoldSplit(NamedTuple):
    test_index: np.ndarray
    """Positions of the fold's test examples in the unbalanced dataset."""
    train: LabeledDataset
    """Training portion, balanced."""
    test: LabeledDataset
    """Test portion, balanced."""


class FoldResult(BaseModel):
    fold: int
    test_index: List[int]
    train_size: int
    test_size: int
    metrics: Metrics
    importances: List[float]


class CvReport(BaseModel):
    k: int
    n: int
    """Examples before balancing."""
    folds: List[FoldResult]
    mean: MeanMetrics
    mean_importances: List[float]
    nonzero_folds: List[int]
    """Per signal, the number of folds in which it had non-zero importance."""
    feature_mask: Optional[List[int]] = None


def _balanced(part: LabeledDataset, seed: int, what: str) -> LabeledDataset:
    passing, failing = part.class_counts()
    if passing and failing:
        return balance(part, seed)
    logger.warning("%s portion holds a single class (%d pass, %d fail); left unbalanced", what, passing, failing)
    return part


def split_folds(dataset: LabeledDataset, seed: int) -> List[FoldSplit]:
    """Shuffle with `seed`, cut into contiguous folds and balance each fold's train and test portions separately.

    Duplicates made by balancing stay on the side of the split their original is on.

    Raises:
        DatasetException: If the dataset holds fewer than 20 examples.
    """
    k = fold_count(len(dataset))
    order = np.random.default_rng(seed).permutation(len(dataset))
    parts = np.array_split(order, k)
    splits = []
    for fold, test_index in enumerate(parts):
        train_index = np.concatenate([part for other, part in enumerate(parts) if other != fold])
        splits.append(
            FoldSplit(
                test_index=test_index,
                train=_balanced(dataset.take(train_index.tolist()), seed + 2 * fold, "training"),
                test=_balanced(dataset.take(test_index.tolist()), seed + 2 * fold + 1, "test"),
            )
        )
    return splits


def kfold(dataset: LabeledDataset, seed: int = 0, feature_mask: Optional[Sequence[int]] = None) -> CvReport:
    """K-fold cross validation of the decision tree.

    Args:
        dataset: At least 20 examples.
        seed: Seed of the shuffle and of per-fold balancing.
        feature_mask: Signals the trees may split on.

    Returns:
        Per-fold metrics and importances, their means, and per signal the number of folds it mattered in.

    Raises:
        DatasetException: If the dataset holds fewer than 20 examples.
    """
    mask = None if feature_mask is None else sorted(set(feature_mask))
    if mask is not None and len(mask) == NUM_SIGNALS:
        mask = None
    results = []
    for fold, split in enumerate(split_folds(dataset, seed)):
        tree = fit(split.train, mask)
        predictions = tree.predict_batch(split.test.features())
        results.append(
            FoldResult(
                fold=fold,
                test_index=split.test_index.tolist(),
                train_size=len(split.train),
                test_size=len(split.test),
                metrics=Metrics.from_predictions(split.test.labels(), predictions),
                importances=tree.importances.tolist(),
            )
        )
    importances = np.array([result.importances for result in results])
    report = CvReport(
        k=len(results),
        n=len(dataset),
        folds=results,
        mean=MeanMetrics.of([result.metrics for result in results]),
        mean_importances=importances.mean(axis=0).tolist(),
        nonzero_folds=(importances > 0).sum(axis=0).astype(int).tolist(),
        feature_mask=mask,
    )
    logger.debug("%d-fold cross validation on %d examples: F %.3f", report.k, report.n, report.mean.f)
    return report
