from typing import Sequence

import numpy as np
from pydantic import BaseModel


def _ratio(numerator: float, denominator: float) -> float:
    return numerator / denominator if denominator else 0.0


class Metrics(BaseModel):
    """Binary classification metrics with failing runs as the positive class.

    A ratio whose denominator is zero is 0.
    """

    tp: int
    fp: int
    tn: int
    fn: int
    acc: float
    prec: float
    rec: float
    f: float

    @classmethod
    def from_counts(cls, tp: int, fp: int, tn: int, fn: int) -> "Metrics":
        if min(tp, fp, tn, fn) < 0:
            raise ValueError("confusion counts must not be negative")
        prec = _ratio(tp, tp + fp)
        rec = _ratio(tp, tp + fn)
        return cls(
            tp=tp,
            fp=fp,
            tn=tn,
            fn=fn,
            acc=_ratio(tp + tn, tp + fp + tn + fn),
            prec=prec,
            rec=rec,
            f=_ratio(2 * prec * rec, prec + rec),
        )

    @classmethod
    def from_predictions(cls, y_true: Sequence[int], y_pred: Sequence[int]) -> "Metrics":
        truth = np.asarray(y_true)
        predicted = np.asarray(y_pred)
        if truth.shape != predicted.shape:
            raise ValueError("labels and predictions differ in length")
        return cls.from_counts(
            tp=int(np.sum((truth == 1) & (predicted == 1))),
            fp=int(np.sum((truth == 0) & (predicted == 1))),
            tn=int(np.sum((truth == 0) & (predicted == 0))),
            fn=int(np.sum((truth == 1) & (predicted == 0))),
        )


class MeanMetrics(BaseModel):
    """Arithmetic means of the ratios over several evaluations."""

    acc: float
    prec: float
    rec: float
    f: float

    @classmethod
    def of(cls, metrics: Sequence[Metrics]) -> "MeanMetrics":
        if not metrics:
            raise ValueError("cannot average zero evaluations")
        return cls(
            acc=float(np.mean([m.acc for m in metrics])),
            prec=float(np.mean([m.prec for m in metrics])),
            rec=float(np.mean([m.rec for m in metrics])),
            f=float(np.mean([m.f for m in metrics])),
        )
