"""Classification metrics and the shared evaluation entry point.

Scores follow the zero-division convention: a precision or recall whose
denominator is zero contributes 0, which is exactly how a classifier
that never predicts a minority category shows up in the comparison.
Confusion matrix rows are truth, columns are predictions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..corpus import LabeledCorpus
from ..errors import CorpusError, HygieneError

__all__ = ["ClsMetrics", "metrics_from_predictions", "evaluate"]


@dataclass
class ClsMetrics:
    """Accuracy, per-category P/R/F1, macro averages, and confusion."""

    accuracy: float
    precision: list[float]
    recall: list[float]
    f1: list[float]
    macro_precision: float
    macro_recall: float
    macro_f1: float
    confusion: list[list[int]]

    def as_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "precision": list(self.precision),
            "recall": list(self.recall),
            "f1": list(self.f1),
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
            "confusion": [list(row) for row in self.confusion],
        }


def metrics_from_predictions(truth, predictions, n_categories: int) -> ClsMetrics:
    """Compute the full metric set from parallel label arrays."""
    truth = np.asarray(truth, dtype=np.int64)
    predictions = np.asarray(predictions, dtype=np.int64)
    if truth.shape != predictions.shape or truth.ndim != 1:
        raise CorpusError(
            f"truth {truth.shape} and predictions {predictions.shape} must be "
            "parallel 1-d arrays"
        )
    if truth.size == 0:
        raise CorpusError("cannot score an empty prediction set")
    k = n_categories
    if truth.max() >= k or predictions.max() >= k or truth.min() < 0 or predictions.min() < 0:
        raise CorpusError(f"labels outside the {k} configured categories")

    confusion = np.zeros((k, k), dtype=np.int64)
    np.add.at(confusion, (truth, predictions), 1)

    precision = []
    recall = []
    f1 = []
    for c in range(k):
        correct = confusion[c, c]
        predicted = confusion[:, c].sum()
        actual = confusion[c, :].sum()
        p = correct / predicted if predicted else 0.0
        r = correct / actual if actual else 0.0
        precision.append(float(p))
        recall.append(float(r))
        f1.append(float(2 * p * r / (p + r)) if p + r else 0.0)

    return ClsMetrics(
        accuracy=float(np.trace(confusion) / truth.size),
        precision=precision,
        recall=recall,
        f1=f1,
        macro_precision=float(np.mean(precision)),
        macro_recall=float(np.mean(recall)),
        macro_f1=float(np.mean(f1)),
        confusion=[[int(x) for x in row] for row in confusion],
    )


def evaluate(model, test_slice, features=None) -> ClsMetrics:
    """Score a model on a real-only evaluation slice.

    Conventional models predict from a feature matrix aligned with the
    records (pass features); neural models predict from the records
    themselves (leave features as None).
    """
    if isinstance(test_slice, LabeledCorpus):
        records = list(test_slice.records)
    else:
        records = list(test_slice)
    if not records:
        raise CorpusError("cannot evaluate on an empty slice")
    for rec in records:
        if rec.provenance == "synthetic":
            raise HygieneError("evaluation slice contains synthetic records")
    if features is not None:
        features = np.asarray(features, dtype=float)
        if features.shape[0] != len(records):
            raise CorpusError(
                f"{features.shape[0]} feature rows for {len(records)} records"
            )
        predictions = model.predict(features)
    else:
        predictions = model.predict(records)
    truth = [rec.label for rec in records]
    return metrics_from_predictions(truth, predictions, model.n_categories)
