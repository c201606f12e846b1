"""Example-based multi-label metrics, averaged over a test set.

Empty-set conventions: accuracy, precision, recall and f1 are 1 when both
the true and predicted label sets are empty; precision is 0 when only the
prediction is empty, recall is 0 when only the truth is empty.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

METRIC_NAMES = ("accuracy", "hamming_loss", "subset_accuracy", "precision", "recall", "f1")
LOSS_METRICS = frozenset({"hamming_loss"})


@dataclass(frozen=True)
class MetricReport:
    accuracy: float
    hamming_loss: float
    subset_accuracy: float
    precision: float
    recall: float
    f1: float

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in METRIC_NAMES}

    def __getitem__(self, name: str) -> float:
        if name not in METRIC_NAMES:
            raise KeyError(name)
        return getattr(self, name)


def _pair(truth, predicted) -> tuple[np.ndarray, np.ndarray]:
    t = np.asarray(truth).ravel()
    p = np.asarray(predicted).ravel()
    if t.shape != p.shape or t.size == 0:
        raise ValueError("truth and prediction must be equal-length non-empty vectors")
    if not (np.isin(t, (0, 1)).all() and np.isin(p, (0, 1)).all()):
        raise ValueError("label vectors must be binary")
    return t.astype(np.int64), p.astype(np.int64)


def accuracy(truth, predicted) -> float:
    """Jaccard overlap of the true and predicted label sets."""
    t, p = _pair(truth, predicted)
    union = int(np.count_nonzero(t | p))
    if union == 0:
        return 1.0
    return int(np.count_nonzero(t & p)) / union


def hamming_loss(truth, predicted) -> float:
    """Fraction of label positions predicted incorrectly."""
    t, p = _pair(truth, predicted)
    return int(np.count_nonzero(t != p)) / t.size


def subset_accuracy(truth, predicted) -> float:
    """1 only when the predicted label set matches the truth exactly."""
    t, p = _pair(truth, predicted)
    return float(np.array_equal(t, p))


def precision(truth, predicted) -> float:
    t, p = _pair(truth, predicted)
    n_pred = int(np.count_nonzero(p))
    if n_pred == 0:
        return 1.0 if not np.count_nonzero(t) else 0.0
    return int(np.count_nonzero(t & p)) / n_pred


def recall(truth, predicted) -> float:
    t, p = _pair(truth, predicted)
    n_true = int(np.count_nonzero(t))
    if n_true == 0:
        return 1.0 if not np.count_nonzero(p) else 0.0
    return int(np.count_nonzero(t & p)) / n_true


def f1(truth, predicted) -> float:
    """Harmonic mean of example-based precision and recall."""
    pr = precision(truth, predicted)
    rc = recall(truth, predicted)
    if pr + rc == 0.0:
        return 0.0
    return 2.0 * pr * rc / (pr + rc)


def evaluate_pair(truth, predicted) -> MetricReport:
    return MetricReport(
        accuracy=accuracy(truth, predicted),
        hamming_loss=hamming_loss(truth, predicted),
        subset_accuracy=subset_accuracy(truth, predicted),
        precision=precision(truth, predicted),
        recall=recall(truth, predicted),
        f1=f1(truth, predicted),
    )


def aggregate(truths: np.ndarray, predictions: np.ndarray) -> MetricReport:
    """Per-example metrics averaged over matching (n, m) truth/prediction rows."""
    truths = np.asarray(truths)
    predictions = np.asarray(predictions)
    if truths.ndim != 2 or truths.shape != predictions.shape or truths.shape[0] == 0:
        raise ValueError("expected matching non-empty (instances, labels) matrices")
    reports = [evaluate_pair(truths[i], predictions[i]) for i in range(truths.shape[0])]
    return MetricReport(
        **{
            name: float(np.mean([r[name] for r in reports]))
            for name in METRIC_NAMES
        }
    )


def tuning_score(report: MetricReport, metric: str) -> float:
    """Comparable score for grid search: loss metrics are negated so that
    strictly-greater always means strictly better."""
    value = report[metric]
    return -value if metric in LOSS_METRICS else value
