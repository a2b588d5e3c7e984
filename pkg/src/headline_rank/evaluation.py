"""Weighted pair-accuracy metric, confusion counts, and the error report.

The metric credits each evaluated pair through a fixed weight matrix over
(gold, predicted) labels: exact matches score 1, a draw on one side only
scores 0.5, opposite sides score 0.  Gold "bad" rows are dropped before
scoring; a predicted "bad" is rejected outright.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import Label
from .ensemble import Prediction

# Rows are gold, columns are predicted, in the order left / right / draw.
WEIGHT_MATRIX = np.array(
    [
        [1.0, 0.0, 0.5],
        [0.0, 1.0, 0.5],
        [0.5, 0.5, 1.0],
    ]
)

_AXIS = (Label.LEFT, Label.RIGHT, Label.DRAW)
_AXIS_INDEX = {label: i for i, label in enumerate(_AXIS)}


class MetricUndefinedError(ValueError):
    """No evaluable pairs remain after dropping gold 'bad' rows."""


@dataclass(frozen=True)
class ErrorCase:
    """One opposite-side mistake, kept for manual review."""

    left_id: str
    right_id: str
    gold: Label
    predicted: Label
    r_left: float
    r_right: float

    @property
    def margin(self) -> float:
        return abs(self.r_right - self.r_left)


@dataclass(frozen=True)
class EvaluationReport:
    weighted_accuracy: float
    n_evaluated: int
    n_dropped: int
    confusion: np.ndarray

    def to_dict(self) -> dict:
        return {
            "weighted_accuracy": self.weighted_accuracy,
            "n_evaluated": self.n_evaluated,
            "n_dropped": self.n_dropped,
            "confusion": {
                gold.value: {
                    pred.value: int(self.confusion[_AXIS_INDEX[gold], _AXIS_INDEX[pred]])
                    for pred in _AXIS
                }
                for gold in _AXIS
            },
        }


def pair_weight(gold: Label, predicted: Label) -> float:
    """Weight-matrix cell for one (gold, predicted) pair of labels."""
    if gold is Label.BAD:
        raise ValueError("gold 'bad' rows are dropped before scoring, not weighted")
    if predicted is Label.BAD:
        raise ValueError("'bad' is not a valid predicted label")
    return float(WEIGHT_MATRIX[_AXIS_INDEX[gold], _AXIS_INDEX[predicted]])


def evaluate(gold: Sequence[Label], predicted: Sequence[Label]) -> EvaluationReport:
    """Score aligned gold/predicted label sequences.

    Raises MetricUndefinedError when every gold row is 'bad'.
    """
    if len(gold) != len(predicted):
        raise ValueError(
            f"gold and predicted lengths differ: {len(gold)} vs {len(predicted)}"
        )
    confusion = np.zeros((3, 3), dtype=np.int64)
    total = 0.0
    n_eval = 0
    n_dropped = 0
    for g, p in zip(gold, predicted):
        if p is Label.BAD:
            raise ValueError("'bad' is not a valid predicted label")
        if g is Label.BAD:
            n_dropped += 1
            continue
        total += pair_weight(g, p)
        confusion[_AXIS_INDEX[g], _AXIS_INDEX[p]] += 1
        n_eval += 1
    if n_eval == 0:
        raise MetricUndefinedError("no evaluable pairs: every gold label is 'bad'")
    return EvaluationReport(total / n_eval, n_eval, n_dropped, confusion)


def weighted_accuracy(gold: Sequence[Label], predicted: Sequence[Label]) -> float:
    return evaluate(gold, predicted).weighted_accuracy


def confusion(gold: Sequence[Label], predicted: Sequence[Label]) -> np.ndarray:
    """3x3 counts over (gold, predicted) with gold 'bad' rows dropped.

    Unlike the metric, an all-dropped input is fine here: zero matrix.
    """
    if len(gold) != len(predicted):
        raise ValueError(
            f"gold and predicted lengths differ: {len(gold)} vs {len(predicted)}"
        )
    counts = np.zeros((3, 3), dtype=np.int64)
    for g, p in zip(gold, predicted):
        if p is Label.BAD:
            raise ValueError("'bad' is not a valid predicted label")
        if g is Label.BAD:
            continue
        counts[_AXIS_INDEX[g], _AXIS_INDEX[p]] += 1
    return counts


def error_report(
    gold: Sequence[Label], predictions: Sequence[Prediction], limit: int | None = None
) -> list[ErrorCase]:
    """Opposite-side mistakes ordered by rank margin, widest first.

    Only pairs where gold is left/right and the prediction is the other
    side qualify; draws on either side are not collected.
    """
    if len(gold) != len(predictions):
        raise ValueError(
            f"gold and predictions lengths differ: {len(gold)} vs {len(predictions)}"
        )
    cases = []
    for g, p in zip(gold, predictions):
        opposite = (g is Label.LEFT and p.label is Label.RIGHT) or (
            g is Label.RIGHT and p.label is Label.LEFT
        )
        if opposite:
            cases.append(
                ErrorCase(p.left_id, p.right_id, g, p.label, p.scores.r_left, p.scores.r_right)
            )
    cases.sort(key=lambda c: -c.margin)
    return cases if limit is None else cases[:limit]


def format_report(report: EvaluationReport) -> str:
    lines = [
        f"weighted accuracy: {report.weighted_accuracy:.4f}",
        f"pairs evaluated:   {report.n_evaluated}",
        f"pairs dropped:     {report.n_dropped}",
        "confusion (rows gold, cols predicted; order left/right/draw):",
    ]
    for i, gold_label in enumerate(_AXIS):
        row = "  ".join(f"{int(report.confusion[i, j]):6d}" for j in range(3))
        lines.append(f"  {gold_label.value:<5} {row}")
    return "\n".join(lines)
