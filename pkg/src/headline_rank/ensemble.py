"""Blend rank scores across (model, embedding) members and label pairs.

Each member scores every headline in the evaluation pool, the per-member
scores are normalized over that pool, and the normalized scores are
averaged member-wise into one rank per headline.  A pair's label then
follows from the rank difference d = r_right - r_left: within the draw
threshold it is a draw, otherwise the higher-ranked side wins.

Predictions file: JSON Lines with keys ``left_url``, ``right_url``,
``r_left``, ``r_right``, ``pred`` ("left" | "right" | "draw").
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from ._parallel import map_ordered
from .data import EmbeddingStore, Label, PairDataset
from .ranker import RankerModel


class PredictionsFormatError(ValueError):
    """A predictions file line that cannot be parsed."""


class Normalization(Enum):
    NONE = "none"
    ZSCORE = "zscore"

    @classmethod
    def parse(cls, text: str) -> "Normalization":
        try:
            return cls(text)
        except ValueError:
            raise ValueError(f"unknown normalization {text!r}") from None


@dataclass(frozen=True)
class PairScores:
    """Blended per-headline ranks for one pair."""

    r_left: float
    r_right: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.r_left) and math.isfinite(self.r_right)):
            raise ValueError("pair scores must be finite")

    @property
    def difference(self) -> float:
        return self.r_right - self.r_left


@dataclass(frozen=True)
class BlendSpec:
    """Ordered ensemble members plus normalization and draw-threshold settings."""

    members: tuple[tuple[RankerModel, EmbeddingStore], ...]
    normalization: Normalization = Normalization.ZSCORE
    draw_threshold: float = 0.1

    def __post_init__(self) -> None:
        if len(self.members) < 1:
            raise ValueError("ensemble needs at least one member")
        for i, (model, store) in enumerate(self.members):
            if model.dim != store.dim:
                raise ValueError(
                    f"member {i}: model dim {model.dim} does not match store dim {store.dim}"
                )
        if not (math.isfinite(self.draw_threshold) and self.draw_threshold >= 0):
            raise ValueError(f"draw_threshold must be >= 0, got {self.draw_threshold}")


@dataclass(frozen=True)
class Prediction:
    """One scored pair: blended ranks plus the decided label (never bad)."""

    left_id: str
    right_id: str
    scores: PairScores
    label: Label


def normalize_scores(
    scores: Sequence[float] | np.ndarray, method: Normalization
) -> np.ndarray:
    """Identity for ``none``; population z-score for ``zscore``.

    A constant input z-scores to all zeros rather than dividing by zero.
    """
    arr = np.asarray(scores, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("cannot normalize an empty score list")
    if not np.isfinite(arr).all():
        raise ValueError("scores must be finite")
    if method is Normalization.NONE:
        return arr.copy()
    sigma = arr.std()
    if sigma == 0.0:
        return np.zeros_like(arr)
    return (arr - arr.mean()) / sigma


def blend_ranks(spec: BlendSpec, eval_pool: Sequence[str]) -> np.ndarray:
    """Blended rank for every pool headline: per-member score, normalize, average."""
    pool = list(eval_pool)
    if not pool:
        raise ValueError("evaluation pool is empty")

    def member_column(indexed: tuple[int, tuple[RankerModel, EmbeddingStore]]) -> np.ndarray:
        i, (model, store) = indexed
        rows = []
        for headline_id in pool:
            if headline_id not in store:
                raise ValueError(f"member {i}: missing embedding for headline ID {headline_id!r}")
            rows.append(store.lookup(headline_id))
        return normalize_scores(model.score_matrix(np.stack(rows)), spec.normalization)

    columns = map_ordered(member_column, list(enumerate(spec.members)))
    return np.mean(np.stack(columns, axis=0), axis=0)


def blend_pair(
    spec: BlendSpec, left_id: str, right_id: str, eval_pool: Sequence[str]
) -> PairScores:
    """Blended ranks of one pair, normalized over the given evaluation pool."""
    pool = list(eval_pool)
    position = {headline_id: i for i, headline_id in enumerate(pool)}
    if left_id not in position or right_id not in position:
        raise ValueError("eval_pool must contain both headline IDs")
    ranks = blend_ranks(spec, pool)
    return PairScores(float(ranks[position[left_id]]), float(ranks[position[right_id]]))


def decide_label(scores: PairScores, draw_threshold: float) -> Label:
    """Thresholded rank-difference rule; the draw band takes precedence."""
    if draw_threshold < 0:
        raise ValueError(f"draw_threshold must be >= 0, got {draw_threshold}")
    d = scores.r_right - scores.r_left
    if abs(d) <= draw_threshold:
        return Label.DRAW
    return Label.LEFT if d < 0 else Label.RIGHT


def predict_dataset(spec: BlendSpec, dataset: PairDataset) -> list[Prediction]:
    """Score and label every record, in order, over the dataset-wide pool.

    Bad-labeled records are predicted like any other; the metric drops them
    later.  The evaluation pool is all distinct headline IDs in the dataset.
    """
    if len(dataset) == 0:
        return []
    pool = dataset.distinct_ids()
    ranks = blend_ranks(spec, pool)
    position = {headline_id: i for i, headline_id in enumerate(pool)}
    out = []
    for rec in dataset:
        scores = PairScores(
            float(ranks[position[rec.left_id]]), float(ranks[position[rec.right_id]])
        )
        out.append(
            Prediction(rec.left_id, rec.right_id, scores, decide_label(scores, spec.draw_threshold))
        )
    return out


def write_predictions(predictions: Sequence[Prediction], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in predictions:
            fh.write(
                json.dumps(
                    {
                        "left_url": p.left_id,
                        "right_url": p.right_id,
                        "r_left": p.scores.r_left,
                        "r_right": p.scores.r_right,
                        "pred": p.label.value,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


def read_predictions(path: str | Path) -> list[Prediction]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            try:
                obj = json.loads(line)
                scores = PairScores(float(obj["r_left"]), float(obj["r_right"]))
                label = Label.parse(obj["pred"])
                prediction = Prediction(str(obj["left_url"]), str(obj["right_url"]), scores, label)
            except (ValueError, KeyError, TypeError) as exc:
                raise PredictionsFormatError(f"line {lineno}: {exc}") from None
            if label is Label.BAD:
                raise PredictionsFormatError(f"line {lineno}: predicted label may not be 'bad'")
            out.append(prediction)
    return out
