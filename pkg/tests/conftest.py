"""Shared fixture builders for the test suite.

Everything here is synthetic: random embedding matrices, linear true
scores, and pair files derived from them.  All generators are seeded so
every test is reproducible run to run.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pytest

from headline_rank import (
    EmbeddingStore,
    Label,
    PairDataset,
    PairRecord,
    TokenEmbeddingSequence,
    TokenFile,
    write_token_file,
)


@dataclass(frozen=True)
class LinearProblem:
    """Documents with a linear ground-truth score, plus sampled index pairs."""

    ids: list[str]
    features: np.ndarray  # (n, dim) float32
    true_scores: np.ndarray  # (n,) float64, noise-free
    pairs: np.ndarray  # (k, 2) int64, arbitrary orientation

    @property
    def store(self) -> EmbeddingStore:
        return EmbeddingStore(self.ids, self.features)

    def oriented_pairs(self, scores: np.ndarray | None = None) -> np.ndarray:
        """Pairs flipped so the higher-scoring document comes first."""
        s = self.true_scores if scores is None else scores
        flip = s[self.pairs[:, 0]] <= s[self.pairs[:, 1]]
        out = self.pairs.copy()
        out[flip] = out[flip][:, ::-1]
        return out

    def labeled_records(self, draw_band: float = 0.0) -> PairDataset:
        """Gold records from the noise-free scores, draws inside the band."""
        z = (self.true_scores - self.true_scores.mean()) / self.true_scores.std()
        records = []
        for i, j in self.pairs:
            d = z[j] - z[i]
            if abs(d) <= draw_band:
                label = Label.DRAW
            else:
                label = Label.LEFT if d < 0 else Label.RIGHT
            records.append(PairRecord(self.ids[i], self.ids[j], label))
        return PairDataset(tuple(records))


def _sample_distinct_pairs(rng: np.random.Generator, n_docs: int, k: int) -> np.ndarray:
    pairs = []
    while len(pairs) < k:
        i, j = rng.integers(0, n_docs, 2)
        if i != j:
            pairs.append((int(i), int(j)))
    return np.array(pairs, dtype=np.int64)


@pytest.fixture
def make_linear_problem():
    def build(
        seed: int = 0, n_docs: int = 100, dim: int = 6, n_pairs: int = 300
    ) -> LinearProblem:
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(n_docs, dim)).astype(np.float32)
        w = rng.normal(size=dim)
        true = X.astype(np.float64) @ w
        ids = [f"https://news.example/{seed}/{i}" for i in range(n_docs)]
        return LinearProblem(ids, X, true, _sample_distinct_pairs(rng, n_docs, n_pairs))

    return build


@pytest.fixture
def write_pairs_file(tmp_path: Path):
    def build(rows: list[dict], name: str = "pairs.jsonl") -> Path:
        path = tmp_path / name
        with open(path, "w", encoding="utf-8") as fh:
            for row in rows:
                fh.write(json.dumps(row, ensure_ascii=False) + "\n")
        return path

    return build


@pytest.fixture
def dataset_to_rows():
    def convert(dataset: PairDataset) -> list[dict]:
        return [
            {"left_url": r.left_id, "right_url": r.right_id, "label": r.label.value}
            for r in dataset
        ]

    return convert


@pytest.fixture
def make_token_file(tmp_path: Path):
    def build(
        name: str,
        ids: list[str],
        dim: int,
        seed: int = 0,
        centers: np.ndarray | None = None,
        jitter: float = 0.02,
    ) -> Path:
        """Token file whose per-headline tokens cluster around a center.

        With explicit centers both mean and first-token pooling recover
        them (up to jitter); without, tokens are pure noise.
        """
        rng = np.random.default_rng(seed)
        sequences = []
        for row, headline_id in enumerate(ids):
            n_tokens = int(rng.integers(3, 7))
            if centers is None:
                tokens = rng.normal(size=(n_tokens, dim))
            else:
                tokens = centers[row] + rng.normal(scale=jitter, size=(n_tokens, dim))
            sequences.append(
                TokenEmbeddingSequence(headline_id, tokens.astype(np.float32))
            )
        path = tmp_path / name
        write_token_file(TokenFile(dim, tuple(sequences)), path)
        return path

    return build
