"""Domain types, dataset/embedding ingestion, training-pair construction, splits.

The two file formats owned by this module:

* Pairs file: UTF-8 JSON Lines, one object per line with keys
  ``left_url``, ``right_url`` and ``label`` (one of ``left`` / ``right`` /
  ``draw`` / ``bad``).  An optional ``lang`` key is ignored.
* HSE1 sentence-embedding file, little-endian binary:
  magic ``HSE1`` | u32 version=1 | u32 n_rows | u32 dim | u32 id_blob_len |
  id_blob (UTF-8 JSON array of n_rows strings) | n_rows*dim float32
  row-major payload.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import BinaryIO, Iterator, Sequence

import numpy as np

HSE1_MAGIC = b"HSE1"
HSE1_VERSION = 1
_HEADER = struct.Struct("<4sIIII")


class PairsFormatError(ValueError):
    """A pairs file line that cannot be turned into a PairRecord."""


class EmbeddingFormatError(ValueError):
    """An HSE1 file that violates the format contract."""


class Label(Enum):
    """Markup tag of a headline pair; ``bad`` flags a clustering error."""

    LEFT = "left"
    RIGHT = "right"
    DRAW = "draw"
    BAD = "bad"

    @classmethod
    def parse(cls, text: str) -> "Label":
        try:
            return cls(text)
        except ValueError:
            raise ValueError(f"unknown label {text!r}") from None


@dataclass(frozen=True)
class PairRecord:
    """One labeled headline pair, keyed by opaque headline IDs (URLs)."""

    left_id: str
    right_id: str
    label: Label

    def __post_init__(self) -> None:
        if not self.left_id or not self.right_id:
            raise ValueError("headline IDs must be non-empty")
        if self.left_id == self.right_id:
            raise ValueError(f"pair references the same headline twice: {self.left_id!r}")


@dataclass(frozen=True)
class PairDataset:
    """Ordered pair records, kept exactly as read (duplicates included)."""

    records: tuple[PairRecord, ...]

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[PairRecord]:
        return iter(self.records)

    def distinct_ids(self) -> list[str]:
        """All headline IDs in first-appearance order (left before right)."""
        seen: dict[str, None] = {}
        for rec in self.records:
            seen.setdefault(rec.left_id, None)
            seen.setdefault(rec.right_id, None)
        return list(seen)


class EmbeddingStore:
    """ID-keyed matrix of fixed-dimension float32 sentence vectors.

    Immutable after construction; lookups are exact-match on the ID string.
    """

    def __init__(self, ids: Sequence[str], matrix: np.ndarray, dim: int | None = None):
        ids = tuple(str(i) for i in ids)
        matrix = np.ascontiguousarray(matrix, dtype=np.float32)
        if matrix.ndim != 2:
            raise ValueError(f"embedding matrix must be 2-D, got shape {matrix.shape}")
        if dim is None:
            dim = matrix.shape[1]
        if dim <= 0:
            raise ValueError(f"embedding dim must be positive, got {dim}")
        if matrix.shape != (len(ids), dim):
            raise ValueError(
                f"matrix shape {matrix.shape} does not match {len(ids)} ids x dim {dim}"
            )
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate headline IDs in embedding store")
        if matrix.size and not np.isfinite(matrix).all():
            raise ValueError("embedding matrix contains non-finite values")
        matrix.setflags(write=False)
        self._ids = ids
        self._matrix = matrix
        self._dim = int(dim)
        self._index = {hid: row for row, hid in enumerate(ids)}

    @property
    def ids(self) -> tuple[str, ...]:
        return self._ids

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def n_rows(self) -> int:
        return len(self._ids)

    def __contains__(self, headline_id: str) -> bool:
        return headline_id in self._index

    def row_index(self, headline_id: str) -> int:
        try:
            return self._index[headline_id]
        except KeyError:
            raise KeyError(f"no embedding for headline ID {headline_id!r}") from None

    def lookup(self, headline_id: str) -> np.ndarray:
        return self._matrix[self.row_index(headline_id)]


class DrawPolicy(Enum):
    """How draw-labeled pairs enter training."""

    EXCLUDE = "exclude"
    DUPLICATE_BOTH = "duplicate-both-directions"

    @classmethod
    def parse(cls, text: str) -> "DrawPolicy":
        try:
            return cls(text)
        except ValueError:
            raise ValueError(f"unknown draw policy {text!r}") from None


@dataclass(frozen=True)
class TrainingPairSet:
    """Feature rows for the distinct headlines in play plus (positive, negative)
    row-index pairs, where the positive element is the better headline."""

    features: np.ndarray  # (n_docs, dim) float32
    pairs: np.ndarray  # (n_pairs, 2) int64, columns (positive_row, negative_row)

    def __post_init__(self) -> None:
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-D matrix")
        if self.pairs.ndim != 2 or self.pairs.shape[1] != 2:
            raise ValueError("pairs must have shape (n_pairs, 2)")
        n = self.features.shape[0]
        if self.pairs.size:
            if self.pairs.min() < 0 or self.pairs.max() >= n:
                raise ValueError("pair index out of range")
            if (self.pairs[:, 0] == self.pairs[:, 1]).any():
                raise ValueError("pair may not reference the same row twice")

    @property
    def n_docs(self) -> int:
        return self.features.shape[0]

    @property
    def n_pairs(self) -> int:
        return self.pairs.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


def load_pairs(path: str | Path) -> PairDataset:
    """Read a JSON Lines pairs file, preserving record order.

    Raises PairsFormatError naming the 1-based line number for any malformed
    line or unknown label.
    """
    records: list[PairRecord] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                raise PairsFormatError(f"empty line at line {lineno}")
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise PairsFormatError(f"invalid JSON at line {lineno}: {exc.msg}") from None
            if not isinstance(obj, dict):
                raise PairsFormatError(f"expected an object at line {lineno}")
            try:
                left = obj["left_url"]
                right = obj["right_url"]
                raw_label = obj["label"]
            except KeyError as exc:
                raise PairsFormatError(f"missing key {exc.args[0]!r} at line {lineno}") from None
            if not isinstance(left, str) or not isinstance(right, str) or not isinstance(raw_label, str):
                raise PairsFormatError(f"left_url/right_url/label must be strings at line {lineno}")
            try:
                label = Label.parse(raw_label)
            except ValueError:
                raise PairsFormatError(f"unknown label {raw_label!r} at line {lineno}") from None
            try:
                records.append(PairRecord(left, right, label))
            except ValueError as exc:
                raise PairsFormatError(f"{exc} at line {lineno}") from None
    return PairDataset(tuple(records))


def _read_exact(fh: BinaryIO, n: int, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise EmbeddingFormatError(f"truncated file: expected {n} bytes of {what}, got {len(data)}")
    return data


def _decode_id_blob(blob: bytes, n_rows: int) -> list[str]:
    try:
        ids = json.loads(blob.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise EmbeddingFormatError("ID table is not valid UTF-8 JSON") from None
    if not isinstance(ids, list) or not all(isinstance(i, str) for i in ids):
        raise EmbeddingFormatError("ID table must be a JSON array of strings")
    if len(ids) != n_rows:
        raise EmbeddingFormatError(f"ID table has {len(ids)} entries, header says {n_rows} rows")
    if len(set(ids)) != len(ids):
        raise EmbeddingFormatError("duplicate ID in table")
    return ids


def _encode_id_blob(ids: Sequence[str]) -> bytes:
    # Canonical encoding so that write -> read -> write is byte-identical.
    return json.dumps(list(ids), ensure_ascii=False, separators=(",", ":")).encode("utf-8")


def load_embeddings(path: str | Path) -> EmbeddingStore:
    """Read an HSE1 file into an EmbeddingStore, bit-exact float payload."""
    with open(path, "rb") as fh:
        magic, version, n_rows, dim, blob_len = _HEADER.unpack(_read_exact(fh, _HEADER.size, "header"))
        if magic != HSE1_MAGIC:
            raise EmbeddingFormatError(f"bad magic {magic!r}, expected {HSE1_MAGIC!r}")
        if version != HSE1_VERSION:
            raise EmbeddingFormatError(f"unsupported HSE1 version {version}")
        if dim == 0:
            raise EmbeddingFormatError("dim must be positive")
        ids = _decode_id_blob(_read_exact(fh, blob_len, "ID table"), n_rows)
        payload = _read_exact(fh, 4 * n_rows * dim, "float payload")
        if fh.read(1):
            raise EmbeddingFormatError("trailing bytes after float payload")
    matrix = np.frombuffer(payload, dtype="<f4").reshape(n_rows, dim).copy()
    try:
        return EmbeddingStore(ids, matrix, dim=dim)
    except ValueError as exc:
        raise EmbeddingFormatError(str(exc)) from None


def write_embeddings(store: EmbeddingStore, path: str | Path) -> None:
    """Write an HSE1 file; load_embeddings inverts it bit-exactly."""
    if store.matrix.size and not np.isfinite(store.matrix).all():
        raise ValueError("refusing to write non-finite embedding values")
    blob = _encode_id_blob(store.ids)
    header = _HEADER.pack(HSE1_MAGIC, HSE1_VERSION, store.n_rows, store.dim, len(blob))
    payload = np.ascontiguousarray(store.matrix, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(blob)
        fh.write(payload)


def build_training_pairs(
    dataset: PairDataset,
    store: EmbeddingStore,
    draw_policy: DrawPolicy = DrawPolicy.EXCLUDE,
) -> TrainingPairSet:
    """Turn labeled pairs into (positive, negative) row-index pairs.

    The better headline of each pair is the positive element.  ``bad`` pairs
    are always dropped; ``draw`` pairs follow ``draw_policy`` (dropped by
    default, or emitted once in each direction).
    """
    row_of: dict[str, int] = {}
    order: list[str] = []
    missing: list[str] = []

    def resolve(headline_id: str) -> int:
        if headline_id in row_of:
            return row_of[headline_id]
        if headline_id not in store:
            if headline_id not in missing:
                missing.append(headline_id)
            return -1
        row = len(order)
        row_of[headline_id] = row
        order.append(headline_id)
        return row

    pairs: list[tuple[int, int]] = []
    for rec in dataset:
        if rec.label is Label.BAD:
            continue
        if rec.label is Label.DRAW and draw_policy is DrawPolicy.EXCLUDE:
            continue
        li = resolve(rec.left_id)
        ri = resolve(rec.right_id)
        if li < 0 or ri < 0:
            continue
        if rec.label is Label.LEFT:
            pairs.append((li, ri))
        elif rec.label is Label.RIGHT:
            pairs.append((ri, li))
        else:  # DRAW under DUPLICATE_BOTH
            pairs.append((li, ri))
            pairs.append((ri, li))

    if missing:
        listed = ", ".join(repr(i) for i in missing)
        raise ValueError(f"missing embeddings for headline IDs: {listed}")

    if order:
        features = store.matrix[[store.row_index(i) for i in order]]
    else:
        features = np.empty((0, store.dim), dtype=np.float32)
    pair_arr = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    return TrainingPairSet(np.ascontiguousarray(features, dtype=np.float32), pair_arr)


def split_validation(
    dataset: PairDataset, valid_fraction: float, seed: int
) -> tuple[PairDataset, PairDataset]:
    """Deterministic pair-level split into (train, validation).

    Validation size is round(valid_fraction * N), half-up.  The split is a
    partition: every record lands in exactly one side, original order kept.
    Headline-level disjointness is NOT enforced: the same headline may appear
    on both sides, a known leakage risk accepted for pair-level sampling.
    """
    if not 0.0 < valid_fraction < 1.0:
        raise ValueError(f"valid_fraction must be in (0, 1), got {valid_fraction}")
    n = len(dataset)
    if n == 0:
        raise ValueError("cannot split an empty dataset")
    n_valid = int(math.floor(valid_fraction * n + 0.5))
    perm = np.random.default_rng(seed).permutation(n)
    in_valid = np.zeros(n, dtype=bool)
    in_valid[perm[:n_valid]] = True
    train = tuple(rec for i, rec in enumerate(dataset.records) if not in_valid[i])
    valid = tuple(rec for i, rec in enumerate(dataset.records) if in_valid[i])
    return PairDataset(train), PairDataset(valid)
