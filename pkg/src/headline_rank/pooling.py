"""Pool per-token embedding sequences into fixed-size sentence vectors.

HST1 token-embedding file (little-endian): magic ``HST1`` | u32 version=1 |
u32 n_sequences | u32 dim | u32 id_blob_len | id_blob (UTF-8 JSON array of
strings) | per sequence: u32 n_tokens | n_tokens*dim float32 row-major.

Sequences are stored at true length (no padding rows), so mean pooling is
a plain average over the stored token count.  Whether special tokens are
part of a sequence is decided by whatever wrote the file.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from ._parallel import map_ordered
from .data import EmbeddingStore, write_embeddings

HST1_MAGIC = b"HST1"
HST1_VERSION = 1
_HEADER = struct.Struct("<4sIIII")
_SEQ_LEN = struct.Struct("<I")


class TokenFileFormatError(ValueError):
    """An HST1 file that violates the format contract."""


class PoolingMethod(Enum):
    MEAN_OVER_TOKENS = "mean"
    FIRST_TOKEN = "cls"

    @classmethod
    def parse(cls, text: str) -> "PoolingMethod":
        try:
            return cls(text)
        except ValueError:
            raise ValueError(f"unknown pooling method {text!r}") from None


@dataclass(frozen=True)
class TokenEmbeddingSequence:
    """Per-token hidden states of one headline: an (n_tokens, dim) matrix."""

    id: str
    tokens: np.ndarray

    def __post_init__(self) -> None:
        tokens = np.ascontiguousarray(self.tokens, dtype=np.float32)
        if tokens.ndim != 2:
            raise ValueError(f"token matrix must be 2-D, got shape {tokens.shape}")
        if tokens.shape[0] < 1:
            raise ValueError("token sequence must contain at least one token")
        if tokens.shape[1] < 1:
            raise ValueError("token dim must be positive")
        if not np.isfinite(tokens).all():
            raise ValueError(f"non-finite token values in sequence {self.id!r}")
        tokens.setflags(write=False)
        object.__setattr__(self, "tokens", tokens)

    @property
    def n_tokens(self) -> int:
        return self.tokens.shape[0]

    @property
    def dim(self) -> int:
        return self.tokens.shape[1]


@dataclass(frozen=True)
class TokenFile:
    """Parsed HST1 contents; dim is carried even when there are no sequences."""

    dim: int
    sequences: tuple[TokenEmbeddingSequence, ...]


class PoolSummary(NamedTuple):
    n_rows: int
    dim: int


def mean_pool(seq: TokenEmbeddingSequence) -> np.ndarray:
    """Average the token rows into one vector, dividing by true token count.

    Accumulates in float64 before the divide; the result is stored as float32.
    """
    return seq.tokens.astype(np.float64).mean(axis=0).astype(np.float32)


def first_token_pool(seq: TokenEmbeddingSequence) -> np.ndarray:
    """Return the first token's hidden state unchanged (CLS-style pooling)."""
    return seq.tokens[0].copy()


_POOLERS = {
    PoolingMethod.MEAN_OVER_TOKENS: mean_pool,
    PoolingMethod.FIRST_TOKEN: first_token_pool,
}


def pool_sequences(
    sequences: Sequence[TokenEmbeddingSequence],
    method: PoolingMethod,
    dim: int | None = None,
) -> EmbeddingStore:
    """Pool every sequence into one row, ID order preserved."""
    if dim is None:
        if not sequences:
            raise ValueError("dim is required when pooling zero sequences")
        dim = sequences[0].dim
    for seq in sequences:
        if seq.dim != dim:
            raise ValueError(f"dim mismatch: sequence {seq.id!r} has dim {seq.dim}, expected {dim}")
    pooler = _POOLERS[method]
    rows = map_ordered(pooler, sequences)
    matrix = np.stack(rows) if rows else np.empty((0, dim), dtype=np.float32)
    return EmbeddingStore([s.id for s in sequences], matrix, dim=dim)


def read_token_file(path: str | Path) -> TokenFile:
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) != _HEADER.size:
            raise TokenFileFormatError("truncated file: incomplete header")
        magic, version, n_sequences, dim, blob_len = _HEADER.unpack(header)
        if magic != HST1_MAGIC:
            raise TokenFileFormatError(f"bad magic {magic!r}, expected {HST1_MAGIC!r}")
        if version != HST1_VERSION:
            raise TokenFileFormatError(f"unsupported HST1 version {version}")
        if dim == 0:
            raise TokenFileFormatError("dim must be positive")
        blob = fh.read(blob_len)
        if len(blob) != blob_len:
            raise TokenFileFormatError("truncated file: incomplete ID table")
        try:
            ids = json.loads(blob.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError):
            raise TokenFileFormatError("ID table is not valid UTF-8 JSON") from None
        if not isinstance(ids, list) or not all(isinstance(i, str) for i in ids):
            raise TokenFileFormatError("ID table must be a JSON array of strings")
        if len(ids) != n_sequences:
            raise TokenFileFormatError(
                f"ID table has {len(ids)} entries, header says {n_sequences} sequences"
            )
        if len(set(ids)) != len(ids):
            raise TokenFileFormatError("duplicate ID in table")
        sequences = []
        for seq_id in ids:
            raw_len = fh.read(_SEQ_LEN.size)
            if len(raw_len) != _SEQ_LEN.size:
                raise TokenFileFormatError(f"truncated file: missing token count for {seq_id!r}")
            (n_tokens,) = _SEQ_LEN.unpack(raw_len)
            if n_tokens == 0:
                raise TokenFileFormatError(f"sequence {seq_id!r} has zero tokens")
            payload = fh.read(4 * n_tokens * dim)
            if len(payload) != 4 * n_tokens * dim:
                raise TokenFileFormatError(f"truncated file: incomplete payload for {seq_id!r}")
            tokens = np.frombuffer(payload, dtype="<f4").reshape(n_tokens, dim).copy()
            try:
                sequences.append(TokenEmbeddingSequence(seq_id, tokens))
            except ValueError as exc:
                raise TokenFileFormatError(str(exc)) from None
        if fh.read(1):
            raise TokenFileFormatError("trailing bytes after last sequence")
    return TokenFile(dim=dim, sequences=tuple(sequences))


def write_token_file(token_file: TokenFile, path: str | Path) -> None:
    """Write an HST1 file; read_token_file inverts it bit-exactly."""
    for seq in token_file.sequences:
        if seq.dim != token_file.dim:
            raise ValueError(f"dim mismatch: sequence {seq.id!r} has dim {seq.dim}")
    ids = [s.id for s in token_file.sequences]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate sequence IDs")
    blob = json.dumps(ids, ensure_ascii=False, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(HST1_MAGIC, HST1_VERSION, len(ids), token_file.dim, len(blob)))
        fh.write(blob)
        for seq in token_file.sequences:
            fh.write(_SEQ_LEN.pack(seq.n_tokens))
            fh.write(np.ascontiguousarray(seq.tokens, dtype="<f4").tobytes())


def pool_file(token_path: str | Path, method: PoolingMethod, out_path: str | Path) -> PoolSummary:
    """Pool an HST1 file into an HSE1 file, one row per sequence."""
    token_file = read_token_file(token_path)
    store = pool_sequences(token_file.sequences, method, dim=token_file.dim)
    write_embeddings(store, out_path)
    return PoolSummary(n_rows=store.n_rows, dim=store.dim)
