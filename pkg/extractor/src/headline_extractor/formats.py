"""Writers for the two binary embedding containers the ranker consumes.

Both files share a little-endian header ``magic | u32 version=1 | u32 count |
u32 dim | u32 id_blob_len`` followed by a compact UTF-8 JSON array of string
IDs. HSE1 then carries ``count * dim`` float32 values, one row per ID. HST1
instead carries, per ID, ``u32 n_tokens`` followed by ``n_tokens * dim``
float32 values. This module only produces the files; the ranking package owns
the readers, and round-tripping through them is covered by the test suite.
"""

from __future__ import annotations

import json
import struct
from typing import Sequence

import numpy as np

EMBED_MAGIC = b"HSE1"
TOKEN_MAGIC = b"HST1"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIIII")
_SEQ_LEN = struct.Struct("<I")

__all__ = [
    "EMBED_MAGIC",
    "FORMAT_VERSION",
    "TOKEN_MAGIC",
    "write_embedding_file",
    "write_token_file",
]


def _id_blob(ids: Sequence[str]) -> bytes:
    """Encode IDs as the compact JSON array both readers expect."""
    seen = set()
    for i, headline_id in enumerate(ids):
        if not isinstance(headline_id, str) or not headline_id:
            raise ValueError(f"id at index {i} must be a non-empty string")
        if headline_id in seen:
            raise ValueError(f"duplicate headline ID {headline_id!r}")
        seen.add(headline_id)
    return json.dumps(list(ids), ensure_ascii=False, separators=(",", ":")).encode("utf-8")


def write_embedding_file(path: str, ids: Sequence[str], matrix: np.ndarray) -> None:
    """Write one float32 vector per ID as an HSE1 file."""
    matrix = np.asarray(matrix, dtype=np.float32)
    if matrix.ndim != 2:
        raise ValueError(f"matrix must be 2-D, got shape {matrix.shape}")
    if matrix.shape[0] != len(ids):
        raise ValueError(f"{len(ids)} ids but {matrix.shape[0]} rows")
    if matrix.shape[1] == 0:
        raise ValueError("embedding dim must be positive")
    if not np.all(np.isfinite(matrix)):
        raise ValueError("embedding values must be finite")
    blob = _id_blob(ids)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(EMBED_MAGIC, FORMAT_VERSION, len(ids), matrix.shape[1], len(blob)))
        fh.write(blob)
        fh.write(np.ascontiguousarray(matrix, dtype="<f4").tobytes())


def write_token_file(
    path: str, items: Sequence[tuple[str, np.ndarray]], dim: int | None = None
) -> None:
    """Write per-ID token matrices as an HST1 file.

    Each item is ``(id, tokens)`` with ``tokens`` a non-empty float32 matrix
    of shape ``(n_tokens, dim)``. ``dim`` only needs to be passed when there
    are no items at all.
    """
    sequences: list[tuple[str, np.ndarray]] = []
    for headline_id, tokens in items:
        tokens = np.asarray(tokens, dtype=np.float32)
        if tokens.ndim != 2:
            raise ValueError(f"tokens for {headline_id!r} must be 2-D, got shape {tokens.shape}")
        if tokens.shape[0] == 0:
            raise ValueError(f"sequence for {headline_id!r} has zero tokens")
        if not np.all(np.isfinite(tokens)):
            raise ValueError(f"tokens for {headline_id!r} contain non-finite values")
        if dim is None:
            dim = tokens.shape[1]
        elif tokens.shape[1] != dim:
            raise ValueError(
                f"sequence for {headline_id!r} has dim {tokens.shape[1]}, expected {dim}"
            )
        sequences.append((headline_id, tokens))
    if dim is None or dim <= 0:
        raise ValueError("embedding dim must be positive (pass dim= for an empty file)")
    blob = _id_blob([headline_id for headline_id, _ in sequences])
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(TOKEN_MAGIC, FORMAT_VERSION, len(sequences), dim, len(blob)))
        fh.write(blob)
        for _, tokens in sequences:
            fh.write(_SEQ_LEN.pack(tokens.shape[0]))
            fh.write(np.ascontiguousarray(tokens, dtype="<f4").tobytes())
