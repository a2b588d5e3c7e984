"""Transformer hidden-state extractor emitting HST1/HSE1 embedding files."""

from .extract import (
    ExtractSummary,
    ExtractorConfig,
    ExtractorError,
    LayerInfo,
    PoolingMode,
    extract,
    is_sentence_native,
    list_layers,
    read_headlines,
)
from .formats import write_embedding_file, write_token_file

__all__ = [
    "ExtractSummary",
    "ExtractorConfig",
    "ExtractorError",
    "LayerInfo",
    "PoolingMode",
    "extract",
    "is_sentence_native",
    "list_layers",
    "read_headlines",
    "write_embedding_file",
    "write_token_file",
]

__version__ = "0.1.0"
