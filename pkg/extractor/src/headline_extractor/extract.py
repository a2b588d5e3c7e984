"""Turn a TSV of headlines into token or sentence embedding files.

A transformer checkpoint (any local or hub name transformers can load) is run
over each headline with hidden-state output enabled. One hidden-state layer is
selected by index, where index 0 is the embedding-layer output and index
``n_layers`` is the final encoder layer. Padding positions are always
discarded; special tokens such as [CLS]/[SEP] can optionally be dropped too.
The surviving token vectors are written as-is (HST1) or reduced to one vector
per headline by mean or first-token pooling (HSE1).

Checkpoints saved by sentence-transformers (detected via their modules.json)
are instead encoded with their own bundled pooling stack, which already yields
one vector per headline; the layer and pooling options do not apply to them.
"""

from __future__ import annotations

import enum
import os
from dataclasses import dataclass, field

import numpy as np

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
]


class ExtractorError(ValueError):
    """Raised for unusable checkpoints, inputs, or option combinations."""


class PoolingMode(enum.Enum):
    """How token vectors are reduced before writing."""

    NONE = "none"
    MEAN = "mean"
    CLS = "cls"

    @classmethod
    def parse(cls, text: str) -> "PoolingMode":
        try:
            return cls(text)
        except ValueError:
            valid = ", ".join(mode.value for mode in cls)
            raise ExtractorError(f"unknown pooling mode {text!r}, expected one of: {valid}")


@dataclass(frozen=True)
class ExtractorConfig:
    """Options for one extraction run."""

    model_name: str
    layer: int = 0
    pooling: PoolingMode = PoolingMode.NONE
    batch_size: int = 16
    max_tokens: int = 64
    drop_special: bool = False

    def __post_init__(self) -> None:
        if not self.model_name:
            raise ExtractorError("model_name must be non-empty")
        if self.layer < 0:
            raise ExtractorError(f"layer must be >= 0, got {self.layer}")
        if self.batch_size < 1:
            raise ExtractorError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.max_tokens < 1:
            raise ExtractorError(f"max_tokens must be >= 1, got {self.max_tokens}")


@dataclass(frozen=True)
class LayerInfo:
    """Hidden-state geometry of a checkpoint."""

    n_outputs: int
    hidden_dim: int


@dataclass(frozen=True)
class ExtractSummary:
    """What an extraction run produced.

    ``kind`` is ``"tokens"`` for an HST1 file and ``"sentences"`` for HSE1.
    """

    count: int
    dim: int
    kind: str
    ids: tuple[str, ...] = field(repr=False)


def read_headlines(path: str) -> list[tuple[str, str]]:
    """Read ``id<TAB>text`` rows from a UTF-8 TSV file.

    IDs must be non-empty and unique; text may be anything after the first
    tab, including empty. Blank lines are rejected so silent truncation of a
    corrupted file cannot pass unnoticed.
    """
    rows: list[tuple[str, str]] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line:
                raise ExtractorError(f"{path}:{lineno}: blank line")
            headline_id, tab, text = line.partition("\t")
            if not tab:
                raise ExtractorError(f"{path}:{lineno}: expected id<TAB>text")
            if not headline_id:
                raise ExtractorError(f"{path}:{lineno}: empty headline ID")
            if headline_id in seen:
                raise ExtractorError(f"{path}:{lineno}: duplicate headline ID {headline_id!r}")
            seen.add(headline_id)
            rows.append((headline_id, text))
    return rows


def is_sentence_native(model_name: str) -> bool:
    """Whether the checkpoint is a sentence-transformers save directory."""
    return os.path.isdir(model_name) and os.path.isfile(os.path.join(model_name, "modules.json"))


def _load_autoconfig(model_name: str):
    from transformers import AutoConfig

    try:
        return AutoConfig.from_pretrained(model_name)
    except (OSError, ValueError, KeyError) as exc:
        raise ExtractorError(f"cannot load checkpoint {model_name!r}: {exc}") from exc


def _layer_info(config) -> LayerInfo:
    n_layers = getattr(config, "num_hidden_layers", None)
    if n_layers is None:
        n_layers = getattr(config, "num_layers", None)
    hidden = getattr(config, "hidden_size", None)
    if hidden is None:
        hidden = getattr(config, "d_model", None)
    if n_layers is None or hidden is None:
        raise ExtractorError(
            f"checkpoint config {type(config).__name__} does not expose layer count or hidden size"
        )
    return LayerInfo(n_outputs=int(n_layers) + 1, hidden_dim=int(hidden))


def list_layers(model_name: str) -> LayerInfo:
    """Report how many hidden-state outputs a checkpoint exposes.

    The count includes the embedding-layer output at index 0, so a model with
    N transformer layers reports N + 1 outputs.
    """
    return _layer_info(_load_autoconfig(model_name))


def _encode_sentence_native(config: ExtractorConfig, rows: list[tuple[str, str]]) -> np.ndarray:
    try:
        from sentence_transformers import SentenceTransformer
    except ImportError as exc:
        raise ExtractorError(
            "checkpoint is a sentence-transformers save but the sentence-transformers "
            "package is not installed"
        ) from exc

    model = SentenceTransformer(config.model_name)
    if not rows:
        dim = model.get_sentence_embedding_dimension()
        return np.zeros((0, int(dim)), dtype=np.float32)
    vectors = model.encode(
        [text for _, text in rows],
        batch_size=config.batch_size,
        convert_to_numpy=True,
        show_progress_bar=False,
    )
    return np.asarray(vectors, dtype=np.float32)


def _extract_hidden_states(
    config: ExtractorConfig, rows: list[tuple[str, str]]
) -> tuple[list[tuple[str, np.ndarray]], int]:
    """Run the checkpoint and return kept token vectors per headline.

    Returns ``(items, hidden_dim)`` where each item is ``(id, tokens)`` with
    padding positions (and special tokens when requested) already removed.
    """
    import torch
    from transformers import AutoModel, AutoTokenizer

    info = _layer_info(_load_autoconfig(config.model_name))
    if config.layer >= info.n_outputs:
        raise ExtractorError(
            f"layer {config.layer} out of range: checkpoint has {info.n_outputs} "
            f"hidden-state outputs (valid indices 0..{info.n_outputs - 1})"
        )

    try:
        tokenizer = AutoTokenizer.from_pretrained(config.model_name)
        model = AutoModel.from_pretrained(config.model_name)
    except (OSError, ValueError, KeyError) as exc:
        raise ExtractorError(f"cannot load checkpoint {config.model_name!r}: {exc}") from exc
    model.eval()

    # Encoder-decoder checkpoints embed text with the encoder stack alone; the
    # decoder is never run.
    module = model.get_encoder() if getattr(model.config, "is_encoder_decoder", False) else model

    items: list[tuple[str, np.ndarray]] = []
    with torch.no_grad():
        for start in range(0, len(rows), config.batch_size):
            batch = rows[start : start + config.batch_size]
            encoded = tokenizer(
                [text for _, text in batch],
                padding=True,
                truncation=True,
                max_length=config.max_tokens,
                return_special_tokens_mask=True,
                return_tensors="pt",
            )
            special_mask = encoded.pop("special_tokens_mask")
            outputs = module(**encoded, output_hidden_states=True)
            hidden = outputs.hidden_states
            if config.layer >= len(hidden):
                raise ExtractorError(
                    f"layer {config.layer} out of range: checkpoint produced {len(hidden)} "
                    f"hidden-state outputs (valid indices 0..{len(hidden) - 1})"
                )
            states = hidden[config.layer]
            keep = encoded["attention_mask"].bool()
            if config.drop_special:
                keep &= special_mask == 0
            for row_index, (headline_id, _) in enumerate(batch):
                tokens = states[row_index][keep[row_index]]
                if tokens.shape[0] == 0:
                    raise ExtractorError(
                        f"headline {headline_id!r} has no tokens left after masking; "
                        "try without --drop-special"
                    )
                items.append((headline_id, tokens.to(torch.float32).cpu().numpy()))
    return items, info.hidden_dim


def _pool(items: list[tuple[str, np.ndarray]], mode: PoolingMode) -> np.ndarray:
    if mode is PoolingMode.MEAN:
        rows = [tokens.astype(np.float64).mean(axis=0) for _, tokens in items]
    else:
        rows = [tokens[0] for _, tokens in items]
    dim = items[0][1].shape[1] if items else 0
    return np.asarray(rows, dtype=np.float32).reshape(len(items), dim)


def extract(config: ExtractorConfig, input_path: str, out_path: str) -> ExtractSummary:
    """Embed every headline in ``input_path`` and write ``out_path``.

    Sentence-transformers checkpoints always produce an HSE1 sentence file.
    For plain transformers checkpoints, pooling ``none`` writes an HST1 token
    file and ``mean``/``cls`` write an HSE1 file. Row order follows the input.
    """
    rows = read_headlines(input_path)
    ids = tuple(headline_id for headline_id, _ in rows)

    if is_sentence_native(config.model_name):
        matrix = _encode_sentence_native(config, rows)
        if matrix.ndim != 2 or matrix.shape[0] != len(rows):
            raise ExtractorError(
                f"sentence encoder returned shape {matrix.shape} for {len(rows)} headlines"
            )
        write_embedding_file(out_path, ids, matrix)
        return ExtractSummary(count=len(rows), dim=int(matrix.shape[1]), kind="sentences", ids=ids)

    items, hidden_dim = _extract_hidden_states(config, rows)
    if config.pooling is PoolingMode.NONE:
        write_token_file(out_path, items, dim=hidden_dim)
        return ExtractSummary(count=len(rows), dim=hidden_dim, kind="tokens", ids=ids)
    pooled = _pool(items, config.pooling).reshape(len(ids), hidden_dim)
    write_embedding_file(out_path, ids, pooled)
    return ExtractSummary(count=len(rows), dim=hidden_dim, kind="sentences", ids=ids)
