"""Command line front end for the embedding extractor.

Usage error (bad flags or flag combinations) exits 2, runtime failure (bad
checkpoint, bad input file, I/O) exits 1, success exits 0.
"""

from __future__ import annotations

import argparse
import sys

from .extract import ExtractorConfig, ExtractorError, PoolingMode, extract, list_layers

__all__ = ["build_parser", "main", "run"]


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def _nonneg_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="headline-extract",
        description="Embed headlines with a transformer checkpoint into HST1/HSE1 files.",
    )
    parser.add_argument("--model", required=True, help="checkpoint name or local directory")
    parser.add_argument(
        "--list-layers",
        action="store_true",
        help="print the checkpoint's hidden-state output count and dimension, then exit",
    )
    parser.add_argument(
        "--layer",
        type=_nonneg_int,
        default=0,
        help="hidden-state output index; 0 is the embedding-layer output (default 0)",
    )
    parser.add_argument(
        "--pooling",
        choices=[mode.value for mode in PoolingMode],
        default=PoolingMode.NONE.value,
        help="none writes per-token HST1, mean/cls write per-headline HSE1 (default none)",
    )
    parser.add_argument(
        "--drop-special",
        action="store_true",
        help="drop special tokens such as [CLS]/[SEP] before pooling",
    )
    parser.add_argument("--batch-size", type=_positive_int, default=16)
    parser.add_argument(
        "--max-tokens", type=_positive_int, default=64, help="truncate headlines to this many tokens"
    )
    parser.add_argument("--input", help="TSV file with id<TAB>text per line")
    parser.add_argument("--out", help="output path (.hst for pooling none, .hse otherwise)")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        if args.list_layers:
            info = list_layers(args.model)
            print(
                f"{info.n_outputs} hidden-state outputs (indices 0..{info.n_outputs - 1}), "
                f"dim {info.hidden_dim}"
            )
            return 0
        if not args.input or not args.out:
            parser.error("--input and --out are required unless --list-layers is given")
        config = ExtractorConfig(
            model_name=args.model,
            layer=args.layer,
            pooling=PoolingMode.parse(args.pooling),
            batch_size=args.batch_size,
            max_tokens=args.max_tokens,
            drop_special=args.drop_special,
        )
        summary = extract(config, args.input, args.out)
        print(f"wrote {summary.count} headlines ({summary.kind}, dim {summary.dim}) -> {args.out}")
        return 0
    except SystemExit as exc:
        return int(exc.code or 0)
    except (ExtractorError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def run() -> None:
    sys.exit(main())
