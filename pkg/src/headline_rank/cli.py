"""Batch command-line frontend.

Subcommands: pool, train, predict, evaluate, ablate.  Exit codes are 0 on
success, 1 on runtime or data errors, 2 on usage errors.  Every subcommand
is deterministic given its flags and --seed, and never mutates input files.
The HEADLINE_RANK_THREADS environment variable caps internal parallelism
(0 or unset = auto).
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Callable, Sequence

from .data import (
    DrawPolicy,
    EmbeddingStore,
    PairDataset,
    build_training_pairs,
    load_embeddings,
    load_pairs,
    split_validation,
)
from .ensemble import (
    BlendSpec,
    Normalization,
    predict_dataset,
    read_predictions,
    write_predictions,
)
from .evaluation import error_report, evaluate, format_report
from .pooling import PoolingMethod, pool_file, read_token_file, pool_sequences
from .ranker import HyperParams, load_model, save_model, train


class _UsageError(Exception):
    """Bad flag combination detected after parsing; maps to exit code 2."""


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value <= 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {value}")
    return value


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {value}")
    return value


def _nonneg_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {value}")
    return value


def _nonneg_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {value}")
    return value


def _fraction(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"must be in (0, 1), got {value}")
    return value


def _comma_list(text: str) -> list[str]:
    return [part for part in text.split(",") if part]


def _add_hyperparam_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--trees", type=_positive_int, default=1000, help="boosting iterations")
    parser.add_argument("--depth", type=_positive_int, default=6, help="maximum tree depth")
    parser.add_argument("--lr", type=_positive_float, default=0.1, help="learning rate")
    parser.add_argument("--bins", type=_positive_int, default=256, help="histogram bins (2..256)")
    parser.add_argument("--min-leaf", type=_positive_int, default=20, help="min rows per leaf")
    parser.add_argument(
        "--early-stop", type=_nonneg_int, default=50, help="patience in rounds, 0 disables"
    )
    parser.add_argument("--l2", type=_nonneg_float, default=3.0, help="leaf L2 regularization")
    parser.add_argument(
        "--draw-policy",
        choices=[p.value for p in DrawPolicy],
        default=DrawPolicy.EXCLUDE.value,
        help="how draw-labeled pairs enter training",
    )


def _hyperparams(args: argparse.Namespace) -> HyperParams:
    return HyperParams(
        n_trees=args.trees,
        max_depth=args.depth,
        learning_rate=args.lr,
        n_bins=args.bins,
        min_samples_leaf=args.min_leaf,
        early_stop_rounds=args.early_stop,
        l2_leaf_reg=args.l2,
        seed=args.seed,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="headline-rank",
        description="Rank competing news headlines with a pairwise-trained tree ensemble.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p_pool = sub.add_parser("pool", help="collapse token embeddings to one row per headline")
    p_pool.add_argument("token_file", help="HST1 token-embedding file")
    p_pool.add_argument("--method", choices=["mean", "cls"], default="mean")
    p_pool.add_argument("--out", required=True, help="HSE1 output path")
    p_pool.set_defaults(handler=cmd_pool)

    p_train = sub.add_parser("train", help="fit a ranking model on labeled pairs")
    p_train.add_argument("--pairs", required=True, help="labeled pairs JSONL")
    p_train.add_argument("--embeddings", required=True, help="HSE1 headline embeddings")
    p_train.add_argument("--valid-frac", type=_fraction, default=0.1)
    p_train.add_argument("--seed", type=int, default=42)
    p_train.add_argument("--out", required=True, help="model JSON output path")
    p_train.add_argument("--log-every", type=_nonneg_int, default=50, help="0 silences progress")
    _add_hyperparam_flags(p_train)
    p_train.set_defaults(handler=cmd_train)

    p_predict = sub.add_parser("predict", help="label pairs with one or more trained models")
    p_predict.add_argument("--pairs", required=True, help="pairs JSONL to label")
    p_predict.add_argument("--model", required=True, help="comma-separated model paths")
    p_predict.add_argument(
        "--embeddings", required=True, help="comma-separated HSE1 paths, one per model"
    )
    p_predict.add_argument(
        "--normalize", choices=[n.value for n in Normalization], default="zscore"
    )
    p_predict.add_argument("--draw-threshold", type=_nonneg_float, default=0.1)
    p_predict.add_argument("--out", required=True, help="predictions JSONL output path")
    p_predict.set_defaults(handler=cmd_predict)

    p_eval = sub.add_parser("evaluate", help="score predictions against gold labels")
    p_eval.add_argument("--pairs", required=True, help="gold pairs JSONL")
    p_eval.add_argument("--pred", required=True, help="predictions JSONL")
    p_eval.add_argument(
        "--errors", type=_nonneg_int, default=0, help="print up to N widest-margin mistakes"
    )
    p_eval.add_argument("--json-out", help="also write the report as JSON")
    p_eval.set_defaults(handler=cmd_evaluate)

    p_ablate = sub.add_parser(
        "ablate", help="compare token-embedding variants on a held-out split"
    )
    p_ablate.add_argument("--pairs", required=True, help="labeled pairs JSONL")
    p_ablate.add_argument(
        "--token-files",
        required=True,
        help="comma-separated LABEL=PATH entries, one per representation",
    )
    p_ablate.add_argument("--methods", default="mean,cls", help="comma-separated pooling methods")
    p_ablate.add_argument("--seed", type=int, default=42)
    p_ablate.add_argument("--repeats", type=_positive_int, default=1)
    p_ablate.add_argument("--valid-frac", type=_fraction, default=0.1)
    p_ablate.add_argument("--draw-threshold", type=_nonneg_float, default=0.1)
    p_ablate.add_argument("--json-out", help="also write the accuracy grid as JSON")
    _add_hyperparam_flags(p_ablate)
    p_ablate.set_defaults(handler=cmd_ablate)

    return parser


def cmd_pool(args: argparse.Namespace) -> int:
    summary = pool_file(args.token_file, PoolingMethod.parse(args.method), args.out)
    print(f"pooled {summary.n_rows} headlines (dim {summary.dim}) -> {args.out}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    dataset = load_pairs(args.pairs)
    store = load_embeddings(args.embeddings)
    train_ds, valid_ds = split_validation(dataset, args.valid_frac, args.seed)
    policy = DrawPolicy.parse(args.draw_policy)
    train_set = build_training_pairs(train_ds, store, policy)
    valid_set = build_training_pairs(valid_ds, store, policy)
    print(
        f"training on {train_set.n_pairs} pairs ({train_set.n_docs} headlines), "
        f"validating on {valid_set.n_pairs} pairs"
    )

    def progress(iteration: int, train_loss: float, valid_loss: float | None) -> None:
        if args.log_every and (iteration + 1) % args.log_every == 0:
            valid_part = f"  valid_loss {valid_loss:.6f}" if valid_loss is not None else ""
            print(f"iter {iteration + 1:5d}  train_loss {train_loss:.6f}{valid_part}")

    model = train(train_set, valid_set, _hyperparams(args), on_iteration=progress)
    save_model(model, args.out)
    print(f"best_iteration {model.best_iteration}  trees kept {model.n_trees}  -> {args.out}")
    return 0


def cmd_predict(args: argparse.Namespace) -> int:
    model_paths = _comma_list(args.model)
    store_paths = _comma_list(args.embeddings)
    if len(model_paths) != len(store_paths):
        raise _UsageError(
            f"--model lists {len(model_paths)} paths but --embeddings lists {len(store_paths)}"
        )
    if not model_paths:
        raise _UsageError("--model must list at least one path")
    dataset = load_pairs(args.pairs)
    members = tuple(
        (load_model(m), load_embeddings(e)) for m, e in zip(model_paths, store_paths)
    )
    spec = BlendSpec(
        members,
        normalization=Normalization.parse(args.normalize),
        draw_threshold=args.draw_threshold,
    )
    predictions = predict_dataset(spec, dataset)
    write_predictions(predictions, args.out)
    print(f"wrote {len(predictions)} predictions -> {args.out}")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    gold = load_pairs(args.pairs)
    predictions = read_predictions(args.pred)
    if len(predictions) != len(gold):
        raise ValueError(
            f"gold has {len(gold)} pairs but predictions file has {len(predictions)}"
        )
    for i, (rec, pred) in enumerate(zip(gold, predictions), start=1):
        if rec.left_id != pred.left_id or rec.right_id != pred.right_id:
            raise ValueError(f"row {i}: predictions do not line up with the gold pairs")
    report = evaluate([rec.label for rec in gold], [p.label for p in predictions])
    print(format_report(report))
    if args.errors:
        cases = error_report([rec.label for rec in gold], predictions, limit=args.errors)
        print(f"widest-margin mistakes ({len(cases)} shown):")
        for c in cases:
            print(
                f"  margin {c.margin:.4f}  gold={c.gold.value:<5} pred={c.predicted.value:<5} "
                f"{c.left_id} vs {c.right_id}"
            )
    if args.json_out:
        with open(args.json_out, "w", encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, indent=2)
            fh.write("\n")
    return 0


def _parse_token_file_specs(text: str) -> list[tuple[str, str]]:
    specs = []
    for entry in _comma_list(text):
        label, sep, path = entry.partition("=")
        if not sep or not label or not path:
            raise _UsageError(f"token file entry {entry!r} is not LABEL=PATH")
        specs.append((label, path))
    if not specs:
        raise _UsageError("--token-files must list at least one LABEL=PATH entry")
    if len({label for label, _ in specs}) != len(specs):
        raise _UsageError("token file labels must be unique")
    return specs


def cmd_ablate(args: argparse.Namespace) -> int:
    specs = _parse_token_file_specs(args.token_files)
    methods = []
    for name in _comma_list(args.methods):
        try:
            methods.append(PoolingMethod.parse(name))
        except ValueError as exc:
            raise _UsageError(str(exc)) from None
    if not methods:
        raise _UsageError("--methods must list at least one pooling method")

    dataset = load_pairs(args.pairs)
    policy = DrawPolicy.parse(args.draw_policy)

    # Pool each representation once; training repeats only reshuffle splits.
    pooled: list[tuple[str, EmbeddingStore]] = []
    for label, path in specs:
        token_file = read_token_file(path)
        for method in methods:
            store = pool_sequences(token_file.sequences, method, dim=token_file.dim)
            pooled.append((f"{label}/{method.value}", store))

    grid: dict[str, list[float]] = {name: [] for name, _ in pooled}
    for repeat in range(args.repeats):
        seed = args.seed + repeat
        work, hold = split_validation(dataset, args.valid_frac, seed)
        fit_ds, stop_ds = split_validation(work, args.valid_frac, seed + 1)
        for name, store in pooled:
            model = train(
                build_training_pairs(fit_ds, store, policy),
                build_training_pairs(stop_ds, store, policy),
                _hyperparams(args),
            )
            spec = BlendSpec(((model, store),), draw_threshold=args.draw_threshold)
            predictions = predict_dataset(spec, hold)
            report = evaluate(
                [rec.label for rec in hold], [p.label for p in predictions]
            )
            grid[name].append(report.weighted_accuracy)

    width = max(len("representation"), max(len(name) for name in grid))
    header = [f"run{r + 1}" for r in range(args.repeats)] + ["mean"]
    print(f"{'representation':<{width}}  " + "  ".join(f"{cell:>8}" for cell in header))
    rows = []
    for name, accuracies in grid.items():
        mean = sum(accuracies) / len(accuracies)
        cells = [f"{a:8.4f}" for a in accuracies] + [f"{mean:8.4f}"]
        print(f"{name:<{width}}  " + "  ".join(cells))
        rows.append({"representation": name, "runs": accuracies, "mean": mean})
    if args.json_out:
        with open(args.json_out, "w", encoding="utf-8") as fh:
            json.dump({"rows": rows}, fh, indent=2)
            fh.write("\n")
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse handles usage errors and --help
        return int(exc.code or 0)
    handler: Callable[[argparse.Namespace], int] = args.handler
    try:
        return handler(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
