"""Acceptance suite: one test per contract-level criterion.

Each test prints a single [PASS]/[FAIL] line with the measured numbers
(run with ``pytest tests/test_acceptance.py -s`` to see them), then
asserts.  Criteria with a runtime budget measure wall-clock time and
enforce it.
"""

from __future__ import annotations

import json
import math
import time

import numpy as np
import pytest

from headline_rank import (
    BlendSpec,
    EmbeddingStore,
    HyperParams,
    Label,
    MetricUndefinedError,
    PairDataset,
    PairRecord,
    PairScores,
    TokenEmbeddingSequence,
    TokenFile,
    TrainingPairSet,
    decide_label,
    load_embeddings,
    load_model,
    pair_logit_gradients,
    pair_logit_loss,
    predict_dataset,
    read_token_file,
    save_model,
    train,
    weighted_accuracy,
    write_embeddings,
    write_token_file,
)
from headline_rank.cli import main as cli_main

L, R, D, B = Label.LEFT, Label.RIGHT, Label.DRAW, Label.BAD


def _verdict(name: str, ok: bool, detail: str) -> None:
    print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


def _sample_pairs(rng: np.random.Generator, n_docs: int, k: int) -> list[tuple[int, int]]:
    out: list[tuple[int, int]] = []
    while len(out) < k:
        i, j = rng.integers(0, n_docs, 2)
        if i != j:
            out.append((int(i), int(j)))
    return out


def test_metric_oracle_single_row_combinations():
    """All 12 (gold x predicted) single-row metric values, under 1 second."""
    t0 = time.perf_counter()
    expected = {
        (L, L): 1.0, (L, R): 0.0, (L, D): 0.5,
        (R, L): 0.0, (R, R): 1.0, (R, D): 0.5,
        (D, L): 0.5, (D, R): 0.5, (D, D): 1.0,
    }
    checked = 0
    for (g, p), want in expected.items():
        assert weighted_accuracy([g], [p]) == want, (g, p)
        checked += 1
    # gold = bad rows are omitted: a lone bad row leaves the metric undefined,
    # and a bad row next to a scored row contributes nothing
    for p in (L, R, D):
        with pytest.raises(MetricUndefinedError):
            weighted_accuracy([B], [p])
        assert weighted_accuracy([B, L], [p, L]) == 1.0
        assert weighted_accuracy([B, L], [p, R]) == 0.0
        checked += 1
    elapsed = time.perf_counter() - t0
    _verdict(
        "metric oracle",
        checked == 12 and elapsed < 1.0,
        f"{checked}/12 combinations exact, {elapsed:.3f}s (< 1s)",
    )


def test_loss_reference_values_and_stability():
    """Fixed-point loss values at named differences, finite at +-1000."""
    at_zero = pair_logit_loss([0.0, 0.0], [(0, 1)])
    at_ln3 = pair_logit_loss([math.log(3.0), 0.0], [(0, 1)])
    err_zero = abs(at_zero - math.log(2.0))
    err_ln3 = abs(at_ln3 - math.log(4.0 / 3.0))
    big_up = pair_logit_loss([1000.0, 0.0], [(0, 1)])
    big_down = pair_logit_loss([-1000.0, 0.0], [(0, 1)])
    ok = (
        err_zero <= 1e-9
        and err_ln3 <= 1e-9
        and math.isfinite(big_up)
        and math.isfinite(big_down)
    )
    _verdict(
        "loss values",
        ok,
        f"|L(0)-ln2|={err_zero:.2e}, |L(ln3)-ln(4/3)|={err_ln3:.2e}, "
        f"L(+1000)={big_up:.3g}, L(-1000)={big_down:.3g} (both finite)",
    )


def test_gradients_match_finite_differences():
    """100 random cases of 20 docs / 30 pairs vs central differences."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    h = 1e-4
    worst_grad, worst_hess = 0.0, 0.0
    for _ in range(100):
        scores = rng.normal(size=20)
        pairs = np.array(_sample_pairs(rng, 20, 30), dtype=np.int64)
        analytic = pair_logit_gradients(scores, pairs)
        num_grad = np.empty(20)
        num_hess = np.empty(20)
        base = pair_logit_loss(scores, pairs)
        for i in range(20):
            up, down = scores.copy(), scores.copy()
            up[i] += h
            down[i] -= h
            lu = pair_logit_loss(up, pairs)
            ld = pair_logit_loss(down, pairs)
            num_grad[i] = (lu - ld) / (2 * h)
            num_hess[i] = (lu - 2 * base + ld) / (h * h)
        worst_grad = max(
            worst_grad,
            np.linalg.norm(analytic.grad - num_grad) / max(np.linalg.norm(num_grad), 1e-8),
        )
        worst_hess = max(
            worst_hess,
            np.linalg.norm(analytic.hess - num_hess) / max(np.linalg.norm(num_hess), 1e-8),
        )
    elapsed = time.perf_counter() - t0
    ok = worst_grad < 1e-6 and worst_hess < 1e-4 and elapsed < 10.0
    _verdict(
        "gradient check",
        ok,
        f"max grad rel err {worst_grad:.2e} (< 1e-6), max hess rel err "
        f"{worst_hess:.2e} (< 1e-4), {elapsed:.2f}s (< 10s)",
    )


def test_synthetic_ranking_recovery(monkeypatch):
    """Linear signal plus 10% noise, default hyperparameters, single-threaded."""
    monkeypatch.setenv("HEADLINE_RANK_THREADS", "1")
    t0 = time.perf_counter()
    rng = np.random.default_rng(42)
    n_docs, dim = 512, 16
    X = rng.normal(size=(n_docs, dim)).astype(np.float32)
    w = rng.normal(size=dim)
    true = X.astype(np.float64) @ w
    observed = true + rng.normal(scale=0.1 * true.std(), size=n_docs)

    train_pairs = _sample_pairs(rng, n_docs, 2000)
    hold_pairs = _sample_pairs(rng, n_docs, 500)

    def oriented(pair_list):
        return np.array(
            [(i, j) if observed[i] > observed[j] else (j, i) for i, j in pair_list],
            dtype=np.int64,
        )

    model = train(
        TrainingPairSet(X, oriented(train_pairs)),
        TrainingPairSet(X, oriented(hold_pairs)),
        HyperParams(),
    )

    scores = model.score_matrix(X.astype(np.float64))
    d_model = scores[[i for i, _ in hold_pairs]] - scores[[j for _, j in hold_pairs]]
    d_true = true[[i for i, _ in hold_pairs]] - true[[j for _, j in hold_pairs]]
    ordering_acc = float(np.mean(np.sign(d_model) == np.sign(d_true)))

    # three-way gold labels from noise-free scores z-scored over the same
    # pool the predictor uses (the distinct headlines of the held-out set)
    ids = [f"doc{i}" for i in range(n_docs)]
    pool_rows = sorted({i for pair in hold_pairs for i in pair})
    z = np.full(n_docs, np.nan)
    pool_true = true[pool_rows]
    z[pool_rows] = (pool_true - pool_true.mean()) / pool_true.std()

    def gold_label(i: int, j: int) -> Label:
        d = z[j] - z[i]
        if abs(d) <= 0.1:
            return D
        return L if d < 0 else R

    dataset = PairDataset(
        tuple(PairRecord(ids[i], ids[j], gold_label(i, j)) for i, j in hold_pairs)
    )
    spec = BlendSpec(((model, EmbeddingStore(ids, X)),))
    predictions = predict_dataset(spec, dataset)
    weighted = weighted_accuracy(
        [r.label for r in dataset], [p.label for p in predictions]
    )
    elapsed = time.perf_counter() - t0
    ok = ordering_acc >= 0.90 and weighted >= 0.85 and elapsed < 60.0
    _verdict(
        "synthetic ranking recovery",
        ok,
        f"ordering acc {ordering_acc:.3f} (>= 0.90), weighted acc {weighted:.3f} "
        f"(>= 0.85), {elapsed:.1f}s (< 60s)",
    )


def test_ensemble_of_identical_members_is_identity():
    """Blending five copies of one model decides exactly like the model."""
    rng = np.random.default_rng(50)
    n_docs, dim = 60, 4
    X = rng.normal(size=(n_docs, dim)).astype(np.float32)
    w = rng.normal(size=dim)
    true = X.astype(np.float64) @ w
    pairs = np.array(_sample_pairs(rng, n_docs, 200), dtype=np.int64)
    flip = true[pairs[:, 0]] <= true[pairs[:, 1]]
    pairs[flip] = pairs[flip][:, ::-1]
    model = train(
        TrainingPairSet(X, pairs[:150]),
        TrainingPairSet(X, pairs[150:]),
        HyperParams(n_trees=30, min_samples_leaf=5),
    )
    ids = [f"u{i}" for i in range(n_docs)]
    store = EmbeddingStore(ids, X)
    dataset = PairDataset(
        tuple(PairRecord(ids[i], ids[j], L) for i, j in _sample_pairs(rng, n_docs, 300))
    )
    single = predict_dataset(BlendSpec(((model, store),)), dataset)
    blended = predict_dataset(
        BlendSpec(tuple((model, store) for _ in range(5))), dataset
    )
    same = sum(1 for a, b in zip(single, blended) if a.label is b.label)
    _verdict(
        "ensemble identity",
        same == len(dataset),
        f"k=5 copies agree with the single model on {same}/{len(dataset)} labels",
    )


def test_training_determinism_and_model_round_trip(
    tmp_path, make_linear_problem, write_pairs_file, dataset_to_rows
):
    """Byte-identical reruns of the train command; bit-exact reload scores."""
    problem = make_linear_problem(seed=60, n_docs=80, dim=5, n_pairs=260)
    emb_path = tmp_path / "emb.hse"
    write_embeddings(problem.store, emb_path)
    pairs_path = write_pairs_file(dataset_to_rows(problem.labeled_records()))

    flags = [
        "train", "--pairs", str(pairs_path), "--embeddings", str(emb_path),
        "--trees", "30", "--min-leaf", "5", "--seed", "3", "--log-every", "0",
    ]
    out1, out2 = tmp_path / "m1.json", tmp_path / "m2.json"
    rc1 = cli_main(flags + ["--out", str(out1)])
    rc2 = cli_main(flags + ["--out", str(out2)])
    identical = out1.read_bytes() == out2.read_bytes()

    model = load_model(out1)
    reloaded_path = tmp_path / "m3.json"
    save_model(model, reloaded_path)
    reloaded = load_model(reloaded_path)
    Xq = problem.features.astype(np.float64)
    bit_exact = np.array_equal(model.score_matrix(Xq), reloaded.score_matrix(Xq))

    ok = rc1 == 0 and rc2 == 0 and identical and bit_exact
    _verdict(
        "training determinism",
        ok,
        f"rerun byte-identical={identical}, save/load scores bit-exact={bit_exact}",
    )


def test_decision_rule_boundary_and_antisymmetry():
    """The seven boundary differences plus mirrored random pairs."""
    table = [
        (-0.2, L), (-0.1, D), (-0.05, D), (0.0, D), (0.05, D), (0.1, D), (0.2, R),
    ]
    boundary_ok = all(
        decide_label(PairScores(0.0, d), 0.1) is want for d, want in table
    )
    rng = np.random.default_rng(70)
    mirror = {L: R, R: L, D: D}
    mirrored = 0
    for _ in range(1000):
        a, b = rng.normal(size=2)
        if decide_label(PairScores(b, a), 0.1) is mirror[decide_label(PairScores(a, b), 0.1)]:
            mirrored += 1
    ok = boundary_ok and mirrored == 1000
    _verdict(
        "decision rule",
        ok,
        f"boundary table exact={boundary_ok}, antisymmetry {mirrored}/1000",
    )


def test_binary_formats_round_trip(tmp_path):
    """Write-read-write byte identity for both containers at 0/1/10k rows."""
    rng = np.random.default_rng(80)
    all_ok = True
    sizes = [0, 1, 10_000]
    for n in sizes:
        dim = 32
        ids = [f"https://item/{k}" for k in range(n)]
        store = EmbeddingStore(
            ids, rng.normal(size=(n, dim)).astype(np.float32), dim=dim
        )
        p1, p2 = tmp_path / f"e{n}a.hse", tmp_path / f"e{n}b.hse"
        write_embeddings(store, p1)
        write_embeddings(load_embeddings(p1), p2)
        all_ok &= p1.read_bytes() == p2.read_bytes()

        seqs = tuple(
            TokenEmbeddingSequence(
                ids[k], rng.normal(size=(int(rng.integers(1, 4)), 8)).astype(np.float32)
            )
            for k in range(n)
        )
        t1, t2 = tmp_path / f"t{n}a.hst", tmp_path / f"t{n}b.hst"
        write_token_file(TokenFile(8, seqs), t1)
        write_token_file(read_token_file(t1), t2)
        all_ok &= t1.read_bytes() == t2.read_bytes()
    _verdict(
        "format round trips",
        all_ok,
        f"HSE1 and HST1 byte-identical at row counts {sizes}",
    )


def test_ablation_separates_signal_from_noise(tmp_path):
    """An informative token file must beat a pure-noise one in every run."""
    rng = np.random.default_rng(11)
    n, dim = 300, 8
    ids = [f"https://news.example/{i}" for i in range(n)]
    w = rng.normal(size=dim)
    true = {}
    signal_seqs, noise_seqs = [], []
    for headline_id in ids:
        base = rng.normal(size=dim).astype(np.float32)
        tokens = (
            base + rng.normal(scale=0.02, size=(int(rng.integers(3, 7)), dim))
        ).astype(np.float32)
        signal_seqs.append(TokenEmbeddingSequence(headline_id, tokens))
        true[headline_id] = float(base.astype(np.float64) @ w)
        noise_seqs.append(
            TokenEmbeddingSequence(
                headline_id, rng.normal(size=(4, dim)).astype(np.float32)
            )
        )
    signal_path = tmp_path / "signal.hst"
    noise_path = tmp_path / "noise.hst"
    write_token_file(TokenFile(dim, tuple(signal_seqs)), signal_path)
    write_token_file(TokenFile(dim, tuple(noise_seqs)), noise_path)

    rows = []
    seen = set()
    while len(rows) < 340:
        i, j = rng.integers(0, n, 2)
        if i == j or (i, j) in seen:
            continue
        seen.add((i, j))
        left, right = ids[i], ids[j]
        rows.append(
            {
                "left_url": left,
                "right_url": right,
                "label": "left" if true[left] > true[right] else "right",
            }
        )
    pairs_path = tmp_path / "pairs.jsonl"
    with open(pairs_path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")

    grid_path = tmp_path / "grid.json"
    rc = cli_main(
        [
            "ablate", "--pairs", str(pairs_path),
            "--token-files", f"signal={signal_path},noise={noise_path}",
            "--methods", "mean,cls", "--seed", "42", "--repeats", "3",
            "--valid-frac", "0.15", "--trees", "60", "--min-leaf", "5",
            "--early-stop", "20", "--json-out", str(grid_path),
        ]
    )
    assert rc == 0
    grid = {
        row["representation"]: row["runs"]
        for row in json.loads(grid_path.read_text())["rows"]
    }
    comparisons = []
    for method in ("mean", "cls"):
        for run in range(3):
            comparisons.append(
                grid[f"signal/{method}"][run] > grid[f"noise/{method}"][run]
            )
    margins = [
        min(grid[f"signal/{m}"][r] - grid[f"noise/{m}"][r] for r in range(3))
        for m in ("mean", "cls")
    ]
    ok = all(comparisons)
    _verdict(
        "ablation sanity",
        ok,
        f"signal beats noise in {sum(comparisons)}/6 (method x repeat) cells, "
        f"min margins mean/cls = {margins[0]:.3f}/{margins[1]:.3f}",
    )
