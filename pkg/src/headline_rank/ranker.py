"""Gradient-boosted regression trees trained on the pairwise logistic loss.

The loss over a set of (positive, negative) document pairs is

    sum over pairs of  -log sigmoid(a_p - a_n)

where a_p and a_n are the current scores of the pair's elements.  Each
boosting iteration fits one depth-limited regression tree to the Newton
targets of that loss using equal-frequency histogram splits, then appends
it with its leaf values shrunk by the learning rate.  The final model is
truncated to the iteration with the lowest validation loss.

Everything here is deterministic: histogram bin edges are computed once
from the training features, candidate splits are scanned feature-ascending
then threshold-ascending with strict gain improvement, so ties always
resolve to the lowest feature index and lowest threshold.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .data import TrainingPairSet

MODEL_VERSION = 1

# A tree is a flat node list in pre-order: index 0 is the root and children
# always come after their parent.  Internal node: [feature, threshold, left,
# right]; leaf: [None, value].  Routing: go left iff x[feature] <= threshold.
Node = list
Tree = list


class ModelFormatError(ValueError):
    """A model file that violates the JSON schema."""


@dataclass(frozen=True)
class HyperParams:
    """Boosting knobs; defaults sized for a few thousand training pairs."""

    n_trees: int = 1000
    max_depth: int = 6
    learning_rate: float = 0.1
    n_bins: int = 256
    min_samples_leaf: int = 20
    early_stop_rounds: int = 50  # 0 disables early stopping
    l2_leaf_reg: float = 3.0
    seed: int = 42

    def __post_init__(self) -> None:
        if self.n_trees <= 0:
            raise ValueError(f"n_trees must be positive, got {self.n_trees}")
        if self.max_depth <= 0:
            raise ValueError(f"max_depth must be positive, got {self.max_depth}")
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if not 2 <= self.n_bins <= 256:
            raise ValueError(f"n_bins must be in [2, 256], got {self.n_bins}")
        if self.min_samples_leaf <= 0:
            raise ValueError(f"min_samples_leaf must be positive, got {self.min_samples_leaf}")
        if self.early_stop_rounds < 0:
            raise ValueError(f"early_stop_rounds must be >= 0, got {self.early_stop_rounds}")
        if self.l2_leaf_reg < 0:
            raise ValueError(f"l2_leaf_reg must be >= 0, got {self.l2_leaf_reg}")


@dataclass(frozen=True)
class PairGradients:
    """Per-document first and second derivatives of the pairwise loss."""

    grad: np.ndarray
    hess: np.ndarray


@dataclass
class TrainingSummary:
    """Per-iteration history recorded while boosting (not persisted)."""

    best_iteration: int
    train_loss: list[float] = field(default_factory=list)
    valid_loss: list[float] = field(default_factory=list)
    valid_accuracy: list[float] = field(default_factory=list)
    trees_grown: int = 0


def _as_pair_array(pairs: Sequence | np.ndarray, n_docs: int) -> np.ndarray:
    arr = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if arr.size:
        if arr.min() < 0 or arr.max() >= n_docs:
            raise ValueError("pair index out of range")
    return arr


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def pair_logit_loss(scores: Sequence[float] | np.ndarray, pairs: Sequence | np.ndarray) -> float:
    """Total -log sigmoid(a_p - a_n) over the given (positive, negative) pairs.

    Stable for arbitrary score differences (computed as log(1 + e^-d) via
    logaddexp); an empty pair list yields 0.0.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size and not np.isfinite(scores).all():
        raise ValueError("scores must be finite")
    arr = _as_pair_array(pairs, scores.shape[0])
    if arr.shape[0] == 0:
        return 0.0
    d = scores[arr[:, 0]] - scores[arr[:, 1]]
    return float(np.logaddexp(0.0, -d).sum())


def pair_logit_gradients(
    scores: Sequence[float] | np.ndarray, pairs: Sequence | np.ndarray
) -> PairGradients:
    """Per-document gradient and (diagonal) hessian of pair_logit_loss.

    With s = sigmoid(a_p - a_n), each pair contributes -(1-s) to grad[p],
    +(1-s) to grad[n], and s(1-s) to both hessian entries.  Documents in no
    pair get exact zeros.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size and not np.isfinite(scores).all():
        raise ValueError("scores must be finite")
    n = scores.shape[0]
    arr = _as_pair_array(pairs, n)
    if arr.shape[0] == 0:
        return PairGradients(np.zeros(n), np.zeros(n))
    d = scores[arr[:, 0]] - scores[arr[:, 1]]
    s = _sigmoid(d)
    g = s - 1.0  # d/da_p of log(1 + e^-d)
    h = s * (1.0 - s)
    grad = np.bincount(arr[:, 0], weights=g, minlength=n) - np.bincount(
        arr[:, 1], weights=g, minlength=n
    )
    hess = np.bincount(arr[:, 0], weights=h, minlength=n) + np.bincount(
        arr[:, 1], weights=h, minlength=n
    )
    return PairGradients(grad, hess)


class _CompiledTrees:
    """Array form of the flat node lists, for vectorized routing."""

    def __init__(self, trees: Sequence[Tree]):
        self.feature: list[np.ndarray] = []
        self.threshold: list[np.ndarray] = []
        self.left: list[np.ndarray] = []
        self.right: list[np.ndarray] = []
        self.value: list[np.ndarray] = []
        self.depth: list[int] = []
        for tree in trees:
            n = len(tree)
            feat = np.zeros(n, dtype=np.int64)
            thr = np.zeros(n, dtype=np.float64)
            left = np.arange(n, dtype=np.int64)
            right = np.arange(n, dtype=np.int64)
            val = np.zeros(n, dtype=np.float64)
            for i, node in enumerate(tree):
                if node[0] is None:
                    val[i] = node[1]
                else:
                    feat[i] = node[0]
                    thr[i] = node[1]
                    left[i] = node[2]
                    right[i] = node[3]
            self.feature.append(feat)
            self.threshold.append(thr)
            self.left.append(left)
            self.right.append(right)
            self.value.append(val)
            self.depth.append(_tree_depth(tree))

    def route_one(self, t: int, X: np.ndarray) -> np.ndarray:
        """Leaf values of tree t for every row of X (float64, (m, dim))."""
        m = X.shape[0]
        node = np.zeros(m, dtype=np.int64)
        rows = np.arange(m)
        for _ in range(self.depth[t]):
            go_left = X[rows, self.feature[t][node]] <= self.threshold[t][node]
            # Leaves point at themselves, so they stay put.
            node = np.where(go_left, self.left[t][node], self.right[t][node])
        return self.value[t][node]


def _tree_depth(tree: Tree) -> int:
    if not tree:
        return 0
    depth = np.zeros(len(tree), dtype=np.int64)
    out = 0
    for i, node in enumerate(tree):  # children come after parents
        if node[0] is None:
            out = max(out, int(depth[i]))
        else:
            depth[node[2]] = depth[i] + 1
            depth[node[3]] = depth[i] + 1
    return out


class RankerModel:
    """Additive ensemble of regression trees scoring one vector to a scalar.

    Leaf values are stored with the learning rate already applied, so a
    document's score is base_score plus the routed leaf value of every tree.
    Instances are immutable after construction and safe to share across
    threads.
    """

    def __init__(
        self,
        dim: int,
        trees: Sequence[Tree],
        learning_rate: float = HyperParams.learning_rate,
        base_score: float = 0.0,
        best_iteration: int = -1,
        metadata: TrainingSummary | None = None,
    ):
        if dim <= 0:
            raise ValueError(f"dim must be positive, got {dim}")
        if not (math.isfinite(base_score) and math.isfinite(learning_rate)):
            raise ValueError("base_score and learning_rate must be finite")
        self.dim = int(dim)
        self.trees = []
        for tree in trees:
            copied = [list(node) if isinstance(node, (list, tuple)) else node for node in tree]
            _validate_tree(copied, self.dim)
            self.trees.append(copied)
        self.learning_rate = float(learning_rate)
        self.base_score = float(base_score)
        self.best_iteration = int(best_iteration)
        self.metadata = metadata
        self._compiled = _CompiledTrees(self.trees)

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def score(self, x: Sequence[float] | np.ndarray) -> float:
        """Score one sentence vector; deterministic bit-for-bit."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise ValueError(f"expected a vector of dim {self.dim}, got shape {x.shape}")
        total = self.base_score
        for tree in self.trees:
            node = tree[0]
            while node[0] is not None:
                node = tree[node[2]] if x[node[0]] <= node[1] else tree[node[3]]
            total += node[1]
        return float(total)

    def score_matrix(self, X: np.ndarray) -> np.ndarray:
        """Score every row of X; identical bits to per-row score()."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.dim:
            raise ValueError(f"expected an (m, {self.dim}) matrix, got shape {X.shape}")
        total = np.full(X.shape[0], self.base_score, dtype=np.float64)
        for t in range(len(self.trees)):
            total += self._compiled.route_one(t, X)
        return total


def _validate_tree(tree: Tree, dim: int) -> None:
    if not tree:
        raise ModelFormatError("tree must contain at least one node")
    for i, node in enumerate(tree):
        if not isinstance(node, list):
            raise ModelFormatError(f"node {i} must be a list")
        if len(node) == 2 and node[0] is None:
            value = node[1]
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ModelFormatError(f"leaf {i} value must be a finite number")
            node[1] = float(value)
        elif len(node) == 4:
            feature, threshold, left, right = node
            if not isinstance(feature, int) or isinstance(feature, bool) or not 0 <= feature < dim:
                raise ModelFormatError(f"node {i} feature index out of range")
            if not isinstance(threshold, (int, float)) or not math.isfinite(threshold):
                raise ModelFormatError(f"node {i} threshold must be a finite number")
            for child in (left, right):
                if not isinstance(child, int) or isinstance(child, bool):
                    raise ModelFormatError(f"node {i} child index must be an integer")
                # Children strictly after the parent keeps the structure acyclic.
                if not i < child < len(tree):
                    raise ModelFormatError(f"node {i} child index {child} out of order")
            if left == right:
                raise ModelFormatError(f"node {i} children must differ")
            node[1] = float(threshold)
        else:
            raise ModelFormatError(f"node {i} must have 2 (leaf) or 4 (split) entries")


def _bin_features(X: np.ndarray, n_bins: int) -> tuple[list[np.ndarray], np.ndarray]:
    """Equal-frequency bin edges per feature, plus the binned feature codes.

    Edges are the interior quantiles of each training column, deduplicated.
    Code b means the value sits strictly above edge b-1 and at or below edge
    b, so "bin <= b" and "value <= edges[b]" select the same rows.
    """
    n, n_features = X.shape
    grid = np.linspace(0.0, 1.0, n_bins + 1)[1:-1]
    edges: list[np.ndarray] = []
    codes = np.empty((n, n_features), dtype=np.uint8)
    for f in range(n_features):
        col = X[:, f].astype(np.float64)
        t = np.unique(np.quantile(col, grid))
        edges.append(t)
        codes[:, f] = np.searchsorted(t, col, side="left")
    return edges, codes


def _find_split(
    codes: np.ndarray,
    n_edges: np.ndarray,
    rows: np.ndarray,
    grad: np.ndarray,
    hess: np.ndarray,
    g_total: float,
    h_total: float,
    params: HyperParams,
    stride: int,
) -> tuple[int, int] | None:
    """Best (feature, edge index) by Newton gain, or None if nothing qualifies.

    The gain grid is scanned in feature-major, edge-ascending order with a
    strict improvement rule, which is exactly the lowest-feature then
    lowest-threshold tie-break.
    """
    n_features = codes.shape[1]
    sub = codes[rows].astype(np.int64)
    flat = (sub + np.arange(n_features, dtype=np.int64) * stride).ravel()
    size = n_features * stride
    hist_g = np.bincount(flat, weights=np.repeat(grad[rows], n_features), minlength=size)
    hist_h = np.bincount(flat, weights=np.repeat(hess[rows], n_features), minlength=size)
    hist_n = np.bincount(flat, minlength=size)
    gl = hist_g.reshape(n_features, stride).cumsum(axis=1)
    hl = hist_h.reshape(n_features, stride).cumsum(axis=1)
    nl = hist_n.reshape(n_features, stride).cumsum(axis=1)
    gr = g_total - gl
    hr = h_total - hl
    nr = rows.size - nl

    lam = params.l2_leaf_reg
    with np.errstate(divide="ignore", invalid="ignore"):
        parent = g_total * g_total / (h_total + lam) if h_total + lam > 0 else 0.0
        gain = gl * gl / (hl + lam) + gr * gr / (hr + lam) - parent
    usable = (
        (np.arange(stride) < n_edges[:, None])
        & (nl >= params.min_samples_leaf)
        & (nr >= params.min_samples_leaf)
        & np.isfinite(gain)
    )
    gain = np.where(usable, gain, -np.inf)
    flat_best = int(np.argmax(gain))  # row-major argmax = the tie-break order
    if gain.ravel()[flat_best] <= 0.0:
        return None
    return flat_best // stride, flat_best % stride


def _leaf_value(g: float, h: float, params: HyperParams) -> float:
    denom = h + params.l2_leaf_reg
    if denom <= 0.0:
        return 0.0
    return -g / denom * params.learning_rate


def _grow_tree(
    codes: np.ndarray,
    edges: list[np.ndarray],
    grad: np.ndarray,
    hess: np.ndarray,
    params: HyperParams,
    stride: int,
) -> tuple[Tree, list[tuple[np.ndarray, float]]]:
    """Grow one tree on the Newton targets; returns it with its leaf row sets."""
    n_edges = np.array([len(e) for e in edges], dtype=np.int64)
    nodes: Tree = []
    leaf_rows: list[tuple[np.ndarray, float]] = []

    def build(rows: np.ndarray, depth: int) -> int:
        index = len(nodes)
        nodes.append(None)  # reserved; filled below
        g_total = float(grad[rows].sum())
        h_total = float(hess[rows].sum())
        split = None
        if depth < params.max_depth and rows.size >= 2 * params.min_samples_leaf:
            split = _find_split(
                codes, n_edges, rows, grad, hess, g_total, h_total, params, stride
            )
        if split is None:
            value = _leaf_value(g_total, h_total, params)
            nodes[index] = [None, value]
            leaf_rows.append((rows, value))
            return index
        feature, edge = split
        go_left = codes[rows, feature] <= edge
        left = build(rows[go_left], depth + 1)
        right = build(rows[~go_left], depth + 1)
        nodes[index] = [feature, float(edges[feature][edge]), left, right]
        return index

    build(np.arange(codes.shape[0], dtype=np.int64), 0)
    return nodes, leaf_rows


def _banded_pair_accuracy(scores: np.ndarray, pairs: np.ndarray, band: float = 0.1) -> float:
    """Share of pairs scored positive-first, counting a within-band gap as half.

    Logged per iteration for inspection; raw model scores, fixed 0.1 band.
    """
    d = scores[pairs[:, 0]] - scores[pairs[:, 1]]
    return float(np.mean(np.where(d > band, 1.0, np.where(d < -band, 0.0, 0.5))))


def train(
    train_set: TrainingPairSet,
    valid_set: TrainingPairSet,
    params: HyperParams = HyperParams(),
    on_iteration: Callable[[int, float, float | None], None] | None = None,
) -> RankerModel:
    """Boost regression trees on the pairwise logistic loss.

    Validation loss is recorded after every iteration; boosting stops once it
    has not improved for early_stop_rounds iterations, and the returned model
    is truncated to the best iteration.  With no validation pairs the model
    keeps every tree.  Identical inputs produce an identical model.
    """
    if train_set.n_pairs == 0:
        raise ValueError("no usable training pairs")
    if valid_set.dim != train_set.dim:
        raise ValueError(
            f"validation dim {valid_set.dim} does not match training dim {train_set.dim}"
        )
    X = np.ascontiguousarray(train_set.features, dtype=np.float32)
    pairs = train_set.pairs
    edges, codes = _bin_features(X, params.n_bins)
    stride = params.n_bins

    scores = np.zeros(X.shape[0], dtype=np.float64)
    has_valid = valid_set.n_pairs > 0
    valid_x = np.asarray(valid_set.features, dtype=np.float64)
    valid_scores = np.zeros(valid_x.shape[0], dtype=np.float64)

    summary = TrainingSummary(best_iteration=-1)
    trees: list[Tree] = []
    best_loss = math.inf
    best_iteration = -1

    for iteration in range(params.n_trees):
        g = pair_logit_gradients(scores, pairs)
        tree, leaf_rows = _grow_tree(codes, edges, g.grad, g.hess, params, stride)
        trees.append(tree)
        for rows, value in leaf_rows:
            scores[rows] += value
        train_loss = pair_logit_loss(scores, pairs)
        summary.train_loss.append(train_loss)

        valid_loss: float | None = None
        if has_valid:
            valid_scores += _CompiledTrees([tree]).route_one(0, valid_x)
            valid_loss = pair_logit_loss(valid_scores, valid_set.pairs)
            summary.valid_loss.append(valid_loss)
            summary.valid_accuracy.append(_banded_pair_accuracy(valid_scores, valid_set.pairs))
            if valid_loss < best_loss:
                best_loss = valid_loss
                best_iteration = iteration
        if on_iteration is not None:
            on_iteration(iteration, train_loss, valid_loss)
        if has_valid and params.early_stop_rounds and iteration - best_iteration >= params.early_stop_rounds:
            break

    summary.trees_grown = len(trees)
    if not has_valid:
        best_iteration = len(trees) - 1
    summary.best_iteration = best_iteration
    return RankerModel(
        dim=train_set.dim,
        trees=trees[: best_iteration + 1],
        learning_rate=params.learning_rate,
        base_score=0.0,
        best_iteration=best_iteration,
        metadata=summary,
    )


def save_model(model: RankerModel, path: str | Path) -> None:
    """Write the model as canonical JSON; identical models give identical bytes."""
    doc = {
        "version": MODEL_VERSION,
        "dim": model.dim,
        "base_score": model.base_score,
        "learning_rate": model.learning_rate,
        "best_iteration": model.best_iteration,
        "trees": model.trees,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, separators=(",", ":"))
        fh.write("\n")


def load_model(path: str | Path) -> RankerModel:
    """Read a model file; scores reproduce the saved model bit-for-bit."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"invalid JSON: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ModelFormatError("model file must hold a JSON object")
    missing = {"version", "dim", "base_score", "learning_rate", "best_iteration", "trees"} - set(doc)
    if missing:
        raise ModelFormatError(f"missing keys: {', '.join(sorted(missing))}")
    if doc["version"] != MODEL_VERSION:
        raise ModelFormatError(f"unknown model version {doc['version']!r}")
    dim = doc["dim"]
    if not isinstance(dim, int) or isinstance(dim, bool) or dim <= 0:
        raise ModelFormatError("dim must be a positive integer")
    if not isinstance(doc["best_iteration"], int) or isinstance(doc["best_iteration"], bool):
        raise ModelFormatError("best_iteration must be an integer")
    for key in ("base_score", "learning_rate"):
        if not isinstance(doc[key], (int, float)) or not math.isfinite(doc[key]):
            raise ModelFormatError(f"{key} must be a finite number")
    if not isinstance(doc["trees"], list) or not all(isinstance(t, list) for t in doc["trees"]):
        raise ModelFormatError("trees must be a list of node lists")
    try:
        return RankerModel(
            dim=dim,
            trees=doc["trees"],
            learning_rate=float(doc["learning_rate"]),
            base_score=float(doc["base_score"]),
            best_iteration=doc["best_iteration"],
        )
    except ModelFormatError:
        raise
    except ValueError as exc:
        raise ModelFormatError(str(exc)) from None
