"""Random forest for regression and classification, built from scratch.

Trees are grown on bootstrap samples; each node draws a fixed number of
candidate features and scans all midpoint thresholds, choosing the split by
variance reduction (regression) or Gini decrease (classification).  Ties
break toward the lowest feature index, then the lowest threshold, so a
(data, params, seed) triple fully determines the model.

Feature relevance is estimated out-of-bag by permutation: the increase in
OOB error when one feature column is shuffled, averaged over trees and
normalized to sum 1.

Defaults follow the depth-regression setup: 105 trees, 11 candidate
features per node, depth cap 35.
"""

import hashlib
import io
import json
import struct
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import (
    DimensionMismatchError,
    EmptyInputError,
    FormatError,
    NotTrainedError,
)

FOREST_MAGIC = b"PDFOR1"


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 105
    n_features_per_node: int = 11
    max_depth: int = 35
    min_samples_leaf: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1 or self.max_depth < 1 or self.min_samples_leaf < 1:
            raise ValueError("forest parameters must be positive")
        if self.n_features_per_node < 1:
            raise ValueError("need at least one candidate feature per node")


@dataclass
class Tree:
    feature: np.ndarray    # (n_nodes,) int32; -1 marks a leaf
    threshold: np.ndarray  # (n_nodes,) float64
    left: np.ndarray       # (n_nodes,) int32
    right: np.ndarray      # (n_nodes,) int32
    value: np.ndarray      # (n_nodes,) or (n_nodes, n_classes) float64


@dataclass
class ForestModel:
    task: str              # "regression" or "classification"
    params: ForestParams
    n_features: int
    n_classes: int         # 0 for regression
    trees: list = field(default_factory=list)
    oob_importance: np.ndarray = None
    schema_hash: str = ""


def _leaf_value(y, task, n_classes):
    if task == "regression":
        return float(y.mean())
    counts = np.bincount(y, minlength=n_classes).astype(np.float64)
    return counts / counts.sum()


def _best_split(X, y, rows, feats, min_leaf, task, n_classes):
    """Best (feature, threshold, gain) over candidate features, or None.

    gain is the decrease in SSE (regression) or weighted Gini impurity
    (classification); only strictly positive gains split.
    """
    sub = X[np.ix_(rows, feats)]
    n, m = sub.shape
    order = np.argsort(sub, axis=0, kind="stable")
    svals = np.take_along_axis(sub, order, axis=0)
    ysub = y[rows]
    counts_left = np.arange(1, n, dtype=np.float64)[:, None]
    counts_right = n - counts_left
    if task == "regression":
        ysort = ysub[order]
        csum = np.cumsum(ysort, axis=0)
        total = csum[-1]
        left_sum = csum[:-1]
        right_sum = total[None, :] - left_sum
        score = left_sum**2 / counts_left + right_sum**2 / counts_right
        base = total**2 / n
        gains = score - base[None, :]
    else:
        # per-feature-ordering one-hot counts, prefix-summed for Gini
        oh = np.zeros((n, m, n_classes))
        yo = ysub[order]
        for c in range(n_classes):
            oh[:, :, c] = yo == c
        csum = np.cumsum(oh, axis=0)
        total = csum[-1]
        left = csum[:-1]
        right = total[None] - left
        score = (left**2).sum(axis=2) / counts_left + (right**2).sum(
            axis=2
        ) / counts_right
        base = (total**2).sum(axis=1) / n
        gains = score - base[None, :]
    # a split position i puts the first i sorted rows left
    valid = svals[:-1] < svals[1:]
    pos = np.arange(1, n)[:, None]
    valid &= (pos >= min_leaf) & (n - pos >= min_leaf)
    gains = np.where(valid, gains, -np.inf)
    best = gains.max()
    if not np.isfinite(best) or best <= 1e-12:
        return None
    cand = np.argwhere(gains == best)
    thresholds = 0.5 * (svals[cand[:, 0], cand[:, 1]] + svals[cand[:, 0] + 1, cand[:, 1]])
    keys = sorted(
        (int(feats[j]), float(t), int(i))
        for (i, j), t in zip(cand, thresholds)
    )
    f_orig, threshold, _ = keys[0]
    return f_orig, threshold, float(best)


def _grow_tree(X, y, rows, rng, params, task, n_classes):
    n_features = X.shape[1]
    m = min(params.n_features_per_node, n_features)
    feature, threshold, left, right, value = [], [], [], [], []
    stack = [(rows, 0, -1, False)]  # rows, depth, parent index, is_right
    while stack:
        rows_here, depth, parent, is_right = stack.pop()
        node_id = len(feature)
        if parent >= 0:
            if is_right:
                right[parent] = node_id
            else:
                left[parent] = node_id
        ysub = y[rows_here]
        pure = bool(np.all(ysub == ysub[0]))
        split = None
        if (
            depth < params.max_depth
            and len(rows_here) >= 2 * params.min_samples_leaf
            and not pure
        ):
            feats = np.sort(rng.choice(n_features, size=m, replace=False))
            split = _best_split(
                X, y, rows_here, feats, params.min_samples_leaf, task, n_classes
            )
        if split is None:
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(_leaf_value(ysub, task, n_classes))
            continue
        f, t, _ = split
        feature.append(f)
        threshold.append(t)
        left.append(-1)
        right.append(-1)
        value.append(
            np.zeros(n_classes) if task == "classification" else 0.0
        )
        go_left = X[rows_here, f] <= t
        # right child pushed first so the left subtree is built depth-first
        stack.append((rows_here[~go_left], depth + 1, node_id, True))
        stack.append((rows_here[go_left], depth + 1, node_id, False))
    return Tree(
        feature=np.asarray(feature, dtype=np.int32),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int32),
        right=np.asarray(right, dtype=np.int32),
        value=np.asarray(value, dtype=np.float64),
    )


def _tree_apply(tree, X):
    """Leaf index for every row of X (vectorized level-by-level routing)."""
    idx = np.zeros(X.shape[0], dtype=np.int32)
    active = np.where(tree.feature[idx] >= 0)[0]
    while active.size:
        node = idx[active]
        f = tree.feature[node]
        go_left = X[active, f] <= tree.threshold[node]
        idx[active] = np.where(go_left, tree.left[node], tree.right[node])
        active = active[tree.feature[idx[active]] >= 0]
    return idx


def _tree_predict(tree, X):
    return tree.value[_tree_apply(tree, X)]


def _oob_error(model, tree, X, y):
    pred = _tree_predict(tree, X)
    if model.task == "regression":
        return float(np.mean((pred - y) ** 2))
    return float(np.mean(np.argmax(pred, axis=1) != y))


def schema_hash(n_features, names=None):
    text = f"{n_features}:" + ",".join(names or [])
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def train(X, y, params=None, task="regression", compute_importance=True,
          feature_names=None):
    """Train a forest.  For depth regression, pass y = log10(depth).

    Deterministic given params.seed; every tree gets independently spawned
    bootstrap and permutation streams, so results do not depend on training
    order.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    params = params or ForestParams()
    if task not in ("regression", "classification"):
        raise ValueError(f"unknown task {task!r}")
    if X.ndim != 2:
        raise DimensionMismatchError("X must be (rows, features)")
    if X.shape[0] != y.shape[0]:
        raise DimensionMismatchError("one target per row required")
    if X.shape[0] < 2:
        raise EmptyInputError("need at least 2 training rows")
    if task == "regression":
        y = y.astype(np.float64)
        if not np.all(np.isfinite(y)):
            raise ValueError("targets must be finite")
        n_classes = 0
    else:
        y = y.astype(np.int64)
        if np.any(y < 0):
            raise ValueError("class labels must be non-negative")
        n_classes = int(y.max()) + 1
    if not np.all(np.isfinite(X)):
        raise ValueError("features must be finite")

    n = X.shape[0]
    model = ForestModel(
        task=task,
        params=params,
        n_features=X.shape[1],
        n_classes=n_classes,
        schema_hash=schema_hash(X.shape[1], feature_names),
    )
    seeds = np.random.SeedSequence(params.seed).spawn(params.n_trees)
    oob_masks = []
    perm_rngs = []
    for tree_seed in seeds:
        boot_rng, grow_rng, perm_rng = (
            np.random.default_rng(s) for s in tree_seed.spawn(3)
        )
        rows = boot_rng.integers(0, n, size=n)
        mask = np.ones(n, dtype=bool)
        mask[rows] = False
        oob_masks.append(mask)
        perm_rngs.append(perm_rng)
        model.trees.append(
            _grow_tree(X, y, rows, grow_rng, params, task, n_classes)
        )
    if compute_importance:
        model.oob_importance = _permutation_importance(
            model, X, y, oob_masks, perm_rngs
        )
    return model


def _permutation_importance(model, X, y, oob_masks, perm_rngs):
    n_features = model.n_features
    raw = np.zeros(n_features)
    used = 0
    for tree, mask, rng in zip(model.trees, oob_masks, perm_rngs):
        if not mask.any():
            continue
        used += 1
        Xo = X[mask]
        yo = y[mask]
        base = _oob_error(model, tree, Xo, yo)
        for f in range(n_features):
            perm = rng.permutation(Xo.shape[0])
            Xp = Xo.copy()
            Xp[:, f] = Xo[perm, f]
            raw[f] += _oob_error(model, tree, Xp, yo) - base
    if used == 0:
        raise NotTrainedError("no tree has out-of-bag rows")
    raw /= used
    total = raw.sum()
    if total <= 0:
        return np.full(n_features, 1.0 / n_features)
    return raw / total


def predict(model, x):
    """Forest prediction: mean of tree outputs.

    Regression returns a scalar (or (rows,) for a batch); classification
    returns a probability vector summing to 1 (or (rows, classes)).
    """
    if not model.trees:
        raise NotTrainedError("model has no trees")
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.shape[1] != model.n_features:
        raise DimensionMismatchError(
            f"expected {model.n_features} features, got {X.shape[1]}"
        )
    acc = None
    for tree in model.trees:
        out = _tree_predict(tree, X)
        acc = out if acc is None else acc + out
    acc = acc / len(model.trees)
    return acc[0] if single else acc


def oob_importance(model, blocks=None):
    """Per-feature permutation importance (sums to 1).

    With ``blocks`` (name -> slice), returns instead a per-block score
    normalized by block dimension, renormalized to sum 1.
    """
    if model.oob_importance is None:
        raise NotTrainedError("model was trained without OOB importance")
    imp = model.oob_importance
    if blocks is None:
        return imp
    scores = {}
    for name, sl in blocks.items():
        width = len(range(*sl.indices(model.n_features)))
        scores[name] = float(imp[sl].sum() / max(width, 1))
    total = sum(scores.values())
    if total > 0:
        scores = {k: v / total for k, v in scores.items()}
    return scores


# ---------------------------------------------------------------------------
# serialization (versioned binary, magic PDFOR1)

def save_forest(model, path):
    from .formats import atomic_write_bytes

    meta = {
        "version": 1,
        "task": model.task,
        "params": asdict(model.params),
        "n_features": model.n_features,
        "n_classes": model.n_classes,
        "n_trees": len(model.trees),
        "node_counts": [int(t.feature.size) for t in model.trees],
        "schema_hash": model.schema_hash,
        "has_importance": model.oob_importance is not None,
    }
    blob = json.dumps(meta, sort_keys=True).encode("utf-8")
    buf = io.BytesIO()
    buf.write(FOREST_MAGIC)
    buf.write(struct.pack("<I", len(blob)))
    buf.write(blob)
    for t in model.trees:
        buf.write(t.feature.astype("<i4").tobytes())
        buf.write(t.threshold.astype("<f8").tobytes())
        buf.write(t.left.astype("<i4").tobytes())
        buf.write(t.right.astype("<i4").tobytes())
        buf.write(t.value.astype("<f8").tobytes())
    if model.oob_importance is not None:
        buf.write(np.asarray(model.oob_importance, dtype="<f8").tobytes())
    atomic_write_bytes(path, buf.getvalue())


def load_forest(path):
    raw = open(path, "rb").read()
    if raw[:6] != FOREST_MAGIC:
        raise FormatError(f"{path}: not a {FOREST_MAGIC.decode()} model file")
    (json_len,) = struct.unpack("<I", raw[6:10])
    meta = json.loads(raw[10 : 10 + json_len].decode("utf-8"))
    if meta.get("version") != 1:
        raise FormatError(f"{path}: unsupported model version")
    offset = 10 + json_len
    model = ForestModel(
        task=meta["task"],
        params=ForestParams(**meta["params"]),
        n_features=meta["n_features"],
        n_classes=meta["n_classes"],
        schema_hash=meta["schema_hash"],
    )
    value_cols = meta["n_classes"] if meta["task"] == "classification" else 1
    for count in meta["node_counts"]:

        def take(dtype, items):
            nonlocal offset
            nbytes = np.dtype(dtype).itemsize * items
            arr = np.frombuffer(raw[offset : offset + nbytes], dtype=dtype)
            if arr.size != items:
                raise FormatError(f"{path}: truncated model payload")
            offset += nbytes
            return arr

        feature = take("<i4", count).astype(np.int32)
        threshold = take("<f8", count).astype(np.float64)
        left = take("<i4", count).astype(np.int32)
        right = take("<i4", count).astype(np.int32)
        value = take("<f8", count * value_cols).astype(np.float64)
        if value_cols > 1:
            value = value.reshape(count, value_cols)
        model.trees.append(Tree(feature, threshold, left, right, value))
    if meta["has_importance"]:
        nbytes = 8 * meta["n_features"]
        model.oob_importance = np.frombuffer(
            raw[offset : offset + nbytes], dtype="<f8"
        ).astype(np.float64)
        offset += nbytes
    if offset != len(raw):
        raise FormatError(f"{path}: trailing bytes in model file")
    return model
