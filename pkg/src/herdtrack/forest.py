"""Random forest classifier built from scratch for the 9-feature vectors.

Split selection is deterministic and fully specified so it can be checked
against exhaustive enumeration: every feature is scanned at every node,
candidate thresholds are midpoints between consecutive distinct values,
quality is cross-entropy information gain in bits computed from integer
class counts, and ties keep the first candidate in (feature index,
threshold) order.  Per-tree randomness comes only from bootstrap sampling
with a seed derived from (forest seed, tree index).

Majority voting breaks exact ties toward label 0, both in final
predictions and in the out-of-bag estimate.
"""

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import (
    ArgumentError,
    DegenerateTrainingError,
    DeserializationError,
    IncompatibleModelError,
)
from .features import FEATURE_ORDER
from .rng import ROLE_REBALANCE, ROLE_TREE, Rng, derive_seed

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 300
    seed: int = 0
    max_depth: int = 0  # 0 means unlimited


def _entropy(c0: int, c1: int) -> float:
    n = c0 + c1
    h = 0.0
    for c in (c0, c1):
        if c:
            p = c / n
            h -= p * math.log2(p)
    return h


def best_split(X: np.ndarray, y: np.ndarray):
    """Best (feature, threshold, gain) for one node, or None.

    Returns None when no threshold yields positive information gain (pure
    node or all rows identical on every feature).  Rows with value <=
    threshold go left.  The first candidate attaining the maximum gain in
    (feature index ascending, threshold ascending) order wins.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n = y.size
    if n < 2:
        return None
    c1_total = int(y.sum())
    c0_total = n - c1_total
    h_parent = _entropy(c0_total, c1_total)
    best = None
    best_gain = 0.0
    for f in range(X.shape[1]):
        col = X[:, f]
        order = np.argsort(col, kind="stable")
        vals = col[order]
        cum1 = np.cumsum(y[order])
        for i in range(n - 1):
            if vals[i] == vals[i + 1]:
                continue
            n_left = i + 1
            c1_left = int(cum1[i])
            c0_left = n_left - c1_left
            n_right = n - n_left
            c1_right = c1_total - c1_left
            c0_right = n_right - c1_right
            gain = (
                h_parent
                - (n_left / n) * _entropy(c0_left, c1_left)
                - (n_right / n) * _entropy(c0_right, c1_right)
            )
            if gain > best_gain:
                threshold = (vals[i] + vals[i + 1]) / 2.0
                best = (f, float(threshold), float(gain))
                best_gain = gain
    return best


def _majority(labels: np.ndarray) -> int:
    c1 = int(labels.sum())
    return 1 if 2 * c1 > labels.size else 0


def _grow(X, y, indices, depth, max_depth):
    labels = y[indices]
    c1 = int(labels.sum())
    if c1 == 0 or c1 == labels.size or (max_depth and depth >= max_depth):
        return {"label": _majority(labels)}
    split = best_split(X[indices], labels)
    if split is None:
        return {"label": _majority(labels)}
    f, t, _ = split
    mask = X[indices, f] <= t
    return {
        "f": f,
        "t": t,
        "l": _grow(X, y, indices[mask], depth + 1, max_depth),
        "r": _grow(X, y, indices[~mask], depth + 1, max_depth),
    }


def _tree_vote(tree: dict, row) -> int:
    node = tree
    while "label" not in node:
        node = node["l"] if row[node["f"]] <= node["t"] else node["r"]
    return node["label"]


class Forest:
    """Trained ensemble; votes() gives the positive-tree fraction per row."""

    def __init__(self, config: ForestConfig, trees: list, oob_score=None):
        self.config = config
        self.trees = trees
        self.oob_score = oob_score

    def votes(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != len(FEATURE_ORDER):
            raise ArgumentError(
                f"expected {len(FEATURE_ORDER)} features, got {X.shape[1]}"
            )
        out = np.zeros(X.shape[0], dtype=np.float64)
        for i, row in enumerate(X):
            positive = sum(_tree_vote(tree, row) for tree in self.trees)
            out[i] = positive / len(self.trees)
        return out

    def predict(self, X) -> np.ndarray:
        """Majority labels; an exact tie is resolved to 0."""
        return (self.votes(X) > 0.5).astype(np.int64)

    def save(self, path) -> None:
        payload = {
            "version": MODEL_FORMAT_VERSION,
            "config": asdict(self.config),
            "feature_order": list(FEATURE_ORDER),
            "oob_score": self.oob_score,
            "trees": self.trees,
        }
        Path(path).write_text(json.dumps(payload), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Forest":
        try:
            payload = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise DeserializationError(f"cannot read model {path}: {exc}") from exc
        if not isinstance(payload, dict) or "version" not in payload:
            raise DeserializationError(f"model {path} has no version field")
        if payload["version"] != MODEL_FORMAT_VERSION:
            raise IncompatibleModelError(
                f"model version {payload['version']} unsupported "
                f"(expected {MODEL_FORMAT_VERSION})"
            )
        if payload.get("feature_order") != list(FEATURE_ORDER):
            raise IncompatibleModelError(
                "model was trained with a different feature layout"
            )
        try:
            config = ForestConfig(**payload["config"])
            trees = payload["trees"]
        except (KeyError, TypeError) as exc:
            raise DeserializationError(f"model {path} is malformed: {exc}") from exc
        if not isinstance(trees, list) or not trees:
            raise DeserializationError(f"model {path} contains no trees")
        return cls(config, trees, payload.get("oob_score"))


def train(X, y, config: ForestConfig = ForestConfig()) -> Forest:
    """Fit the ensemble with bootstrap sampling and an out-of-bag score.

    Each tree draws n rows with replacement using its own derived seed.
    Rows never drawn by a tree are that tree's out-of-bag set; the OOB
    score is the accuracy of tie-to-zero majority voting restricted, per
    row, to trees that did not train on it.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] != y.size:
        raise ArgumentError("X must be (n_rows, n_features) aligned with y")
    n = y.size
    if n == 0:
        raise DegenerateTrainingError("no training rows")
    if not set(np.unique(y)) <= {0, 1}:
        raise ArgumentError("labels must be 0 or 1")
    if len(np.unique(y)) < 2:
        raise DegenerateTrainingError("training data contains a single class")
    trees = []
    oob_pos = np.zeros(n, dtype=np.int64)
    oob_cnt = np.zeros(n, dtype=np.int64)
    for t in range(config.n_trees):
        rng = Rng(derive_seed(config.seed, ROLE_TREE, t))
        drawn = np.array([rng.below(n) for _ in range(n)], dtype=np.int64)
        tree = _grow(X, y, drawn, 0, config.max_depth)
        trees.append(tree)
        in_bag = np.zeros(n, dtype=bool)
        in_bag[drawn] = True
        for row_idx in np.nonzero(~in_bag)[0]:
            oob_pos[row_idx] += _tree_vote(tree, X[row_idx])
            oob_cnt[row_idx] += 1
    scored = oob_cnt > 0
    oob_score = None
    if scored.any():
        oob_labels = (2 * oob_pos[scored] > oob_cnt[scored]).astype(np.int64)
        oob_score = float(np.mean(oob_labels == y[scored]))
    return Forest(config, trees, oob_score)


def rebalance(labels, rng: Rng, keep_fraction: float = 0.5) -> np.ndarray:
    """Keep mask that drops negatives at random to raise the positive share.

    Positives are always kept; each negative independently survives with
    probability keep_fraction.  One uniform draw is consumed per negative
    row, in row order, so the mask is reproducible from the rng seed.
    """
    if not 0.0 <= keep_fraction <= 1.0:
        raise ArgumentError("keep_fraction must lie in [0, 1]")
    labels = np.asarray(labels, dtype=np.int64)
    keep = np.ones(labels.size, dtype=bool)
    for i, lab in enumerate(labels):
        if lab == 0 and not rng.uniform() < keep_fraction:
            keep[i] = False
    return keep


def rebalance_seed(seed: int) -> int:
    return derive_seed(seed, ROLE_REBALANCE)


def time_split(frame_ids, train_fraction: float = 0.8):
    """Chronological row split: first ceil(fraction * n_frames) frames train.

    Returns (train_idx, val_idx) row index arrays.  Keeping whole frames on
    one side avoids leaking near-duplicate rows across the boundary.
    """
    if not 0.0 < train_fraction <= 1.0:
        raise ArgumentError("train_fraction must lie in (0, 1]")
    frame_ids = np.asarray(frame_ids, dtype=np.int64)
    frames = np.unique(frame_ids)
    if frames.size == 0:
        raise DegenerateTrainingError("no rows to split")
    k = math.ceil(train_fraction * frames.size)
    cutoff = frames[k - 1]
    train_mask = frame_ids <= cutoff
    return np.nonzero(train_mask)[0], np.nonzero(~train_mask)[0]
