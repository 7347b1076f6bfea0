"""
Unpruned C4.5-style decision tree over numeric features.

Splits are binary (x <= threshold goes left), thresholds are midpoints
between consecutive distinct values, and the split with maximum gain ratio
wins. There is no pruning pass.
"""
from dataclasses import dataclass
from typing import Any, Dict, List, NamedTuple, Optional, Sequence

import numpy as np

from ..data.tables import Dataset
from ..utils.errors import TrainingError
from .base import ClassifierModel
from .config import ModelKind, TrainConfig

LEAF = -1
MIN_GAIN = 1e-12


class Split(NamedTuple):
    feature: int
    threshold: float
    gain_ratio: float
    gain: float


def _entropy(pos: np.ndarray, total: np.ndarray) -> np.ndarray:
    """Binary entropy in bits of `pos` positives out of `total`, elementwise."""
    p = np.divide(pos, total, out=np.zeros_like(pos, dtype=float), where=total > 0)
    q = 1.0 - p
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -(np.where(p > 0, p * np.log2(p), 0.0) + np.where(q > 0, q * np.log2(q), 0.0))
    return h


def best_split(
    X: np.ndarray,
    y: np.ndarray,
    features: Sequence[int],
    min_leaf_count: int = 1,
) -> Optional[Split]:
    """
    Maximum gain-ratio split over the candidate features.

    Both children must hold at least `min_leaf_count` rows. Ties keep the
    earliest candidate feature and, within a feature, the smallest threshold.

    Args:
        X: (n, d) feature matrix of the rows at the node
        y: Binary labels of those rows
        features: Candidate feature indices, in preference order
        min_leaf_count: Minimum rows per child

    Returns:
        The winning split, or None when no admissible split exists
    """
    n = len(y)
    if n < 2:
        return None
    y = np.asarray(y, dtype=float)
    parent_entropy = float(_entropy(np.array([y.sum()]), np.array([float(n)]))[0])
    n_left = np.arange(1, n, dtype=float)
    n_right = n - n_left

    best: Optional[Split] = None
    for f in features:
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        pos_left = np.cumsum(y[order])[:-1]
        pos_right = y.sum() - pos_left

        valid = (xs[1:] > xs[:-1]) & (n_left >= min_leaf_count) & (n_right >= min_leaf_count)
        if not valid.any():
            continue

        w_left = n_left / n
        w_right = n_right / n
        gain = parent_entropy - (w_left * _entropy(pos_left, n_left) + w_right * _entropy(pos_right, n_right))
        split_info = -(w_left * np.log2(w_left) + w_right * np.log2(w_right))
        ratio = np.where(valid, gain / split_info, -np.inf)

        i = int(np.argmax(ratio))
        if best is None or ratio[i] > best.gain_ratio:
            best = Split(int(f), float((xs[i] + xs[i + 1]) / 2.0), float(ratio[i]), float(gain[i]))
    return best


@dataclass
class TreeArrays:
    """Flat node arrays; node 0 is the root, leaves have feature == LEAF."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray

    @property
    def n_nodes(self) -> int:
        return int(len(self.feature))

    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for node in range(self.n_nodes):
            if self.feature[node] != LEAF:
                depth[self.left[node]] = depth[node] + 1
                depth[self.right[node]] = depth[node] + 1
        return int(depth.max())

    def leaf_of(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        active = self.feature[node] != LEAF
        while active.any():
            idx = np.flatnonzero(active)
            current = node[idx]
            go_left = X[idx, self.feature[current]] <= self.threshold[current]
            node[idx] = np.where(go_left, self.left[current], self.right[current])
            active[idx] = self.feature[node[idx]] != LEAF
        return node

    def proba(self, X: np.ndarray) -> np.ndarray:
        counts = self.counts[self.leaf_of(X)].astype(float)
        return counts / counts.sum(axis=1, keepdims=True)

    def to_state(self) -> Dict[str, List]:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "counts": self.counts.tolist(),
        }

    @classmethod
    def from_state(cls, state: Dict[str, List]) -> "TreeArrays":
        return cls(
            feature=np.asarray(state["feature"], dtype=np.int64),
            threshold=np.asarray(state["threshold"], dtype=float),
            left=np.asarray(state["left"], dtype=np.int64),
            right=np.asarray(state["right"], dtype=np.int64),
            counts=np.asarray(state["counts"], dtype=np.int64).reshape(-1, 2),
        )


def grow_tree(
    X: np.ndarray,
    y: np.ndarray,
    min_leaf_count: int = 2,
    features_per_split: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> TreeArrays:
    """
    Greedy top-down induction.

    A node becomes a leaf when it is pure, holds fewer than
    2 * min_leaf_count rows, or its best split has no information gain.
    With `features_per_split` below d, each node draws that many candidate
    features from `rng`.
    """
    n, d = X.shape
    y = np.asarray(y, dtype=np.int64)
    k = d if features_per_split is None else min(features_per_split, d)
    if k < d and rng is None:
        raise TrainingError("feature subsampling needs a random generator")

    feature: List[int] = [LEAF]
    threshold: List[float] = [0.0]
    left: List[int] = [LEAF]
    right: List[int] = [LEAF]
    counts: List[np.ndarray] = [np.bincount(y, minlength=2)]

    stack = [(0, np.arange(n))]
    while stack:
        node, rows = stack.pop()
        node_counts = counts[node]
        if node_counts.min() == 0 or len(rows) < 2 * min_leaf_count:
            continue

        if k < d:
            candidates = np.sort(rng.choice(d, size=k, replace=False))
        else:
            candidates = np.arange(d)
        split = best_split(X[rows], y[rows], candidates, min_leaf_count)
        if split is None or split.gain <= MIN_GAIN:
            continue

        go_left = X[rows, split.feature] <= split.threshold
        children = []
        for child_rows in (rows[go_left], rows[~go_left]):
            feature.append(LEAF)
            threshold.append(0.0)
            left.append(LEAF)
            right.append(LEAF)
            counts.append(np.bincount(y[child_rows], minlength=2))
            children.append((len(feature) - 1, child_rows))

        feature[node] = split.feature
        threshold[node] = split.threshold
        left[node] = children[0][0]
        right[node] = children[1][0]
        # right pushed first so the left subtree is expanded first
        stack.append(children[1])
        stack.append(children[0])

    return TreeArrays(
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=float),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        counts=np.vstack(counts).astype(np.int64),
    )


class DecisionTree(ClassifierModel):
    """Unpruned gain-ratio tree ("J48" in the study's tooling)."""

    kind = ModelKind.TREE

    def __init__(self, arrays: TreeArrays, **header):
        super().__init__(**header)
        self.arrays = arrays

    def _predict_proba(self, X: np.ndarray) -> np.ndarray:
        return self.arrays.proba(X)

    def describe(self) -> Dict[str, Any]:
        return {**super().describe(), "nodes": self.arrays.n_nodes, "depth": self.arrays.depth()}

    def state_dict(self) -> Dict[str, Any]:
        return self.arrays.to_state()

    @classmethod
    def from_state(cls, header: Dict[str, Any], state: Dict[str, Any]) -> "DecisionTree":
        return cls(TreeArrays.from_state(state), **header)


def fit_tree(train: Dataset, cfg: Optional[TrainConfig] = None, seed: Optional[int] = None) -> DecisionTree:
    """
    Fit an unpruned gain-ratio tree on every feature.

    Args:
        train: Training dataset
        cfg: Training configuration (tree.min_leaf_count is used)
        seed: Seed recorded with the model (defaults to cfg.seed)

    Returns:
        Trained DecisionTree
    """
    cfg = cfg or TrainConfig()
    seed = cfg.seed if seed is None else seed
    arrays = grow_tree(train.features, train.labels, min_leaf_count=cfg.tree.min_leaf_count)
    model = DecisionTree(
        arrays,
        n_features=train.d,
        train_seed=seed,
        schema_fingerprint=train.schema_fingerprint,
        hyperparameters=cfg.params_for(ModelKind.TREE),
    )
    model.logger.info(f"Grew tree with {arrays.n_nodes} nodes (depth {arrays.depth()}) on {train.n} rows")
    return model
