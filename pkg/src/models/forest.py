"""
Random forest of unpruned gain-ratio trees.
"""
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Dict, List, Optional

import numpy as np

from ..data.tables import Dataset
from ..utils.seeding import make_rng
from .base import ClassifierModel
from .config import ModelKind, TrainConfig
from .tree import TreeArrays, grow_tree


class RandomForest(ClassifierModel):
    """Majority vote over bootstrap-trained trees; probabilities are vote fractions."""

    kind = ModelKind.FOREST

    def __init__(self, trees: List[TreeArrays], **header):
        super().__init__(**header)
        self.trees = list(trees)

    def _predict_proba(self, X: np.ndarray) -> np.ndarray:
        votes = np.zeros(len(X), dtype=np.int64)
        for tree in self.trees:
            p = tree.proba(X)
            votes += (p[:, 1] > p[:, 0]).astype(np.int64)
        frac = votes / len(self.trees)
        return np.column_stack([1.0 - frac, frac])

    def describe(self) -> Dict[str, Any]:
        nodes = [t.n_nodes for t in self.trees]
        return {**super().describe(), "trees": len(self.trees), "mean_nodes": float(np.mean(nodes))}

    def state_dict(self) -> Dict[str, Any]:
        return {"trees": [t.to_state() for t in self.trees]}

    @classmethod
    def from_state(cls, header: Dict[str, Any], state: Dict[str, Any]) -> "RandomForest":
        return cls([TreeArrays.from_state(t) for t in state["trees"]], **header)


def fit_forest(
    train: Dataset,
    cfg: Optional[TrainConfig] = None,
    seed: Optional[int] = None,
    threads: int = 1,
) -> RandomForest:
    """
    Fit a random forest.

    Tree i draws its bootstrap sample and per-node candidate features from a
    generator seeded by (seed, i), so the result does not depend on
    `threads` or on completion order.

    Args:
        train: Training dataset
        cfg: Training configuration (forest and tree sections)
        seed: Forest seed (defaults to cfg.seed)
        threads: Worker threads used to grow trees

    Returns:
        Trained RandomForest
    """
    cfg = cfg or TrainConfig()
    seed = cfg.seed if seed is None else seed
    params = cfg.forest
    k = params.resolve_features_per_split(train.d)
    X, y = train.features, train.labels

    def grow(index: int) -> TreeArrays:
        rng = make_rng(seed, "forest", "tree", index)
        rows = rng.integers(0, train.n, size=train.n) if params.bootstrap else np.arange(train.n)
        return grow_tree(
            X[rows],
            y[rows],
            min_leaf_count=cfg.tree.min_leaf_count,
            features_per_split=k,
            rng=rng,
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trees = list(pool.map(grow, range(params.n_trees)))
    else:
        trees = [grow(i) for i in range(params.n_trees)]

    model = RandomForest(
        trees,
        n_features=train.d,
        train_seed=seed,
        schema_fingerprint=train.schema_fingerprint,
        hyperparameters={**cfg.params_for(ModelKind.FOREST), "features_per_split": k},
    )
    model.logger.info(f"Grew {len(trees)} trees ({k} candidate features per split) on {train.n} rows")
    return model
