"""
Model kind registry and training dispatcher.
"""
from typing import Callable, Dict, Optional, Type, Union

from ..data.tables import Dataset
from .base import ClassifierModel
from .baselines import GaussianNaiveBayes, ZeroR, fit_naive_bayes, fit_zero_r
from .config import ModelKind, TrainConfig
from .forest import RandomForest, fit_forest
from .mlp import MlpSurrogate, fit_mlp
from .tree import DecisionTree, fit_tree

MODEL_CLASSES: Dict[ModelKind, Type[ClassifierModel]] = {
    ModelKind.TREE: DecisionTree,
    ModelKind.FOREST: RandomForest,
    ModelKind.ZERO_R: ZeroR,
    ModelKind.NAIVE_BAYES: GaussianNaiveBayes,
    ModelKind.MLP: MlpSurrogate,
}

_FITTERS: Dict[ModelKind, Callable[..., ClassifierModel]] = {
    ModelKind.TREE: fit_tree,
    ModelKind.ZERO_R: fit_zero_r,
    ModelKind.NAIVE_BAYES: fit_naive_bayes,
    ModelKind.MLP: fit_mlp,
}


def fit_model(
    kind: Union[ModelKind, str],
    train: Dataset,
    cfg: Optional[TrainConfig] = None,
    seed: Optional[int] = None,
    threads: int = 1,
) -> ClassifierModel:
    """
    Train a model of the given kind.

    Args:
        kind: Model kind (enum or its string value)
        train: Training dataset
        cfg: Training configuration
        seed: Training seed (defaults to cfg.seed)
        threads: Worker threads; only the forest uses more than one

    Returns:
        Trained ClassifierModel
    """
    kind = ModelKind(kind)
    if kind is ModelKind.FOREST:
        return fit_forest(train, cfg, seed=seed, threads=threads)
    return _FITTERS[kind](train, cfg, seed=seed)
