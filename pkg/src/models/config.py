"""
Hyperparameters for every classifier kind.
"""
import math
from enum import Enum
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field


class ModelKind(str, Enum):
    TREE = "tree"
    FOREST = "forest"
    ZERO_R = "zero_r"
    NAIVE_BAYES = "naive_bayes"
    MLP = "mlp"


class TreeParams(BaseModel):
    """Unpruned gain-ratio tree; forests reuse these leaf settings."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    min_leaf_count: int = Field(default=2, ge=1)
    pruning: Literal[False] = False


class ForestParams(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    n_trees: int = Field(default=100, ge=1)
    features_per_split: Optional[int] = Field(default=None, ge=1, description="default floor(log2 d) + 1")
    bootstrap: bool = True

    def resolve_features_per_split(self, d: int) -> int:
        if self.features_per_split is not None:
            return min(self.features_per_split, d)
        return min(int(math.floor(math.log2(d))) + 1, d)


class MlpParams(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    hidden: int = Field(default=128, ge=1)
    learning_rate: float = Field(default=0.01, gt=0.0)
    epochs: int = Field(default=50, ge=0)
    batch_size: int = Field(default=64, ge=1)


class NaiveBayesParams(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    var_floor: float = Field(default=1e-9, gt=0.0)


class TrainConfig(BaseModel):
    """Per-model hyperparameters plus the shared training seed."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    tree: TreeParams = TreeParams()
    forest: ForestParams = ForestParams()
    mlp: MlpParams = MlpParams()
    naive_bayes: NaiveBayesParams = NaiveBayesParams()
    seed: int = Field(default=0, ge=0)

    def params_for(self, kind: ModelKind) -> dict:
        """Hyperparameters relevant to one model kind, as recorded in model files."""
        if kind is ModelKind.TREE:
            return self.tree.model_dump()
        if kind is ModelKind.FOREST:
            return {**self.forest.model_dump(), **self.tree.model_dump()}
        if kind is ModelKind.MLP:
            return self.mlp.model_dump()
        if kind is ModelKind.NAIVE_BAYES:
            return self.naive_bayes.model_dump()
        return {}
