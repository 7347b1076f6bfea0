"""
Seeded train/test partitioning.
"""
from typing import Tuple, TypeVar, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..utils.errors import DataError
from .tables import Dataset, LabeledTable

TableT = TypeVar("TableT", Dataset, LabeledTable)


class SplitSpec(BaseModel):
    """Train fraction and seed of a random partition."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    train_fraction: float = Field(default=0.6, gt=0.0, lt=1.0)
    seed: int = Field(default=0, ge=0)
    stratified: bool = False


def round_half_up(value: float) -> int:
    return int(np.floor(value + 0.5))


def split_indices(labels: np.ndarray, spec: SplitSpec) -> Tuple[np.ndarray, np.ndarray]:
    """
    Positions of the train and test partitions.

    Unstratified mode draws exactly round(train_fraction * n) training rows
    uniformly without replacement. Stratified mode rounds per class.
    """
    n = int(len(labels))
    if n < 2:
        raise DataError(f"need at least 2 rows to split, got {n}")
    rng = np.random.default_rng(spec.seed)

    if not spec.stratified:
        n_train = round_half_up(spec.train_fraction * n)
        if n_train == 0 or n_train == n:
            raise DataError(f"train_fraction {spec.train_fraction} leaves an empty partition for n={n}")
        order = rng.permutation(n)
        return np.sort(order[:n_train]), np.sort(order[n_train:])

    train_parts, test_parts = [], []
    for cls in np.unique(labels):
        members = np.flatnonzero(labels == cls)
        members = members[rng.permutation(len(members))]
        n_train = round_half_up(spec.train_fraction * len(members))
        train_parts.append(members[:n_train])
        test_parts.append(members[n_train:])
    train_idx = np.sort(np.concatenate(train_parts))
    test_idx = np.sort(np.concatenate(test_parts))
    if len(train_idx) == 0 or len(test_idx) == 0:
        raise DataError(f"train_fraction {spec.train_fraction} leaves an empty partition for n={n}")
    return train_idx, test_idx


def split(ds: Union[Dataset, LabeledTable], spec: SplitSpec) -> Tuple:
    """
    Partition a dataset into (train, test).

    Same (ds, spec) always yields the same membership; rows keep their
    relative order inside each partition.
    """
    train_idx, test_idx = split_indices(np.asarray(ds.labels), spec)
    if isinstance(ds, Dataset):
        return ds.subset(train_idx), ds.subset(test_idx)
    return ds.take(train_idx), ds.take(test_idx)
