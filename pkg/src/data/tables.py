"""
Tabular value types shared by every pipeline stage.

All three types are frozen dataclasses over read-only numpy arrays, so a value
can be handed to worker threads without copying.
"""
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np
import pandas as pd

from ..utils.errors import DataError, SchemaMismatchError

BENIGN = 0
MALICIOUS = 1
CLASS_NAMES = {BENIGN: "benign", MALICIOUS: "malicious"}
LABEL_COLUMN = "label"


def _frozen(array: np.ndarray, dtype) -> np.ndarray:
    out = np.array(array, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class RawTable:
    """Raw readings as parsed from CSV, labels still verbatim scenario tags."""

    feature_names: Tuple[str, ...]
    rows: np.ndarray
    raw_labels: Tuple[str, ...]
    provenance: Tuple[Tuple[str, str], ...] = ()

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=float)
        if rows.ndim != 2:
            raise DataError(f"rows must be a 2-D matrix, got {rows.ndim} dimensions")
        if rows.shape[1] != len(self.feature_names):
            raise DataError(
                f"rows have {rows.shape[1]} columns but {len(self.feature_names)} feature names"
            )
        if rows.shape[0] != len(self.raw_labels):
            raise DataError(f"{rows.shape[0]} rows but {len(self.raw_labels)} labels")
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "raw_labels", tuple(str(tag) for tag in self.raw_labels))
        object.__setattr__(self, "rows", _frozen(rows, float))

    @property
    def n(self) -> int:
        return int(self.rows.shape[0])

    @property
    def d(self) -> int:
        return int(self.rows.shape[1])

    def with_provenance(self, key: str, value: str) -> Tuple[Tuple[str, str], ...]:
        return tuple(self.provenance) + ((key, value),)


@dataclass(frozen=True)
class LabeledTable:
    """Sanitized raw readings with binary labels, not yet normalized."""

    feature_names: Tuple[str, ...]
    rows: np.ndarray
    labels: np.ndarray
    provenance: Tuple[Tuple[str, str], ...] = ()

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=float)
        labels = np.asarray(self.labels)
        if rows.ndim != 2 or rows.shape[1] != len(self.feature_names):
            raise DataError("row matrix does not match feature names")
        if labels.shape != (rows.shape[0],):
            raise DataError(f"expected {rows.shape[0]} labels, got shape {labels.shape}")
        if labels.size and not np.isin(labels, (BENIGN, MALICIOUS)).all():
            raise DataError("labels must be 0 (benign) or 1 (malicious)")
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "rows", _frozen(rows, float))
        object.__setattr__(self, "labels", _frozen(labels, np.int64))

    @property
    def n(self) -> int:
        return int(self.rows.shape[0])

    @property
    def d(self) -> int:
        return int(self.rows.shape[1])

    def take(self, indices: np.ndarray) -> "LabeledTable":
        indices = np.asarray(indices, dtype=np.int64)
        return LabeledTable(self.feature_names, self.rows[indices], self.labels[indices], self.provenance)


@dataclass(frozen=True)
class Dataset:
    """
    Normalized feature matrix plus binary labels.

    Every feature value is finite and lies in [0, 1]; `schema_fingerprint`
    ties the matrix to the FeatureSchema that produced it.
    """

    features: np.ndarray
    labels: np.ndarray
    feature_names: Tuple[str, ...] = ()
    schema_fingerprint: Optional[str] = None
    row_ids: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        features = np.asarray(self.features, dtype=float)
        labels = np.asarray(self.labels)
        if features.ndim != 2:
            raise DataError(f"features must be a 2-D matrix, got {features.ndim} dimensions")
        n, d = features.shape
        if n == 0 or d == 0:
            raise DataError(f"dataset must be non-empty, got shape {features.shape}")
        if labels.shape != (n,):
            raise DataError(f"expected {n} labels, got shape {labels.shape}")
        if not np.isfinite(features).all():
            raise DataError("dataset features must be finite")
        if features.min() < 0.0 or features.max() > 1.0:
            raise DataError("dataset features must lie in [0, 1]")
        if not np.isin(labels, (BENIGN, MALICIOUS)).all():
            raise DataError("labels must be 0 (benign) or 1 (malicious)")
        names = tuple(self.feature_names) or tuple(f"f{i}" for i in range(d))
        if len(names) != d:
            raise DataError(f"{len(names)} feature names for {d} columns")
        row_ids = np.arange(n) if self.row_ids is None else np.asarray(self.row_ids)
        if row_ids.shape != (n,):
            raise DataError("row_ids must have one entry per row")
        object.__setattr__(self, "features", _frozen(features, float))
        object.__setattr__(self, "labels", _frozen(labels, np.int64))
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "row_ids", _frozen(row_ids, np.int64))

    @property
    def n(self) -> int:
        return int(self.features.shape[0])

    @property
    def d(self) -> int:
        return int(self.features.shape[1])

    def subset(self, indices: np.ndarray) -> "Dataset":
        """Rows at the given positions, keeping their row identities."""
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(
            features=self.features[indices],
            labels=self.labels[indices],
            feature_names=self.feature_names,
            schema_fingerprint=self.schema_fingerprint,
            row_ids=self.row_ids[indices],
        )

    def concat(self, other: "Dataset") -> "Dataset":
        """Append another dataset with the same schema."""
        if other.d != self.d or other.schema_fingerprint != self.schema_fingerprint:
            raise SchemaMismatchError(
                f"cannot concatenate datasets with schemas "
                f"{self.schema_fingerprint}/{self.d} and {other.schema_fingerprint}/{other.d}"
            )
        return Dataset(
            features=np.vstack([self.features, other.features]),
            labels=np.concatenate([self.labels, other.labels]),
            feature_names=self.feature_names,
            schema_fingerprint=self.schema_fingerprint,
            row_ids=np.concatenate([self.row_ids, other.row_ids]),
        )

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.features, columns=list(self.feature_names))
        frame[LABEL_COLUMN] = self.labels
        frame.insert(0, "row_id", self.row_ids)
        return frame


def class_distribution(ds: Union[Dataset, LabeledTable]) -> Dict[str, int]:
    """
    Count rows per class.

    Args:
        ds: Dataset or labeled table

    Returns:
        {"benign": count, "malicious": count}; the counts sum to n
    """
    counts = np.bincount(np.asarray(ds.labels, dtype=np.int64), minlength=2)
    return {CLASS_NAMES[BENIGN]: int(counts[BENIGN]), CLASS_NAMES[MALICIOUS]: int(counts[MALICIOUS])}


def save_dataset(ds: Dataset, path: Union[str, Path]) -> None:
    """Write a dataset as CSV (row_id, features..., label) at full float precision."""
    ds.to_frame().to_csv(path, index=False, float_format="%.17g")


def load_dataset(path: Union[str, Path], schema_fingerprint: Optional[str] = None) -> Dataset:
    """Read a dataset written by `save_dataset`."""
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DataError(f"cannot read dataset: {e}", path=str(path)) from e
    if LABEL_COLUMN not in frame.columns or "row_id" not in frame.columns:
        raise DataError("dataset file lacks row_id/label columns", path=str(path))
    feature_names = [c for c in frame.columns if c not in ("row_id", LABEL_COLUMN)]
    return Dataset(
        features=frame[feature_names].to_numpy(dtype=float),
        labels=frame[LABEL_COLUMN].to_numpy(dtype=np.int64),
        feature_names=tuple(feature_names),
        schema_fingerprint=schema_fingerprint,
        row_ids=frame["row_id"].to_numpy(dtype=np.int64),
    )
