"""
Min-max feature scaling to the unit interval.
"""
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np

from ..utils.errors import DataError, ModelFormatError, SchemaMismatchError
from .tables import Dataset, LabeledTable

SCHEMA_FORMAT = "aml-ids-lab/feature-schema"
SCHEMA_VERSION = 1


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered feature names with per-feature (min, max) fitted on training rows."""

    feature_names: Tuple[str, ...]
    mins: Tuple[float, ...]
    maxes: Tuple[float, ...]
    degenerate: Tuple[bool, ...]

    def __post_init__(self):
        d = len(self.feature_names)
        if d == 0:
            raise DataError("feature schema must have at least one feature")
        if len(set(self.feature_names)) != d:
            raise DataError("feature names must be unique")
        if not (len(self.mins) == len(self.maxes) == len(self.degenerate) == d):
            raise DataError("schema statistics do not match the feature count")
        for name, low, high in zip(self.feature_names, self.mins, self.maxes):
            if not (np.isfinite(low) and np.isfinite(high)) or low > high:
                raise DataError("invalid min/max statistics", column=name)

    @property
    def d(self) -> int:
        return len(self.feature_names)

    @property
    def fingerprint(self) -> str:
        """SHA-256 over the canonical JSON of names and statistics."""
        payload = json.dumps(self._body(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def _body(self) -> Dict[str, Any]:
        return {
            "feature_names": list(self.feature_names),
            "mins": [float(v) for v in self.mins],
            "maxes": [float(v) for v in self.maxes],
            "degenerate": [bool(v) for v in self.degenerate],
        }

    def to_dict(self) -> Dict[str, Any]:
        return {"format": SCHEMA_FORMAT, "version": SCHEMA_VERSION, "fingerprint": self.fingerprint, **self._body()}

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "FeatureSchema":
        if payload.get("format") != SCHEMA_FORMAT:
            raise ModelFormatError(f"not a feature schema document: format={payload.get('format')!r}")
        if payload.get("version") != SCHEMA_VERSION:
            raise ModelFormatError(
                f"unsupported schema version {payload.get('version')!r}, expected {SCHEMA_VERSION}"
            )
        try:
            schema = cls(
                feature_names=tuple(payload["feature_names"]),
                mins=tuple(float(v) for v in payload["mins"]),
                maxes=tuple(float(v) for v in payload["maxes"]),
                degenerate=tuple(bool(v) for v in payload["degenerate"]),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ModelFormatError(f"malformed feature schema: {e}") from e
        if "fingerprint" in payload and payload["fingerprint"] != schema.fingerprint:
            raise ModelFormatError("feature schema fingerprint does not match its contents")
        return schema


def fit_normalizer(train: LabeledTable) -> FeatureSchema:
    """
    Fit per-feature min/max on the training partition.

    Constant columns are flagged degenerate; normalization maps them to 0.
    """
    if train.n == 0:
        raise DataError("cannot fit a normalizer on an empty table")
    if not np.isfinite(train.rows).all():
        raise DataError("training table must be sanitized before fitting the normalizer")
    mins = train.rows.min(axis=0)
    maxes = train.rows.max(axis=0)
    return FeatureSchema(
        feature_names=tuple(train.feature_names),
        mins=tuple(float(v) for v in mins),
        maxes=tuple(float(v) for v in maxes),
        degenerate=tuple(bool(v) for v in mins == maxes),
    )


def normalize(
    table: LabeledTable,
    schema: FeatureSchema,
    row_ids: Optional[np.ndarray] = None,
) -> Dataset:
    """
    Scale each value x to clamp((x - min) / (max - min), 0, 1).

    Args:
        table: Sanitized labeled table
        schema: Statistics fitted by `fit_normalizer`
        row_ids: Optional row identities (defaults to 0..n-1)

    Returns:
        Dataset bound to the schema fingerprint
    """
    if table.d != schema.d:
        raise SchemaMismatchError(f"table has {table.d} features, schema has {schema.d}")
    mins = np.asarray(schema.mins)
    spans = np.asarray(schema.maxes) - mins
    degenerate = np.asarray(schema.degenerate)
    safe_spans = np.where(degenerate, 1.0, spans)

    scaled = np.clip((table.rows - mins) / safe_spans, 0.0, 1.0)
    scaled[:, degenerate] = 0.0
    return Dataset(
        features=scaled,
        labels=table.labels,
        feature_names=schema.feature_names,
        schema_fingerprint=schema.fingerprint,
        row_ids=row_ids,
    )


def denormalize(features: np.ndarray, schema: FeatureSchema) -> np.ndarray:
    """Map unit-interval features back to raw units (degenerate columns return their constant)."""
    features = np.asarray(features, dtype=float)
    if features.shape[-1] != schema.d:
        raise SchemaMismatchError(f"matrix has {features.shape[-1]} features, schema has {schema.d}")
    mins = np.asarray(schema.mins)
    spans = np.asarray(schema.maxes) - mins
    return features * spans + mins


def save_schema(schema: FeatureSchema, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(schema.to_dict(), sort_keys=True, indent=2), encoding="utf-8")


def load_schema(path: Union[str, Path]) -> FeatureSchema:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ModelFormatError(f"cannot read feature schema {path}: {e}") from e
    return FeatureSchema.from_dict(payload)
