"""
Base classifier class for AML IDS Lab.
"""
from abc import ABC, abstractmethod
from typing import Any, ClassVar, Dict, Optional, Union

import numpy as np

from ..data.tables import Dataset
from ..utils.errors import SchemaMismatchError
from ..utils.logging import get_logger
from .config import ModelKind

ArrayOrDataset = Union[np.ndarray, Dataset]


class ClassifierModel(ABC):
    """
    Abstract base class for every trained victim or surrogate.

    Subclasses implement `_predict_proba` on a validated (n, d) matrix and
    the state (de)serialization hooks; everything shared (dimension and
    schema checks, the tie rule, provenance) lives here.
    """

    kind: ClassVar[ModelKind]

    def __init__(
        self,
        n_features: int,
        train_seed: int = 0,
        schema_fingerprint: Optional[str] = None,
        hyperparameters: Optional[Dict[str, Any]] = None,
        provenance: Optional[Dict[str, Any]] = None,
    ):
        """
        Initialize the shared model header.

        Args:
            n_features: Input dimension d
            train_seed: Seed the model was trained with
            schema_fingerprint: Fingerprint of the FeatureSchema of the training data
            hyperparameters: Hyperparameters used for training
            provenance: Free-form training provenance (e.g. augmentation source)
        """
        self.n_features = int(n_features)
        self.train_seed = int(train_seed)
        self.schema_fingerprint = schema_fingerprint
        self.hyperparameters = dict(hyperparameters or {})
        self.provenance = dict(provenance or {})
        self.logger = get_logger(f"models.{self.kind.value}")

    @abstractmethod
    def _predict_proba(self, X: np.ndarray) -> np.ndarray:
        """Class probabilities for a validated (n, d) matrix."""
        pass

    @abstractmethod
    def state_dict(self) -> Dict[str, Any]:
        """Learned state as JSON-compatible values."""
        pass

    @classmethod
    @abstractmethod
    def from_state(cls, header: Dict[str, Any], state: Dict[str, Any]) -> "ClassifierModel":
        """Rebuild a model from its header fields and `state_dict()` output."""
        pass

    def describe(self) -> Dict[str, Any]:
        """Short structural summary for reports."""
        return {"kind": self.kind.value, "n_features": self.n_features}

    def header(self) -> Dict[str, Any]:
        return {
            "n_features": self.n_features,
            "train_seed": self.train_seed,
            "schema_fingerprint": self.schema_fingerprint,
            "hyperparameters": self.hyperparameters,
            "provenance": self.provenance,
        }

    def check_schema(self, fingerprint: Optional[str]) -> None:
        """Reject inputs produced under a different feature schema."""
        if fingerprint is None or self.schema_fingerprint is None:
            return
        if fingerprint != self.schema_fingerprint:
            raise SchemaMismatchError(
                f"{self.kind.value} model was trained on schema {self.schema_fingerprint[:12]}, "
                f"input uses {fingerprint[:12]}"
            )

    def _validate_input(self, X: ArrayOrDataset) -> np.ndarray:
        if isinstance(X, Dataset):
            self.check_schema(X.schema_fingerprint)
            X = X.features
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise SchemaMismatchError(
                f"{self.kind.value} model expects {self.n_features} features, got shape {X.shape}"
            )
        return X

    def predict_proba(self, X: ArrayOrDataset) -> np.ndarray:
        """
        Class probabilities, one row per input.

        Args:
            X: (n, d) matrix, single d-vector, or Dataset

        Returns:
            (n, 2) matrix of non-negative rows summing to 1
        """
        return self._predict_proba(self._validate_input(X))

    def predict(self, X: ArrayOrDataset) -> np.ndarray:
        """Argmax labels; an exact probability tie goes to class 0 (benign)."""
        proba = self.predict_proba(X)
        return (proba[:, 1] > proba[:, 0]).astype(np.int64)