"""
ZeroR and Gaussian Naive Bayes baselines.
"""
from typing import Any, Dict, Optional

import numpy as np

from ..data.tables import Dataset
from .base import ClassifierModel
from .config import ModelKind, TrainConfig


class ZeroR(ClassifierModel):
    """Predicts the training class prior for every input."""

    kind = ModelKind.ZERO_R

    def __init__(self, prior: np.ndarray, **header):
        super().__init__(**header)
        self.prior = np.asarray(prior, dtype=float)

    def _predict_proba(self, X: np.ndarray) -> np.ndarray:
        return np.tile(self.prior, (len(X), 1))

    def describe(self) -> Dict[str, Any]:
        return {**super().describe(), "prior": self.prior.tolist()}

    def state_dict(self) -> Dict[str, Any]:
        return {"prior": self.prior.tolist()}

    @classmethod
    def from_state(cls, header: Dict[str, Any], state: Dict[str, Any]) -> "ZeroR":
        return cls(np.asarray(state["prior"], dtype=float), **header)


def fit_zero_r(train: Dataset, cfg: Optional[TrainConfig] = None, seed: Optional[int] = None) -> ZeroR:
    cfg = cfg or TrainConfig()
    counts = np.bincount(train.labels, minlength=2).astype(float)
    return ZeroR(
        counts / counts.sum(),
        n_features=train.d,
        train_seed=cfg.seed if seed is None else seed,
        schema_fingerprint=train.schema_fingerprint,
    )


class GaussianNaiveBayes(ClassifierModel):
    """
    Independent per-feature Gaussian likelihoods with class priors.

    A class absent from the training data keeps prior 0 and never wins.
    """

    kind = ModelKind.NAIVE_BAYES

    def __init__(self, prior: np.ndarray, means: np.ndarray, variances: np.ndarray, **header):
        super().__init__(**header)
        self.prior = np.asarray(prior, dtype=float)
        self.means = np.asarray(means, dtype=float)
        self.variances = np.asarray(variances, dtype=float)

    def joint_log_likelihood(self, X: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore"):
            log_prior = np.log(self.prior)
        ll = -0.5 * (
            np.log(2.0 * np.pi * self.variances)[None, :, :]
            + (X[:, None, :] - self.means[None, :, :]) ** 2 / self.variances[None, :, :]
        ).sum(axis=2)
        return ll + log_prior[None, :]

    def _predict_proba(self, X: np.ndarray) -> np.ndarray:
        jll = self.joint_log_likelihood(X)
        jll = jll - jll.max(axis=1, keepdims=True)
        p = np.exp(jll)
        return p / p.sum(axis=1, keepdims=True)

    def state_dict(self) -> Dict[str, Any]:
        return {
            "prior": self.prior.tolist(),
            "means": self.means.tolist(),
            "variances": self.variances.tolist(),
        }

    @classmethod
    def from_state(cls, header: Dict[str, Any], state: Dict[str, Any]) -> "GaussianNaiveBayes":
        return cls(state["prior"], state["means"], state["variances"], **header)


def fit_naive_bayes(
    train: Dataset,
    cfg: Optional[TrainConfig] = None,
    seed: Optional[int] = None,
) -> GaussianNaiveBayes:
    """
    Fit per-class, per-feature means and variances.

    Variances are floored at `cfg.naive_bayes.var_floor` so constant
    features cannot produce a singular likelihood.
    """
    cfg = cfg or TrainConfig()
    X, y = train.features, train.labels
    counts = np.bincount(y, minlength=2).astype(float)
    means = np.zeros((2, train.d))
    variances = np.ones((2, train.d))
    for cls in (0, 1):
        members = X[y == cls]
        if len(members):
            means[cls] = members.mean(axis=0)
            variances[cls] = members.var(axis=0)
    variances = np.maximum(variances, cfg.naive_bayes.var_floor)
    return GaussianNaiveBayes(
        counts / counts.sum(),
        means,
        variances,
        n_features=train.d,
        train_seed=cfg.seed if seed is None else seed,
        schema_fingerprint=train.schema_fingerprint,
        hyperparameters=cfg.params_for(ModelKind.NAIVE_BAYES),
    )
