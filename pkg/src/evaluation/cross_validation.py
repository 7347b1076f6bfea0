"""
Seeded k-fold cross-validation with pooled-confusion aggregation.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from ..data.tables import Dataset
from ..models.config import ModelKind, TrainConfig
from ..models.registry import fit_model
from ..utils.errors import EvaluationError
from ..utils.logging import get_logger
from ..utils.seeding import derive_seed, make_rng
from .metrics import ConfusionMatrix, MetricsReport, evaluate, prf

logger = get_logger("evaluation.cv")


def fold_indices(n: int, k: int, seed: int) -> List[np.ndarray]:
    """
    Shuffle 0..n-1 and cut it into k near-equal folds.

    Fold sizes differ by at most one and the folds partition the rows.
    """
    if k < 2:
        raise EvaluationError(f"k must be at least 2, got {k}")
    if k > n:
        raise EvaluationError(f"cannot make {k} folds from {n} rows")
    order = make_rng(seed, "cv", "shuffle").permutation(n)
    return [np.sort(part) for part in np.array_split(order, k)]


@dataclass(frozen=True)
class CvResult:
    kind: ModelKind
    k: int
    seed: int
    fold_confusions: Tuple[ConfusionMatrix, ...]
    fold_reports: Tuple[MetricsReport, ...]

    @property
    def pooled(self) -> ConfusionMatrix:
        total = self.fold_confusions[0]
        for cm in self.fold_confusions[1:]:
            total = total + cm
        return total

    @property
    def aggregate(self) -> MetricsReport:
        """Metrics of the summed fold confusion matrices."""
        return prf(self.pooled)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind.value,
            "k": self.k,
            "seed": self.seed,
            "aggregation": "pooled_confusion",
            "pooled_confusion": self.pooled.to_list(),
            "aggregate": self.aggregate.to_dict(),
            "folds": [
                {"confusion": cm.to_list(), "metrics": report.to_dict()}
                for cm, report in zip(self.fold_confusions, self.fold_reports)
            ],
        }

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "CvResult":
        return cls(
            kind=ModelKind(payload["kind"]),
            k=int(payload["k"]),
            seed=int(payload["seed"]),
            fold_confusions=tuple(ConfusionMatrix.from_list(f["confusion"]) for f in payload["folds"]),
            fold_reports=tuple(MetricsReport.from_dict(f["metrics"]) for f in payload["folds"]),
        )


def cross_validate(
    kind: Union[ModelKind, str],
    ds: Dataset,
    k: int = 10,
    seed: int = 0,
    cfg: Optional[TrainConfig] = None,
    threads: int = 1,
) -> CvResult:
    """
    Train on k-1 folds, evaluate on the held-out fold, k times.

    Args:
        kind: Model kind to cross-validate
        ds: Dataset to partition into folds
        k: Number of folds
        seed: Seed for the shuffle and per-fold training seeds
        cfg: Training configuration
        threads: Folds evaluated concurrently

    Returns:
        CvResult with folds in index order
    """
    kind = ModelKind(kind)
    folds = fold_indices(ds.n, k, seed)
    all_rows = np.arange(ds.n)

    def run_fold(i: int) -> Tuple[ConfusionMatrix, MetricsReport]:
        train_rows = np.setdiff1d(all_rows, folds[i], assume_unique=True)
        model = fit_model(kind, ds.subset(train_rows), cfg, seed=derive_seed(seed, "cv", kind.value, i))
        return evaluate(model, ds.subset(folds[i]))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_fold, range(k)))
    else:
        results = [run_fold(i) for i in range(k)]

    result = CvResult(
        kind=kind,
        k=k,
        seed=seed,
        fold_confusions=tuple(cm for cm, _ in results),
        fold_reports=tuple(report for _, report in results),
    )
    logger.info(f"{k}-fold CV of {kind.value}: weighted F1 {result.aggregate.weighted_f1:.4f}")
    return result
