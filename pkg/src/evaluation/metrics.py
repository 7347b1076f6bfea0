"""
Confusion matrices and precision / recall / F1 for the binary IDS task.
"""
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from ..data.tables import BENIGN, MALICIOUS, Dataset
from ..utils.errors import EvaluationError

METRIC_KEYS = (
    "precision_0",
    "recall_0",
    "f1_0",
    "precision_1",
    "recall_1",
    "f1_1",
    "weighted_precision",
    "weighted_recall",
    "weighted_f1",
    "support_0",
    "support_1",
)


@dataclass(frozen=True)
class ConfusionMatrix:
    """counts[actual][predicted], Benign = 0, Malicious = 1."""

    counts: Tuple[Tuple[int, int], Tuple[int, int]]

    def __post_init__(self):
        array = np.asarray(self.counts, dtype=np.int64)
        if array.shape != (2, 2):
            raise EvaluationError(f"confusion matrix must be 2 x 2, got shape {array.shape}")
        if (array < 0).any():
            raise EvaluationError("confusion counts must be non-negative")
        object.__setattr__(self, "counts", tuple(tuple(int(v) for v in row) for row in array))

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=np.int64)

    @property
    def total(self) -> int:
        return int(self.array.sum())

    def tp(self, cls: int) -> int:
        return self.counts[cls][cls]

    def fp(self, cls: int) -> int:
        return self.counts[1 - cls][cls]

    def fn(self, cls: int) -> int:
        return self.counts[cls][1 - cls]

    def tn(self, cls: int) -> int:
        return self.counts[1 - cls][1 - cls]

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(tuple(map(tuple, self.array + other.array)))

    def to_list(self) -> List[List[int]]:
        return [list(row) for row in self.counts]

    @classmethod
    def from_list(cls, rows) -> "ConfusionMatrix":
        return cls(tuple(tuple(int(v) for v in row) for row in rows))


def confusion(y_true: np.ndarray, y_pred: np.ndarray) -> ConfusionMatrix:
    """
    Count (actual, predicted) pairs.

    Raises:
        EvaluationError: length mismatch or a label outside {0, 1}
    """
    y_true = np.asarray(y_true).reshape(-1)
    y_pred = np.asarray(y_pred).reshape(-1)
    if len(y_true) != len(y_pred):
        raise EvaluationError(f"y_true has {len(y_true)} labels but y_pred has {len(y_pred)}")
    for name, y in (("y_true", y_true), ("y_pred", y_pred)):
        if not np.isin(y, (BENIGN, MALICIOUS)).all():
            raise EvaluationError(f"{name} contains labels outside {{0, 1}}")
    counts = np.bincount(2 * y_true.astype(np.int64) + y_pred.astype(np.int64), minlength=4).reshape(2, 2)
    return ConfusionMatrix(tuple(map(tuple, counts)))


def _ratio(num: float, den: float) -> float:
    return float(num) / float(den) if den > 0 else 0.0


@dataclass(frozen=True)
class MetricsReport:
    """
    Per-class, support-weighted and macro precision / recall / F1.

    Zero-denominator metrics are 0. With no support at all the weighted
    averages are 0 as well.
    """

    precision: Tuple[float, float]
    recall: Tuple[float, float]
    f1: Tuple[float, float]
    support: Tuple[int, int]

    def _weighted(self, values: Tuple[float, float]) -> float:
        total = sum(self.support)
        if total == 0:
            return 0.0
        return (values[0] * self.support[0] + values[1] * self.support[1]) / total

    @property
    def weighted_precision(self) -> float:
        return self._weighted(self.precision)

    @property
    def weighted_recall(self) -> float:
        return self._weighted(self.recall)

    @property
    def weighted_f1(self) -> float:
        return self._weighted(self.f1)

    @property
    def macro_precision(self) -> float:
        return (self.precision[0] + self.precision[1]) / 2.0

    @property
    def macro_recall(self) -> float:
        return (self.recall[0] + self.recall[1]) / 2.0

    @property
    def macro_f1(self) -> float:
        return (self.f1[0] + self.f1[1]) / 2.0

    def to_dict(self) -> Dict[str, float]:
        out: Dict[str, float] = {}
        for cls in (0, 1):
            out[f"precision_{cls}"] = self.precision[cls]
            out[f"recall_{cls}"] = self.recall[cls]
            out[f"f1_{cls}"] = self.f1[cls]
            out[f"support_{cls}"] = self.support[cls]
        out.update(
            weighted_precision=self.weighted_precision,
            weighted_recall=self.weighted_recall,
            weighted_f1=self.weighted_f1,
            macro_precision=self.macro_precision,
            macro_recall=self.macro_recall,
            macro_f1=self.macro_f1,
        )
        return out

    @classmethod
    def from_dict(cls, payload: Dict[str, float]) -> "MetricsReport":
        return cls(
            precision=(payload["precision_0"], payload["precision_1"]),
            recall=(payload["recall_0"], payload["recall_1"]),
            f1=(payload["f1_0"], payload["f1_1"]),
            support=(int(payload["support_0"]), int(payload["support_1"])),
        )


def prf(cm: ConfusionMatrix) -> MetricsReport:
    """
    Precision, recall and F1 with each class in turn treated as positive.

    Args:
        cm: Confusion matrix

    Returns:
        MetricsReport; weighted averages use actual-class supports
    """
    precision, recall, f1 = [], [], []
    for cls in (BENIGN, MALICIOUS):
        p = _ratio(cm.tp(cls), cm.tp(cls) + cm.fp(cls))
        r = _ratio(cm.tp(cls), cm.tp(cls) + cm.fn(cls))
        precision.append(p)
        recall.append(r)
        f1.append(_ratio(2.0 * p * r, p + r))
    support = (cm.tp(BENIGN) + cm.fn(BENIGN), cm.tp(MALICIOUS) + cm.fn(MALICIOUS))
    return MetricsReport(tuple(precision), tuple(recall), tuple(f1), support)


def evaluate(model, ds: Dataset) -> Tuple[ConfusionMatrix, MetricsReport]:
    """Predict on a dataset and score the predictions against its labels."""
    cm = confusion(ds.labels, model.predict(ds))
    return cm, prf(cm)
