"""
Parameter sweeps: transfer of surrogate-crafted samples across a (theta, gamma)
grid or an epsilon axis.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from ..data.tables import BENIGN, Dataset
from ..evaluation.metrics import ConfusionMatrix, confusion, prf
from ..models.base import ClassifierModel
from ..models.mlp import MlpSurrogate
from ..utils.errors import AttackError
from ..utils.logging import get_logger
from .config import AttackConfig, Direction
from .crafting import AdversarialSet, craft_adversarial_testset, surrogate_flip_rate

DEFAULT_AXIS = tuple(round(0.1 * i, 1) for i in range(1, 10))
ALL_ROWS = "all"

logger = get_logger("attacks.sweep")


def _axis_key(value: float) -> str:
    return f"{value:g}"


@dataclass(frozen=True)
class SweepGrid:
    """
    Weighted F1 of one victim over a (theta, gamma) grid.

    Rows of `f1` follow `theta_values`, columns follow `gamma_values`.
    """

    victim: str
    theta_values: Tuple[float, ...]
    gamma_values: Tuple[float, ...]
    f1: np.ndarray
    confusions: Tuple[Tuple[ConfusionMatrix, ...], ...]
    flip_rates: np.ndarray
    baseline_f1: float
    baseline_confusion: ConfusionMatrix

    def __post_init__(self):
        shape = (len(self.theta_values), len(self.gamma_values))
        f1 = np.asarray(self.f1, dtype=float)
        flips = np.asarray(self.flip_rates, dtype=float)
        if f1.shape != shape or flips.shape != shape:
            raise AttackError(f"grid cells must have shape {shape}, got {f1.shape}")
        object.__setattr__(self, "theta_values", tuple(float(v) for v in self.theta_values))
        object.__setattr__(self, "gamma_values", tuple(float(v) for v in self.gamma_values))
        object.__setattr__(self, "f1", f1)
        object.__setattr__(self, "flip_rates", flips)

    @property
    def n_cells(self) -> int:
        return int(self.f1.size)

    @property
    def mean_f1(self) -> float:
        return float(self.f1.mean())

    def _index(self, theta: float, gamma: float) -> Tuple[int, int]:
        try:
            i = [_axis_key(v) for v in self.theta_values].index(_axis_key(theta))
            j = [_axis_key(v) for v in self.gamma_values].index(_axis_key(gamma))
        except ValueError as e:
            raise AttackError(f"cell ({theta}, {gamma}) is not on the grid") from e
        return i, j

    def cell(self, theta: float, gamma: float) -> float:
        i, j = self._index(theta, gamma)
        return float(self.f1[i, j])

    def confusion_at(self, theta: float, gamma: float) -> ConfusionMatrix:
        i, j = self._index(theta, gamma)
        return self.confusions[i][j]

    def worst_cell(self) -> Tuple[float, float, float]:
        """(theta, gamma, f1) of the lowest-F1 cell; the first one in row-major order on ties."""
        i, j = np.unravel_index(int(np.argmin(self.f1)), self.f1.shape)
        return self.theta_values[i], self.gamma_values[j], float(self.f1[i, j])

    def same_axes(self, other: "SweepGrid") -> bool:
        return self.theta_values == other.theta_values and self.gamma_values == other.gamma_values

    def to_frame(self, values: Optional[np.ndarray] = None) -> pd.DataFrame:
        """Heatmap matrix: index theta, columns gamma."""
        values = self.f1 if values is None else values
        return pd.DataFrame(
            values,
            index=pd.Index([_axis_key(v) for v in self.theta_values], name="theta"),
            columns=pd.Index([_axis_key(v) for v in self.gamma_values], name="gamma"),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "victim": self.victim,
            "theta_values": list(self.theta_values),
            "gamma_values": list(self.gamma_values),
            "f1": self.f1.tolist(),
            "flip_rates": self.flip_rates.tolist(),
            "confusions": [[cm.to_list() for cm in row] for row in self.confusions],
            "baseline_f1": self.baseline_f1,
            "baseline_confusion": self.baseline_confusion.to_list(),
        }

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "SweepGrid":
        return cls(
            victim=payload["victim"],
            theta_values=tuple(payload["theta_values"]),
            gamma_values=tuple(payload["gamma_values"]),
            f1=np.asarray(payload["f1"], dtype=float),
            confusions=tuple(
                tuple(ConfusionMatrix.from_list(cm) for cm in row) for row in payload["confusions"]
            ),
            flip_rates=np.asarray(payload["flip_rates"], dtype=float),
            baseline_f1=float(payload["baseline_f1"]),
            baseline_confusion=ConfusionMatrix.from_list(payload["baseline_confusion"]),
        )


def save_heatmap_csv(frame: pd.DataFrame, path: Union[str, Path]) -> None:
    frame.to_csv(path, float_format="%.17g")


def _row_mask(ds: Dataset, exclude_row_ids: Optional[np.ndarray]) -> np.ndarray:
    if exclude_row_ids is None:
        return np.ones(ds.n, dtype=bool)
    return ~np.isin(ds.row_ids, np.asarray(exclude_row_ids, dtype=np.int64))


def sweep_views(
    victims: Mapping[str, ClassifierModel],
    m: MlpSurrogate,
    test: Dataset,
    thetas: Sequence[float] = DEFAULT_AXIS,
    gammas: Sequence[float] = DEFAULT_AXIS,
    views: Optional[Mapping[str, Optional[np.ndarray]]] = None,
    direction: Direction = Direction.BOTH,
    target: int = BENIGN,
    seed: int = 0,
    threads: int = 1,
) -> Dict[str, Dict[str, SweepGrid]]:
    """
    Craft one adversarial set per cell and score every victim on it.

    Each view names a set of row ids left out of scoring (None keeps all
    rows), so several populations can be scored from the same crafted sets.

    Args:
        victims: Victim models by name
        m: Surrogate used to craft
        test: Clean test partition
        thetas: Feature-fraction axis
        gammas: Perturbation-size axis
        views: View name -> excluded row ids (defaults to a single "all" view)
        direction: JSMA direction mode
        target: Attack target class
        seed: Seed recorded in every AttackConfig
        threads: Cells crafted concurrently

    Returns:
        view -> victim -> SweepGrid
    """
    if not thetas or not gammas:
        raise AttackError("sweep axes must be non-empty")
    if not victims:
        raise AttackError("sweep needs at least one victim")
    views = {ALL_ROWS: None} if views is None else dict(views)
    masks = {name: _row_mask(test, excluded) for name, excluded in views.items()}
    cells = [(i, j) for i in range(len(thetas)) for j in range(len(gammas))]

    def run(cell: Tuple[int, int]):
        i, j = cell
        cfg = AttackConfig.jsma(thetas[i], gammas[j], direction=direction, target=target, seed=seed)
        adv = craft_adversarial_testset(m, test, cfg)
        predictions = {name: victim.predict(adv.data) for name, victim in victims.items()}
        flip = surrogate_flip_rate(m, adv)
        logger.debug(f"cell {cfg.label}: surrogate flip rate {flip:.3f}")
        return predictions, flip

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, cells))
    else:
        results = [run(cell) for cell in cells]

    clean = {name: victim.predict(test) for name, victim in victims.items()}
    shape = (len(thetas), len(gammas))
    out: Dict[str, Dict[str, SweepGrid]] = {}
    for view, mask in masks.items():
        labels = test.labels[mask]
        out[view] = {}
        for name in victims:
            cms: List[List[ConfusionMatrix]] = [[None] * shape[1] for _ in range(shape[0])]
            f1 = np.zeros(shape)
            flips = np.zeros(shape)
            for (i, j), (predictions, flip) in zip(cells, results):
                cm = confusion(labels, predictions[name][mask])
                cms[i][j] = cm
                f1[i, j] = prf(cm).weighted_f1
                flips[i, j] = flip
            baseline_cm = confusion(labels, clean[name][mask])
            out[view][name] = SweepGrid(
                victim=name,
                theta_values=tuple(thetas),
                gamma_values=tuple(gammas),
                f1=f1,
                confusions=tuple(tuple(row) for row in cms),
                flip_rates=flips,
                baseline_f1=prf(baseline_cm).weighted_f1,
                baseline_confusion=baseline_cm,
            )
    return out


def sweep(
    victims: Union[Mapping[str, ClassifierModel], Sequence[ClassifierModel]],
    m: MlpSurrogate,
    test: Dataset,
    thetas: Sequence[float] = DEFAULT_AXIS,
    gammas: Sequence[float] = DEFAULT_AXIS,
    **kwargs,
) -> Dict[str, SweepGrid]:
    """
    Weighted-F1 grid per victim over every (theta, gamma) pair.

    A list of victims is keyed by model kind.
    """
    if not isinstance(victims, Mapping):
        victims = {v.kind.value: v for v in victims}
    grids = sweep_views(victims, m, test, thetas, gammas, **kwargs)[ALL_ROWS]
    for name, grid in grids.items():
        theta, gamma, worst = grid.worst_cell()
        logger.info(
            f"{name}: clean F1 {grid.baseline_f1:.4f}, worst cell theta={theta:g} gamma={gamma:g} F1 {worst:.4f}"
        )
    return grids


@dataclass(frozen=True)
class FgsmCurve:
    """Weighted F1 of one victim along an epsilon axis."""

    victim: str
    epsilons: Tuple[float, ...]
    f1: Tuple[float, ...]
    flip_rates: Tuple[float, ...]
    baseline_f1: float

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {"f1": self.f1, "surrogate_flip_rate": self.flip_rates},
            index=pd.Index([_axis_key(e) for e in self.epsilons], name="epsilon"),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "victim": self.victim,
            "epsilons": list(self.epsilons),
            "f1": list(self.f1),
            "flip_rates": list(self.flip_rates),
            "baseline_f1": self.baseline_f1,
        }

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "FgsmCurve":
        return cls(
            victim=payload["victim"],
            epsilons=tuple(payload["epsilons"]),
            f1=tuple(payload["f1"]),
            flip_rates=tuple(payload["flip_rates"]),
            baseline_f1=float(payload["baseline_f1"]),
        )


def fgsm_sweep(
    victims: Mapping[str, ClassifierModel],
    m: MlpSurrogate,
    test: Dataset,
    epsilons: Sequence[float],
    seed: int = 0,
) -> Dict[str, FgsmCurve]:
    """Transfer of FGSM samples at each epsilon, one curve per victim."""
    if not epsilons:
        raise AttackError("epsilon axis must be non-empty")
    adv_sets: List[AdversarialSet] = [
        craft_adversarial_testset(m, test, AttackConfig.fgsm(eps, seed=seed)) for eps in epsilons
    ]
    flips = tuple(surrogate_flip_rate(m, adv) for adv in adv_sets)
    curves = {}
    for name, victim in victims.items():
        curves[name] = FgsmCurve(
            victim=name,
            epsilons=tuple(float(e) for e in epsilons),
            f1=tuple(prf(confusion(adv.labels, victim.predict(adv.data))).weighted_f1 for adv in adv_sets),
            flip_rates=flips,
            baseline_f1=prf(confusion(test.labels, victim.predict(test))).weighted_f1,
        )
    return curves
