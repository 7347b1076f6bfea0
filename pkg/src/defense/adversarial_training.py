"""
Adversarial training defense.

A sample of crafted adversarial rows, labeled malicious, is appended to the
training partition; each victim is retrained from scratch and the attack
grid is re-run against adversarial sets crafted from the original test
partition.
"""
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator

from ..attacks.config import AttackConfig, Direction
from ..attacks.crafting import AdversarialSet, craft_adversarial_testset
from ..attacks.sweep import DEFAULT_AXIS, SweepGrid, sweep_views
from ..data.split import round_half_up
from ..data.tables import BENIGN, Dataset
from ..evaluation.cross_validation import CvResult, cross_validate
from ..models.base import ClassifierModel
from ..models.config import ModelKind, TrainConfig
from ..models.mlp import MlpSurrogate
from ..models.registry import fit_model
from ..utils.errors import AttackError
from ..utils.logging import get_logger
from ..utils.seeding import derive_seed, make_rng

Cell = Tuple[float, float]

# cells hand-picked in the power-system study
POWER_SYSTEM_CELLS: Dict[str, Cell] = {"forest": (0.2, 0.4), "tree": (0.1, 0.3)}

logger = get_logger("defense")


class DefenseConfig(BaseModel):
    """
    Sampling settings for adversarial training.

    Source cells per victim: `victim_cells[name]` if set, otherwise
    `source_cells` if set, otherwise the victim's worst grid cell.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    sample_fraction: float = Field(default=0.2, gt=0.0, le=1.0)
    source_cells: Optional[List[Cell]] = None
    victim_cells: Dict[str, Cell] = {}
    seed: int = Field(default=0, ge=0)

    @field_validator("source_cells")
    @classmethod
    def _non_empty(cls, value: Optional[List[Cell]]) -> Optional[List[Cell]]:
        if value is not None and len(value) == 0:
            raise ValueError("source_cells must not be empty")
        for theta, gamma in value or []:
            if not (0.0 < theta <= 1.0 and 0.0 < gamma <= 1.0):
                raise ValueError(f"source cell ({theta}, {gamma}) is outside (0, 1]")
        return value

    @field_validator("victim_cells")
    @classmethod
    def _known_victims(cls, value: Dict[str, Cell]) -> Dict[str, Cell]:
        kinds = {k.value for k in ModelKind if k is not ModelKind.MLP}
        for victim, (theta, gamma) in value.items():
            if victim not in kinds:
                raise ValueError(f"victim_cells names unknown victim '{victim}'")
            if not (0.0 < theta <= 1.0 and 0.0 < gamma <= 1.0):
                raise ValueError(f"cell ({theta}, {gamma}) for {victim} is outside (0, 1]")
        return value

    def cells_for(self, victim: str, grid: Optional[SweepGrid] = None) -> List[Cell]:
        if victim in self.victim_cells:
            return [tuple(self.victim_cells[victim])]
        if self.source_cells:
            return [tuple(c) for c in self.source_cells]
        if grid is None:
            raise AttackError(f"no source cell configured for {victim} and no grid to pick one from")
        theta, gamma, _ = grid.worst_cell()
        return [(theta, gamma)]


def sample_adversarial(adv: AdversarialSet, fraction: float, seed: int) -> Dataset:
    """
    Uniform seeded sample of round(fraction * perturbed) perturbed rows.

    The rows keep their original (malicious) labels and row ids; untouched
    rows are never sampled.

    Raises:
        AttackError: the fraction selects zero rows
    """
    perturbed = adv.perturbed_indices
    k = round_half_up(fraction * len(perturbed))
    if k == 0:
        raise AttackError(f"fraction {fraction} of {len(perturbed)} perturbed rows selects nothing")
    chosen = make_rng(seed, "defense", "sample").choice(perturbed, size=k, replace=False)
    return adv.data.subset(np.sort(chosen))


def adversarial_train(
    train: Dataset,
    augment: Optional[Dataset],
    kind: Union[ModelKind, str],
    cfg: Optional[TrainConfig] = None,
    seed: Optional[int] = None,
    threads: int = 1,
    provenance: Optional[Dict[str, Any]] = None,
) -> ClassifierModel:
    """
    Retrain a victim from scratch on train + augment.

    Args:
        train: Original training partition
        augment: Sampled adversarial rows (None trains on `train` alone)
        kind: Victim model kind
        cfg: Hyperparameters, identical to the original victim's
        seed: Training seed; defaults to one derived from cfg.seed
        threads: Worker threads for training
        provenance: Augmentation details stored with the model

    Returns:
        Retrained model carrying the augmentation provenance
    """
    kind = ModelKind(kind)
    cfg = cfg or TrainConfig()
    seed = derive_seed(cfg.seed, "adversarial_train", kind.value) if seed is None else seed
    data = train if augment is None else train.concat(augment)
    model = fit_model(kind, data, cfg, seed=seed, threads=threads)
    model.provenance.update(provenance or {})
    model.provenance["augmented_rows"] = 0 if augment is None else augment.n
    return model


@dataclass
class VictimDefense:
    """Before/after results for one victim."""

    victim: str
    source_cells: List[Cell]
    sampled_row_ids: List[int]
    pre_grid: SweepGrid
    post_grid: SweepGrid
    pre_inclusive: SweepGrid
    post_inclusive: SweepGrid
    cv_before: Optional[CvResult] = None
    cv_after: Optional[CvResult] = None

    @property
    def deltas(self) -> np.ndarray:
        """post - pre weighted F1 per cell, sampled rows excluded."""
        return self.post_grid.f1 - self.pre_grid.f1

    @property
    def mean_delta(self) -> float:
        return float(self.deltas.mean())

    @property
    def improved_fraction(self) -> float:
        return float(np.mean(self.deltas > 0))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "victim": self.victim,
            "source_cells": [list(c) for c in self.source_cells],
            "sampled_row_ids": list(self.sampled_row_ids),
            "pre_grid": self.pre_grid.to_dict(),
            "post_grid": self.post_grid.to_dict(),
            "pre_inclusive": self.pre_inclusive.to_dict(),
            "post_inclusive": self.post_inclusive.to_dict(),
            "deltas": self.deltas.tolist(),
            "mean_delta": self.mean_delta,
            "improved_fraction": self.improved_fraction,
            "cv_before": None if self.cv_before is None else self.cv_before.to_dict(),
            "cv_after": None if self.cv_after is None else self.cv_after.to_dict(),
        }

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "VictimDefense":
        return cls(
            victim=payload["victim"],
            source_cells=[tuple(c) for c in payload["source_cells"]],
            sampled_row_ids=list(payload["sampled_row_ids"]),
            pre_grid=SweepGrid.from_dict(payload["pre_grid"]),
            post_grid=SweepGrid.from_dict(payload["post_grid"]),
            pre_inclusive=SweepGrid.from_dict(payload["pre_inclusive"]),
            post_inclusive=SweepGrid.from_dict(payload["post_inclusive"]),
            cv_before=None if payload.get("cv_before") is None else CvResult.from_dict(payload["cv_before"]),
            cv_after=None if payload.get("cv_after") is None else CvResult.from_dict(payload["cv_after"]),
        )


@dataclass
class DefenseReport:
    victims: Dict[str, VictimDefense] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {"victims": {name: v.to_dict() for name, v in sorted(self.victims.items())}}

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "DefenseReport":
        return cls({name: VictimDefense.from_dict(v) for name, v in payload["victims"].items()})

    def heatmaps(self) -> Dict[str, pd.DataFrame]:
        """pre, post and delta heatmap frames keyed "<victim>_<tag>"."""
        frames = {}
        for name, v in sorted(self.victims.items()):
            frames[f"{name}_pre"] = v.pre_grid.to_frame()
            frames[f"{name}_post"] = v.post_grid.to_frame()
            frames[f"{name}_delta"] = v.pre_grid.to_frame(v.deltas)
        return frames


def evaluate_defense(
    before: Mapping[str, ClassifierModel],
    after: Mapping[str, ClassifierModel],
    m: MlpSurrogate,
    test: Dataset,
    thetas: Sequence[float] = DEFAULT_AXIS,
    gammas: Sequence[float] = DEFAULT_AXIS,
    sampled_row_ids: Optional[Mapping[str, Sequence[int]]] = None,
    source_cells: Optional[Mapping[str, List[Cell]]] = None,
    direction: Direction = Direction.BOTH,
    seed: int = 0,
    threads: int = 1,
) -> DefenseReport:
    """
    Re-run the grid for both model generations on the same adversarial sets.

    Headline ("unseen") grids leave out each victim's sampled rows; the
    inclusive grids score every test row.

    Args:
        before: Original victims by name
        after: Retrained victims, same names
        m: Surrogate used to craft
        test: Original clean test partition
        thetas: Feature-fraction axis
        gammas: Perturbation-size axis
        sampled_row_ids: Row ids each victim was augmented with
        source_cells: Cells each victim's sample came from
        direction: JSMA direction mode
        seed: Seed recorded in every AttackConfig
        threads: Cells crafted concurrently

    Returns:
        DefenseReport with one entry per victim
    """
    if set(before) != set(after):
        raise AttackError(f"victim sets differ: {sorted(before)} vs {sorted(after)}")
    sampled_row_ids = dict(sampled_row_ids or {})
    source_cells = dict(source_cells or {})

    models = {}
    for name in before:
        models[f"before:{name}"] = before[name]
        models[f"after:{name}"] = after[name]
    views: Dict[str, Optional[np.ndarray]] = {"inclusive": None}
    for name in before:
        views[f"unseen:{name}"] = np.asarray(sampled_row_ids.get(name, []), dtype=np.int64)

    grids = sweep_views(models, m, test, thetas, gammas, views=views, direction=direction, seed=seed, threads=threads)

    report = DefenseReport()
    for name in sorted(before):
        unseen = grids[f"unseen:{name}"]
        inclusive = grids["inclusive"]
        victim = VictimDefense(
            victim=name,
            source_cells=list(source_cells.get(name, [])),
            sampled_row_ids=[int(r) for r in sampled_row_ids.get(name, [])],
            pre_grid=_renamed(unseen[f"before:{name}"], name),
            post_grid=_renamed(unseen[f"after:{name}"], name),
            pre_inclusive=_renamed(inclusive[f"before:{name}"], name),
            post_inclusive=_renamed(inclusive[f"after:{name}"], name),
        )
        report.victims[name] = victim
        logger.info(
            f"{name}: mean grid F1 {victim.pre_grid.mean_f1:.4f} -> {victim.post_grid.mean_f1:.4f} "
            f"({victim.improved_fraction:.0%} of cells improved)"
        )
    return report


def _renamed(grid: SweepGrid, victim: str) -> SweepGrid:
    return SweepGrid(
        victim=victim,
        theta_values=grid.theta_values,
        gamma_values=grid.gamma_values,
        f1=grid.f1,
        confusions=grid.confusions,
        flip_rates=grid.flip_rates,
        baseline_f1=grid.baseline_f1,
        baseline_confusion=grid.baseline_confusion,
    )


def run_adversarial_training(
    victims: Mapping[str, ClassifierModel],
    m: MlpSurrogate,
    train: Dataset,
    test: Dataset,
    cfg: DefenseConfig,
    train_cfg: Optional[TrainConfig] = None,
    pre_grids: Optional[Mapping[str, SweepGrid]] = None,
    thetas: Sequence[float] = DEFAULT_AXIS,
    gammas: Sequence[float] = DEFAULT_AXIS,
    cv_folds: Optional[int] = 10,
    direction: Direction = Direction.BOTH,
    threads: int = 1,
) -> Tuple[DefenseReport, Dict[str, ClassifierModel]]:
    """
    Full defense: pick source cells, sample, retrain, cross-validate and re-sweep.

    Args:
        victims: Original victims by name
        m: Surrogate used to craft
        train: Original training partition
        test: Original clean test partition
        cfg: Defense configuration
        train_cfg: Hyperparameters the victims were trained with
        pre_grids: Pre-defense grids, used to find worst cells
        thetas: Feature-fraction axis
        gammas: Perturbation-size axis
        cv_folds: Folds for the before/after cross-validation (None skips it)
        direction: JSMA direction mode
        threads: Worker threads

    Returns:
        (DefenseReport, retrained victims by name)
    """
    train_cfg = train_cfg or TrainConfig()
    pre_grids = dict(pre_grids or {})
    crafted: Dict[Cell, AdversarialSet] = {}
    retrained: Dict[str, ClassifierModel] = {}
    sampled: Dict[str, List[int]] = {}
    cells_used: Dict[str, List[Cell]] = {}
    cv: Dict[str, Tuple[Optional[CvResult], Optional[CvResult]]] = {}

    for name, victim in sorted(victims.items()):
        cells = cfg.cells_for(name, pre_grids.get(name))
        parts = []
        for theta, gamma in cells:
            key = (float(theta), float(gamma))
            if key not in crafted:
                crafted[key] = craft_adversarial_testset(
                    m, test, AttackConfig.jsma(theta, gamma, direction=direction, target=BENIGN, seed=cfg.seed),
                    threads=threads,
                )
            parts.append(sample_adversarial(crafted[key], cfg.sample_fraction, derive_seed(cfg.seed, name, *key)))
        augment = parts[0]
        for part in parts[1:]:
            augment = augment.concat(part)

        kind = victim.kind
        model = adversarial_train(
            train,
            augment,
            kind,
            train_cfg,
            seed=derive_seed(train_cfg.seed, "adversarial_train", name),
            threads=threads,
            provenance={
                "source_cells": [list(c) for c in cells],
                "sample_fraction": cfg.sample_fraction,
                "defense_seed": cfg.seed,
            },
        )
        retrained[name] = model
        sampled[name] = [int(r) for r in augment.row_ids]
        cells_used[name] = [tuple(c) for c in cells]
        logger.info(f"Retrained {name} on {train.n} + {augment.n} rows from cells {cells_used[name]}")

        if cv_folds:
            cv[name] = (
                cross_validate(kind, train, k=cv_folds, seed=train_cfg.seed, cfg=train_cfg, threads=threads),
                cross_validate(kind, train.concat(augment), k=cv_folds, seed=train_cfg.seed, cfg=train_cfg, threads=threads),
            )

    report = evaluate_defense(
        victims, retrained, m, test, thetas, gammas,
        sampled_row_ids=sampled,
        source_cells=cells_used,
        direction=direction,
        seed=cfg.seed,
        threads=threads,
    )
    for name, (before_cv, after_cv) in cv.items():
        report.victims[name].cv_before = before_cv
        report.victims[name].cv_after = after_cv
    return report, retrained
