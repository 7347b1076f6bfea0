"""
Experiment configuration for AML IDS Lab.

One YAML file describes a whole study: where the data comes from, how it is
split, which models are trained and cross-validated, the attack grid and
the defense. Sub-seeds that a file leaves out are derived from the global
seed.
"""
import hashlib
import json
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from ..attacks.config import Direction
from ..attacks.sweep import DEFAULT_AXIS
from ..data.ingest import SanitizePolicy
from ..data.split import SplitSpec
from ..defense.adversarial_training import POWER_SYSTEM_CELLS, DefenseConfig
from ..models.config import ModelKind, TrainConfig
from ..utils.errors import ConfigError
from ..utils.seeding import derive_seed
from .settings import get_settings

Cell = Tuple[float, float]

DEFAULT_REPORT_CELLS: List[Cell] = [(0.1, 0.3), (0.3, 0.2), (0.2, 0.4), (0.5, 0.9)]
DEFAULT_EPSILONS: List[float] = [0.01, 0.05, 0.1, 0.2, 0.3]
# fields that do not change any computed result
NON_COMPUTATIONAL_FIELDS = {"output_dir", "threads"}


class DataKind(str, Enum):
    SYNTHETIC = "synthetic"
    POWER_SYSTEM = "power_system"
    CSV = "csv"


class SyntheticConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    n: int = Field(default=2000, ge=2)
    d: int = Field(default=16, ge=1)
    malicious_fraction: float = Field(default=0.71, gt=0.0, lt=1.0)
    separation: float = Field(default=2.0, ge=0.0)
    label_noise: float = Field(default=0.05, ge=0.0, lt=0.5)
    non_finite_fraction: float = Field(default=0.0, ge=0.0, lt=1.0)
    seed: int = Field(default=0, ge=0)


class DataConfig(BaseModel):
    """Input data: a synthetic generator, the power-system corpus, or explicit CSV paths."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: DataKind = DataKind.SYNTHETIC
    paths: List[str] = []
    directory: Optional[str] = None
    has_header: bool = True
    label_column: Optional[str] = None
    sanitize_policy: SanitizePolicy = SanitizePolicy.CLAMP_TO_COLUMN_EXTREMES
    label_mapping: Optional[Dict[str, int]] = None
    synthetic: SyntheticConfig = SyntheticConfig()

    @field_validator("label_mapping")
    @classmethod
    def _binary_targets(cls, value: Optional[Dict[str, int]]) -> Optional[Dict[str, int]]:
        if value is not None:
            bad = {tag: target for tag, target in value.items() if target not in (0, 1)}
            if bad:
                raise ValueError(f"label mapping targets must be 0 or 1: {bad}")
        return value

    @model_validator(mode="after")
    def _has_source(self) -> "DataConfig":
        if self.kind is DataKind.CSV and not self.paths:
            raise ValueError("csv data needs at least one path")
        return self

    def resolve_paths(self) -> List[Path]:
        """CSV files to ingest, in a stable order."""
        if self.paths:
            return [Path(p) for p in self.paths]
        directory = self.directory or get_settings().power_system_dir
        if directory is None:
            raise ConfigError("power_system data needs data.directory or AML_IDS_POWER_SYSTEM_DIR")
        files = sorted(Path(directory).glob("*.csv"))
        if not files:
            raise ConfigError(f"no CSV files found in {directory}")
        return files


class ModelsConfig(BaseModel):
    """Models cross-validated, victims attacked, and their hyperparameters."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    cv_kinds: List[ModelKind] = [ModelKind.ZERO_R, ModelKind.NAIVE_BAYES, ModelKind.FOREST, ModelKind.TREE]
    victims: List[ModelKind] = [ModelKind.FOREST, ModelKind.TREE]
    cv_folds: int = Field(default=10, ge=2)
    params: TrainConfig = TrainConfig()

    @field_validator("victims")
    @classmethod
    def _victims(cls, value: List[ModelKind]) -> List[ModelKind]:
        if not value:
            raise ValueError("at least one victim is required")
        if ModelKind.MLP in value:
            raise ValueError("the surrogate cannot also be a victim")
        if len(set(value)) != len(value):
            raise ValueError("victims must be distinct")
        return value


def _unit_axis(values: List[float], name: str) -> List[float]:
    if not values:
        raise ValueError(f"{name} must not be empty")
    for v in values:
        if not 0.0 < v <= 1.0:
            raise ValueError(f"{name} value {v} is outside (0, 1]")
    if len(set(values)) != len(values):
        raise ValueError(f"{name} values must be distinct")
    return values


class AttackGridConfig(BaseModel):
    """JSMA grid axes, the FGSM epsilon axis and the cells whose details are reported."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    theta_values: List[float] = list(DEFAULT_AXIS)
    gamma_values: List[float] = list(DEFAULT_AXIS)
    epsilons: List[float] = DEFAULT_EPSILONS
    direction: Direction = Direction.BOTH
    report_cells: List[Cell] = DEFAULT_REPORT_CELLS
    seed: int = Field(default=0, ge=0)

    @field_validator("theta_values", "gamma_values")
    @classmethod
    def _axes(cls, value: List[float], info) -> List[float]:
        return _unit_axis(value, info.field_name)

    @field_validator("epsilons")
    @classmethod
    def _epsilons(cls, value: List[float]) -> List[float]:
        if any(e <= 0 for e in value):
            raise ValueError("epsilons must be positive")
        return value

    def on_grid(self, theta: float, gamma: float) -> bool:
        thetas = {f"{v:g}" for v in self.theta_values}
        gammas = {f"{v:g}" for v in self.gamma_values}
        return f"{theta:g}" in thetas and f"{gamma:g}" in gammas

    @model_validator(mode="after")
    def _report_cells_on_grid(self) -> "AttackGridConfig":
        for theta, gamma in self.report_cells:
            if not self.on_grid(theta, gamma):
                raise ValueError(f"report cell ({theta}, {gamma}) is not on the grid")
        return self


class ExperimentConfig(BaseModel):
    """
    A complete study.

    Attributes:
        name: Free-form experiment name
        seed: Global seed; section seeds left unset are derived from it
        output_dir: Artifact directory (defaults to the settings value)
        threads: Worker thread cap (defaults to the settings value)
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str = "experiment"
    seed: int = Field(default=0, ge=0)
    output_dir: Optional[str] = None
    threads: Optional[int] = Field(default=None, ge=1)
    data: DataConfig = DataConfig()
    split: SplitSpec = SplitSpec()
    models: ModelsConfig = ModelsConfig()
    attack: AttackGridConfig = AttackGridConfig()
    defense: DefenseConfig = DefenseConfig()

    @model_validator(mode="before")
    @classmethod
    def _derive_seeds(cls, raw: Any) -> Any:
        if not isinstance(raw, dict):
            return raw
        raw = {k: v.model_dump() if isinstance(v, BaseModel) else v for k, v in raw.items()}
        seed = int(raw.get("seed", 0))

        def section(key: str) -> Dict[str, Any]:
            value = raw.get(key)
            return dict(value) if isinstance(value, Mapping) else {}

        split = section("split")
        split.setdefault("seed", derive_seed(seed, "split"))
        raw["split"] = split

        attack = section("attack")
        attack.setdefault("seed", derive_seed(seed, "attack"))
        raw["attack"] = attack

        defense = section("defense")
        defense.setdefault("seed", derive_seed(seed, "defense"))
        data = section("data")
        if data.get("kind") == DataKind.POWER_SYSTEM.value and not defense.get("source_cells"):
            defense.setdefault("victim_cells", {k: list(v) for k, v in POWER_SYSTEM_CELLS.items()})
        raw["defense"] = defense

        synthetic = dict(data.get("synthetic") or {})
        synthetic.setdefault("seed", derive_seed(seed, "synthetic"))
        data["synthetic"] = synthetic
        raw["data"] = data

        models = section("models")
        params = dict(models.get("params") or {})
        params.setdefault("seed", derive_seed(seed, "train"))
        models["params"] = params
        raw["models"] = models
        return raw

    @model_validator(mode="after")
    def _defense_cells_on_grid(self) -> "ExperimentConfig":
        cells = list(self.defense.source_cells or []) + list(self.defense.victim_cells.values())
        for theta, gamma in cells:
            if not self.attack.on_grid(theta, gamma):
                raise ValueError(f"defense cell ({theta}, {gamma}) is not on the attack grid")
        return self

    @property
    def train_config(self) -> TrainConfig:
        return self.models.params

    def resolved_output_dir(self) -> Path:
        return Path(self.output_dir or get_settings().output_dir)

    def resolved_threads(self) -> int:
        return self.threads or get_settings().threads

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON of every field that affects results."""
        body = self.model_dump(mode="json", exclude=NON_COMPUTATIONAL_FIELDS)
        return hashlib.sha256(json.dumps(body, sort_keys=True).encode("utf-8")).hexdigest()


def load_experiment_config(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Dict[str, Any]] = None,
) -> ExperimentConfig:
    """
    Load and validate an experiment file.

    Args:
        path: YAML file; None gives the all-defaults synthetic experiment
        overrides: Top-level keys (seed, output_dir, threads) replacing the
            file's values before validation, so derived seeds follow an
            overridden global seed

    Returns:
        Validated ExperimentConfig

    Raises:
        ConfigError: unreadable file, invalid YAML, or failed validation
    """
    raw: Dict[str, Any] = {}
    if path is not None:
        try:
            loaded = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
        except OSError as e:
            raise ConfigError(f"cannot read config file {path}: {e}") from e
        except yaml.YAMLError as e:
            raise ConfigError(f"invalid YAML in {path}: {e}") from e
        if loaded is not None and not isinstance(loaded, dict):
            raise ConfigError(f"config file {path} must contain a mapping at the top level")
        raw = loaded or {}
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(f"invalid experiment config: {e}") from e
