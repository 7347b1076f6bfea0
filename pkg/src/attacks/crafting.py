"""
Adversarial test sets: crafting, transfer evaluation and persistence.
"""
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from ..data.normalize import FeatureSchema, denormalize
from ..data.tables import LABEL_COLUMN, MALICIOUS, Dataset
from ..evaluation.metrics import ConfusionMatrix, MetricsReport, confusion, prf
from ..models.base import ClassifierModel
from ..models.mlp import MlpSurrogate
from ..utils.errors import AttackError, DataError
from ..utils.logging import get_logger
from .config import AttackConfig, AttackMethod
from .fgsm import fgsm_batch
from .jsma import PerturbationLog, jsma_batch

ADVERSARIAL_FORMAT = "aml-ids-lab/adversarial-set"
ORIGIN_COLUMN = "origin_mask"
PERTURBED = "perturbed"
UNTOUCHED = "untouched"
CHUNK_SIZE = 512

logger = get_logger("attacks.crafting")


@dataclass(frozen=True)
class AdversarialSet:
    """
    A test partition whose malicious rows were replaced by adversarial versions.

    `logs[i]` is the PerturbationLog of row i, or None for untouched rows.
    Labels are always the source test labels.
    """

    data: Dataset
    origin_mask: np.ndarray
    config: AttackConfig
    logs: Tuple[Optional[PerturbationLog], ...]

    def __post_init__(self):
        mask = np.asarray(self.origin_mask, dtype=bool)
        if mask.shape != (self.data.n,) or len(self.logs) != self.data.n:
            raise AttackError("origin mask and logs must have one entry per row")
        if (self.data.labels[mask] != MALICIOUS).any():
            raise AttackError("only malicious rows may be perturbed")
        if self.config.method is AttackMethod.JSMA:
            budget = self.config.budget(self.data.d)
            over = [i for i, log in enumerate(self.logs) if log is not None and log.n_changed > budget]
            if over:
                raise AttackError(f"{len(over)} rows exceed the feature budget of {budget}")
        mask = mask.copy()
        mask.setflags(write=False)
        object.__setattr__(self, "origin_mask", mask)
        object.__setattr__(self, "logs", tuple(self.logs))

    @property
    def features(self) -> np.ndarray:
        return self.data.features

    @property
    def labels(self) -> np.ndarray:
        return self.data.labels

    @property
    def n(self) -> int:
        return self.data.n

    @property
    def perturbed_indices(self) -> np.ndarray:
        return np.flatnonzero(self.origin_mask)

    def changed_counts(self) -> np.ndarray:
        return np.array([0 if log is None else log.n_changed for log in self.logs], dtype=np.int64)

    def summary(self) -> Dict[str, float]:
        counts = self.changed_counts()[self.origin_mask]
        l1 = np.array([log.l1 for log in self.logs if log is not None])
        return {
            "rows": self.n,
            "perturbed_rows": int(self.origin_mask.sum()),
            "mean_features_changed": float(counts.mean()) if len(counts) else 0.0,
            "max_features_changed": int(counts.max()) if len(counts) else 0,
            "mean_l1": float(l1.mean()) if len(l1) else 0.0,
        }


def _fgsm_logs(before: np.ndarray, after: np.ndarray) -> List[PerturbationLog]:
    logs = []
    for b, a in zip(before, after):
        changed = np.flatnonzero(a != b)
        logs.append(
            PerturbationLog(
                tuple(int(f) for f in changed),
                tuple(float(v) for v in b[changed]),
                tuple(float(v) for v in a[changed]),
                "single_step",
            )
        )
    return logs


def _craft_rows(m: MlpSurrogate, X: np.ndarray, y: np.ndarray, cfg: AttackConfig):
    if cfg.method is AttackMethod.FGSM:
        X_adv = fgsm_batch(m, X, y, cfg.epsilon)
        return X_adv, _fgsm_logs(X, X_adv)
    return jsma_batch(m, X, cfg.theta, cfg.gamma, target=cfg.target, direction=cfg.direction)


def craft_adversarial_testset(
    m: MlpSurrogate,
    test: Dataset,
    cfg: AttackConfig,
    threads: int = 1,
) -> AdversarialSet:
    """
    Replace every malicious test row by its adversarial version.

    Rows are processed in fixed-size chunks, so the output does not depend
    on `threads`.

    Args:
        m: Surrogate driving the attack
        test: Clean test partition
        cfg: Attack configuration
        threads: Chunks crafted concurrently

    Returns:
        AdversarialSet with the same rows, order and labels as `test`

    Raises:
        AttackError: test has no malicious rows
    """
    m.check_schema(test.schema_fingerprint)
    malicious = np.flatnonzero(test.labels == MALICIOUS)
    if len(malicious) == 0:
        raise AttackError("test set has no malicious rows to perturb")

    chunks = [malicious[i:i + CHUNK_SIZE] for i in range(0, len(malicious), CHUNK_SIZE)]

    def run(rows: np.ndarray):
        return _craft_rows(m, test.features[rows], test.labels[rows], cfg)

    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, chunks))
    else:
        results = [run(rows) for rows in chunks]

    features = test.features.copy()
    logs: List[Optional[PerturbationLog]] = [None] * test.n
    for rows, (X_adv, chunk_logs) in zip(chunks, results):
        features[rows] = X_adv
        for i, log in zip(rows, chunk_logs):
            logs[i] = log

    mask = np.zeros(test.n, dtype=bool)
    mask[malicious] = True
    data = Dataset(features, test.labels, test.feature_names, test.schema_fingerprint, test.row_ids)
    adv = AdversarialSet(data, mask, cfg, tuple(logs))
    logger.debug(f"Crafted {cfg.label}: {adv.summary()}")
    return adv


def transfer_confusion(victim: ClassifierModel, adv: AdversarialSet) -> ConfusionMatrix:
    """Victim predictions on the adversarial features against the original labels."""
    return confusion(adv.labels, victim.predict(adv.data))


def transfer_evaluate(victim: ClassifierModel, adv: AdversarialSet) -> MetricsReport:
    return prf(transfer_confusion(victim, adv))


def surrogate_flip_rate(m: ClassifierModel, adv: AdversarialSet) -> float:
    """Fraction of perturbed rows the model now labels with the attack's target class."""
    rows = adv.perturbed_indices
    if len(rows) == 0:
        return 0.0
    return float(np.mean(m.predict(adv.features[rows]) == adv.config.target))


def perturbation_example(
    test: Dataset,
    adv_sets: Sequence[AdversarialSet],
    schema: FeatureSchema,
    row_id: Optional[int] = None,
) -> pd.DataFrame:
    """
    Original and perturbed values of one malicious row across attack settings.

    Only features changed by at least one setting are listed.

    Args:
        test: Clean test partition the sets were crafted from
        adv_sets: Adversarial sets to compare
        schema: Feature schema, for raw-unit values
        row_id: Row to show; defaults to the first row perturbed by every set

    Returns:
        DataFrame indexed by feature name with `original`, `original_raw` and
        one value/raw column pair per attack setting
    """
    if not adv_sets:
        raise AttackError("need at least one adversarial set")
    if row_id is None:
        common = np.logical_and.reduce([a.origin_mask for a in adv_sets])
        changed = np.logical_and.reduce([a.changed_counts() > 0 for a in adv_sets])
        candidates = np.flatnonzero(common & changed)
        if len(candidates) == 0:
            candidates = np.flatnonzero(common)
        if len(candidates) == 0:
            raise AttackError("no row is perturbed by every adversarial set")
        position = int(candidates[0])
    else:
        matches = np.flatnonzero(test.row_ids == row_id)
        if len(matches) == 0:
            raise AttackError(f"row_id {row_id} is not in the test set")
        position = int(matches[0])

    original = test.features[position]
    perturbed = [a.features[position] for a in adv_sets]
    touched = np.flatnonzero(np.logical_or.reduce([p != original for p in perturbed]))

    frame = pd.DataFrame(index=pd.Index([test.feature_names[f] for f in touched], name="feature"))
    frame["original"] = original[touched]
    frame["original_raw"] = denormalize(original, schema)[touched]
    for a, p in zip(adv_sets, perturbed):
        frame[a.config.label] = p[touched]
        frame[f"{a.config.label}_raw"] = denormalize(p, schema)[touched]
    frame.attrs["row_id"] = int(test.row_ids[position])
    return frame


def save_adversarial_set(adv: AdversarialSet, path: Union[str, Path]) -> Path:
    """
    Write the set as CSV plus a JSON sidecar (`<path>.json`).

    The CSV has the dataset columns and an origin_mask column; the sidecar
    holds the attack configuration and the per-row perturbation logs.
    """
    path = Path(path)
    frame = adv.data.to_frame()
    frame.insert(len(frame.columns) - 1, ORIGIN_COLUMN, np.where(adv.origin_mask, PERTURBED, UNTOUCHED))
    frame.to_csv(path, index=False, float_format="%.17g")

    sidecar = path.with_name(path.name + ".json")
    payload = {
        "format": ADVERSARIAL_FORMAT,
        "config": adv.config.model_dump(mode="json"),
        "schema_fingerprint": adv.data.schema_fingerprint,
        "logs": {
            str(int(row_id)): log.to_dict()
            for row_id, log in zip(adv.data.row_ids, adv.logs)
            if log is not None
        },
    }
    sidecar.write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")
    return sidecar


def load_adversarial_set(path: Union[str, Path]) -> AdversarialSet:
    path = Path(path)
    sidecar = path.with_name(path.name + ".json")
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
        payload = json.loads(sidecar.read_text(encoding="utf-8"))
    except (OSError, ValueError, pd.errors.ParserError) as e:
        raise DataError(f"cannot read adversarial set: {e}", path=str(path)) from e
    if payload.get("format") != ADVERSARIAL_FORMAT:
        raise DataError("sidecar is not an adversarial-set file", path=str(sidecar))

    reserved = ("row_id", LABEL_COLUMN, ORIGIN_COLUMN)
    feature_names = [c for c in frame.columns if c not in reserved]
    row_ids = frame["row_id"].to_numpy(dtype=np.int64)
    data = Dataset(
        features=frame[feature_names].to_numpy(dtype=float),
        labels=frame[LABEL_COLUMN].to_numpy(dtype=np.int64),
        feature_names=tuple(feature_names),
        schema_fingerprint=payload.get("schema_fingerprint"),
        row_ids=row_ids,
    )
    logs_by_id = payload["logs"]
    logs = tuple(
        PerturbationLog.from_dict(logs_by_id[str(r)]) if str(r) in logs_by_id else None for r in row_ids
    )
    return AdversarialSet(
        data=data,
        origin_mask=(frame[ORIGIN_COLUMN] == PERTURBED).to_numpy(),
        config=AttackConfig.model_validate(payload["config"]),
        logs=logs,
    )
