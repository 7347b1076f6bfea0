"""
Pipeline stages for AML IDS Lab.

Each stage reads only the persisted artifacts of earlier stages (checked
against their manifests) and writes its own artifacts plus a manifest, so
any stage can be rerun on its own.
"""
import time
from contextlib import contextmanager
from typing import Any, Dict, Iterator, List, Tuple

from ..attacks.config import AttackConfig
from ..attacks.crafting import craft_adversarial_testset, perturbation_example, save_adversarial_set
from ..attacks.sweep import SweepGrid, fgsm_sweep, save_heatmap_csv, sweep
from ..config.experiment import DataKind, ExperimentConfig
from ..data.ingest import binarize_labels, load_csv_files, sanitize
from ..data.normalize import FeatureSchema, fit_normalizer, load_schema, normalize, save_schema
from ..data.split import split_indices
from ..data.synthetic import make_synthetic
from ..data.tables import Dataset, RawTable, class_distribution, load_dataset, save_dataset
from ..defense.adversarial_training import DefenseReport, run_adversarial_training
from ..evaluation.cross_validation import cross_validate
from ..evaluation.metrics import evaluate
from ..models.base import ClassifierModel
from ..models.config import ModelKind
from ..models.mlp import MlpSurrogate
from ..models.persistence import load_model, save_model
from ..models.registry import fit_model
from ..utils.artifacts import ArtifactStore
from ..utils.errors import ArtifactError, TrainingError
from ..utils.logging import get_logger

INGEST, TRAIN, ATTACK, DEFEND, REPORT = "ingest", "train", "attack", "defend", "report"
STAGES = (INGEST, TRAIN, ATTACK, DEFEND, REPORT)

TRAIN_CSV = "data/train.csv"
TEST_CSV = "data/test.csv"
SCHEMA_JSON = "data/schema.json"
DATA_SUMMARY = "data/summary.json"
SURROGATE = "models/surrogate.json"
TRAIN_SUMMARY = "train/summary.json"
FGSM_JSON = "attack/fgsm.json"
ATTACK_SUMMARY = "attack/summary.json"
DEFENSE_REPORT = "defense/report.json"
REPORT_INDEX = "report/index.json"
REPORT_TEXT = "report/summary.txt"

logger = get_logger("workflows.stages")


def model_path(kind: str) -> str:
    return f"models/{kind}.json"


def cv_path(kind: str) -> str:
    return f"cv/{kind}.json"


def grid_path(victim: str) -> str:
    return f"attack/grids/{victim}.json"


def cell_tag(theta: float, gamma: float) -> str:
    return f"theta{theta:g}_gamma{gamma:g}"


@contextmanager
def _timed(timings: Dict[str, float], name: str) -> Iterator[None]:
    start = time.perf_counter()
    yield
    timings[name] = round(time.perf_counter() - start, 3)


def _stage_result(stage: str, artifacts: List[str], summary: Dict[str, Any], timings: Dict[str, float]):
    return {"stage": stage, "artifacts": sorted(artifacts), "summary": summary, "timings": timings}


def _load_raw(cfg: ExperimentConfig) -> RawTable:
    data = cfg.data
    if data.kind is DataKind.SYNTHETIC:
        s = data.synthetic
        return make_synthetic(
            n=s.n,
            d=s.d,
            malicious_fraction=s.malicious_fraction,
            separation=s.separation,
            label_noise=s.label_noise,
            non_finite_fraction=s.non_finite_fraction,
            seed=s.seed,
        )
    return load_csv_files(data.resolve_paths(), has_header=data.has_header, label_column=data.label_column)


def cmd_ingest(cfg: ExperimentConfig) -> Dict[str, Any]:
    """
    Load, sanitize, binarize, split and normalize the data.

    The normalizer is fitted on the training partition only; test rows are
    clamped into [0, 1] with the training statistics. Nothing is written
    until every input has been read and validated.
    """
    store = ArtifactStore(cfg.resolved_output_dir())
    timings: Dict[str, float] = {}
    with _timed(timings, "ingest"):
        raw = _load_raw(cfg)
        clean = sanitize(raw, cfg.data.sanitize_policy)
        labeled = binarize_labels(clean, cfg.data.label_mapping)
        train_idx, test_idx = split_indices(labeled.labels, cfg.split)
        schema = fit_normalizer(labeled.take(train_idx))
        train = normalize(labeled.take(train_idx), schema, row_ids=train_idx)
        test = normalize(labeled.take(test_idx), schema, row_ids=test_idx)

    summary = {
        "raw_rows": raw.n,
        "rows": labeled.n,
        "dropped_rows": raw.n - labeled.n,
        "features": labeled.d,
        "totals": class_distribution(labeled),
        "train": class_distribution(train),
        "test": class_distribution(test),
        "degenerate_features": [n for n, deg in zip(schema.feature_names, schema.degenerate) if deg],
        "provenance": [list(p) for p in labeled.provenance],
        "schema_fingerprint": schema.fingerprint,
    }
    store.write_with(TRAIN_CSV, lambda p: save_dataset(train, p))
    store.write_with(TEST_CSV, lambda p: save_dataset(test, p))
    store.write_with(SCHEMA_JSON, lambda p: save_schema(schema, p))
    store.write_json(DATA_SUMMARY, summary)
    artifacts = [TRAIN_CSV, TEST_CSV, SCHEMA_JSON, DATA_SUMMARY]
    store.write_manifest(INGEST, cfg.config_hash(), artifacts, timings)
    return _stage_result(INGEST, artifacts, summary, timings)


def load_partitions(store: ArtifactStore) -> Tuple[Dataset, Dataset, FeatureSchema]:
    schema = load_schema(store.path(SCHEMA_JSON))
    train = load_dataset(store.path(TRAIN_CSV), schema.fingerprint)
    test = load_dataset(store.path(TEST_CSV), schema.fingerprint)
    return train, test, schema


def _load_victims(store: ArtifactStore, cfg: ExperimentConfig) -> Dict[str, ClassifierModel]:
    return {kind.value: load_model(store.path(model_path(kind.value))) for kind in cfg.models.victims}


def cmd_train(cfg: ExperimentConfig) -> Dict[str, Any]:
    """
    Cross-validate every configured model on the training partition, then
    fit victims, baselines and the MLP surrogate on all of it and score
    them on the clean test partition.
    """
    store = ArtifactStore(cfg.resolved_output_dir())
    store.require(INGEST, cfg.config_hash())
    train, test, _ = load_partitions(store)
    threads = cfg.resolved_threads()
    params = cfg.train_config
    timings: Dict[str, float] = {}

    kinds: List[ModelKind] = list(dict.fromkeys(list(cfg.models.cv_kinds) + list(cfg.models.victims)))
    artifacts: List[str] = []
    rows: List[Dict[str, Any]] = []
    for kind in kinds:
        name = kind.value
        try:
            with _timed(timings, f"cv:{name}"):
                cv = cross_validate(kind, train, k=cfg.models.cv_folds, seed=params.seed, cfg=params, threads=threads)
            with _timed(timings, f"fit:{name}"):
                model = fit_model(kind, train, params, threads=threads)
        except TrainingError as e:
            logger.error(f"Training {name} failed: {e}")
            raise TrainingError(f"{name}: {e}") from e
        store.write_json(cv_path(name), cv.to_dict())
        store.write_with(model_path(name), lambda p, m=model: save_model(m, p))
        artifacts += [cv_path(name), model_path(name)]
        cm, report = evaluate(model, test)
        agg = cv.aggregate
        rows.append(
            {
                "model": name,
                "cv_weighted_precision": agg.weighted_precision,
                "cv_weighted_recall": agg.weighted_recall,
                "cv_weighted_f1": agg.weighted_f1,
                "test_confusion": cm.to_list(),
                "test_metrics": report.to_dict(),
                "describe": model.describe(),
            }
        )

    with _timed(timings, "fit:surrogate"):
        surrogate = fit_model(ModelKind.MLP, train, params)
    store.write_with(SURROGATE, lambda p: save_model(surrogate, p))
    cm, report = evaluate(surrogate, test)
    summary = {
        "cv_folds": cfg.models.cv_folds,
        "cv_aggregation": "pooled_confusion",
        "models": rows,
        "surrogate": {
            "describe": surrogate.describe(),
            "test_confusion": cm.to_list(),
            "test_metrics": report.to_dict(),
        },
    }
    store.write_json(TRAIN_SUMMARY, summary)
    artifacts += [SURROGATE, TRAIN_SUMMARY]
    store.write_manifest(TRAIN, cfg.config_hash(), artifacts, timings)
    return _stage_result(TRAIN, artifacts, summary, timings)


def cmd_attack(cfg: ExperimentConfig) -> Dict[str, Any]:
    """
    Sweep the (theta, gamma) grid and the FGSM epsilon axis against every
    victim, and persist the adversarial sets of the configured report cells.
    """
    store = ArtifactStore(cfg.resolved_output_dir())
    store.require(INGEST, cfg.config_hash())
    store.require(TRAIN, cfg.config_hash())
    _, test, schema = load_partitions(store)
    surrogate = load_model(store.path(SURROGATE))
    victims = _load_victims(store, cfg)
    threads = cfg.resolved_threads()
    grid_cfg = cfg.attack
    timings: Dict[str, float] = {}

    with _timed(timings, "jsma_grid"):
        grids = sweep(
            victims, surrogate, test, grid_cfg.theta_values, grid_cfg.gamma_values,
            direction=grid_cfg.direction, seed=grid_cfg.seed, threads=threads,
        )
    artifacts: List[str] = []
    for name, grid in grids.items():
        store.write_json(grid_path(name), grid.to_dict())
        heatmap = f"attack/heatmaps/{name}_f1.csv"
        store.write_with(heatmap, lambda p, g=grid: save_heatmap_csv(g.to_frame(), p))
        artifacts += [grid_path(name), heatmap]
    first = next(iter(grids.values()))
    flips = "attack/heatmaps/surrogate_flip_rate.csv"
    store.write_with(flips, lambda p: save_heatmap_csv(first.to_frame(first.flip_rates), p))
    artifacts.append(flips)

    with _timed(timings, "fgsm_axis"):
        curves = fgsm_sweep(victims, surrogate, test, grid_cfg.epsilons, seed=grid_cfg.seed)
    store.write_json(FGSM_JSON, {name: c.to_dict() for name, c in curves.items()})
    artifacts.append(FGSM_JSON)

    report_cells = []
    adv_sets = []
    with _timed(timings, "report_cells"):
        for theta, gamma in grid_cfg.report_cells:
            adv = craft_adversarial_testset(
                surrogate, test,
                AttackConfig.jsma(theta, gamma, direction=grid_cfg.direction, seed=grid_cfg.seed),
                threads=threads,
            )
            adv_sets.append(adv)
            rel = f"attack/adversarial/{cell_tag(theta, gamma)}.csv"
            store.path(rel).parent.mkdir(parents=True, exist_ok=True)
            save_adversarial_set(adv, store.path(rel))
            artifacts += [rel, rel + ".json"]
            report_cells.append(
                {
                    "theta": theta,
                    "gamma": gamma,
                    "perturbation": adv.summary(),
                    "victims": {
                        name: {
                            "confusion": grid.confusion_at(theta, gamma).to_list(),
                            "weighted_f1": grid.cell(theta, gamma),
                        }
                        for name, grid in grids.items()
                    },
                }
            )
    if adv_sets:
        example = perturbation_example(test, adv_sets, schema)
        store.write_with("attack/perturbation_example.csv", lambda p: example.to_csv(p, float_format="%.17g"))
        artifacts.append("attack/perturbation_example.csv")

    summary = {
        "axis_semantics": "theta = fraction of features changed, gamma = size of each change",
        "victims": {
            name: {
                "baseline_f1": grid.baseline_f1,
                "mean_f1": grid.mean_f1,
                "worst_cell": list(grid.worst_cell()),
            }
            for name, grid in grids.items()
        },
        "report_cells": report_cells,
    }
    store.write_json(ATTACK_SUMMARY, summary)
    artifacts.append(ATTACK_SUMMARY)
    store.write_manifest(ATTACK, cfg.config_hash(), artifacts, timings)
    return _stage_result(ATTACK, artifacts, summary, timings)


def load_grids(store: ArtifactStore, cfg: ExperimentConfig) -> Dict[str, SweepGrid]:
    return {
        kind.value: SweepGrid.from_dict(store.read_json(grid_path(kind.value))) for kind in cfg.models.victims
    }


def cmd_defend(cfg: ExperimentConfig) -> Dict[str, Any]:
    """Adversarial training of every victim and the before/after grid comparison."""
    store = ArtifactStore(cfg.resolved_output_dir())
    for stage in (INGEST, TRAIN, ATTACK):
        store.require(stage, cfg.config_hash())
    train, test, _ = load_partitions(store)
    surrogate = load_model(store.path(SURROGATE))
    if not isinstance(surrogate, MlpSurrogate):
        raise ArtifactError(f"{SURROGATE} does not hold an MLP surrogate")
    victims = _load_victims(store, cfg)
    timings: Dict[str, float] = {}

    with _timed(timings, "defense"):
        report, retrained = run_adversarial_training(
            victims,
            surrogate,
            train,
            test,
            cfg.defense,
            train_cfg=cfg.train_config,
            pre_grids=load_grids(store, cfg),
            thetas=cfg.attack.theta_values,
            gammas=cfg.attack.gamma_values,
            cv_folds=cfg.models.cv_folds,
            direction=cfg.attack.direction,
            threads=cfg.resolved_threads(),
        )

    artifacts = [DEFENSE_REPORT]
    store.write_json(DEFENSE_REPORT, report.to_dict())
    for name, model in retrained.items():
        rel = f"defense/models/{name}.json"
        store.write_with(rel, lambda p, m=model: save_model(m, p))
        artifacts.append(rel)
    for key, frame in report.heatmaps().items():
        rel = f"defense/heatmaps/{key}.csv"
        store.write_with(rel, lambda p, f=frame: save_heatmap_csv(f, p))
        artifacts.append(rel)

    summary = {
        name: {
            "source_cells": [list(c) for c in v.source_cells],
            "augmented_rows": len(v.sampled_row_ids),
            "pre_mean_f1": v.pre_grid.mean_f1,
            "post_mean_f1": v.post_grid.mean_f1,
            "mean_delta": v.mean_delta,
            "improved_fraction": v.improved_fraction,
            "cv_before_f1": None if v.cv_before is None else v.cv_before.aggregate.weighted_f1,
            "cv_after_f1": None if v.cv_after is None else v.cv_after.aggregate.weighted_f1,
        }
        for name, v in report.victims.items()
    }
    store.write_manifest(DEFEND, cfg.config_hash(), artifacts, timings)
    return _stage_result(DEFEND, artifacts, summary, timings)


def _summary_text(cfg: ExperimentConfig, index: Dict[str, Any], store: ArtifactStore) -> str:
    lines = [f"Experiment {cfg.name}", f"config hash {index['config_hash']}", ""]
    if store.exists(TRAIN_SUMMARY):
        lines.append("Cross-validation (pooled confusion, weighted averages)")
        for row in store.read_json(TRAIN_SUMMARY)["models"]:
            lines.append(
                f"  {row['model']:<12} P {row['cv_weighted_precision']:.4f}  "
                f"R {row['cv_weighted_recall']:.4f}  F1 {row['cv_weighted_f1']:.4f}"
            )
        lines.append("")
    if store.exists(ATTACK_SUMMARY):
        lines.append("Attack grid (theta = feature fraction, gamma = change size)")
        for name, v in store.read_json(ATTACK_SUMMARY)["victims"].items():
            theta, gamma, f1 = v["worst_cell"]
            lines.append(
                f"  {name:<12} clean F1 {v['baseline_f1']:.4f}  mean {v['mean_f1']:.4f}  "
                f"worst theta={theta:g} gamma={gamma:g} F1 {f1:.4f}"
            )
        lines.append("")
    if store.exists(DEFENSE_REPORT):
        report = DefenseReport.from_dict(store.read_json(DEFENSE_REPORT))
        lines.append("Adversarial training (sampled rows excluded)")
        for name, v in sorted(report.victims.items()):
            lines.append(
                f"  {name:<12} mean F1 {v.pre_grid.mean_f1:.4f} -> {v.post_grid.mean_f1:.4f}  "
                f"delta {v.mean_delta:+.4f}  improved {v.improved_fraction:.0%} of cells"
            )
        lines.append("")
    if index["integrity"]:
        lines.append("INTEGRITY PROBLEMS")
        for rel, status in sorted(index["integrity"].items()):
            lines.append(f"  {rel}: {status}")
    return "\n".join(lines) + "\n"


def cmd_report(cfg: ExperimentConfig) -> Dict[str, Any]:
    """
    Index every artifact of the run under the config hash and write a text summary.

    Raises:
        ArtifactError: a prior stage is missing (all missing stages are
            listed), or an artifact fails its hash check (after the index
            flagging it has been written)
    """
    store = ArtifactStore(cfg.resolved_output_dir())
    config_hash = cfg.config_hash()
    missing = [stage for stage in (INGEST, TRAIN, ATTACK, DEFEND) if not store.exists(store.manifest_path(stage))]
    if missing:
        raise ArtifactError(f"missing stage artifacts: {', '.join(missing)}")

    stages: Dict[str, Any] = {}
    integrity: Dict[str, str] = {}
    for stage in (INGEST, TRAIN, ATTACK, DEFEND):
        manifest = store.read_manifest(stage)
        if manifest["config_hash"] != config_hash:
            integrity[store.manifest_path(stage)] = "config_hash_mismatch"
        integrity.update(store.verify(stage))
        stages[stage] = {"manifest": store.manifest_path(stage), "artifacts": manifest["artifacts"]}

    index = {
        "config_hash": config_hash,
        "experiment": cfg.name,
        "stages": stages,
        "cv_results": sorted(rel for rel in stages[TRAIN]["artifacts"] if rel.startswith("cv/")),
        "sweep_grids": sorted(rel for rel in stages[ATTACK]["artifacts"] if rel.startswith("attack/grids/")),
        "defense_report": DEFENSE_REPORT,
        "integrity": integrity,
    }
    store.write_json(REPORT_INDEX, index)
    store.write_text(REPORT_TEXT, _summary_text(cfg, index, store))
    artifacts = [REPORT_INDEX, REPORT_TEXT]
    store.write_manifest(REPORT, config_hash, artifacts)
    if integrity:
        listing = ", ".join(f"{rel} ({status})" for rel, status in sorted(integrity.items()))
        logger.error(f"Integrity check failed: {listing}")
        raise ArtifactError(f"tampered or stale artifacts: {listing}")
    return _stage_result(REPORT, artifacts, {"index": REPORT_INDEX, "summary": REPORT_TEXT}, {})


STAGE_COMMANDS = {
    INGEST: cmd_ingest,
    TRAIN: cmd_train,
    ATTACK: cmd_attack,
    DEFEND: cmd_defend,
    REPORT: cmd_report,
}

