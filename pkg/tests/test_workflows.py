"""
Tests for the experiment config, artifact store, stage commands, CLI and study workflow.
"""
import json
import shutil
from pathlib import Path

import pytest
import yaml
from click.testing import CliRunner

from main import EXIT_CONFIG, EXIT_FAILURE, EXIT_OK, cli
from src.config.experiment import DataKind, ExperimentConfig, load_experiment_config
from src.data.ingest import SanitizePolicy
from src.defense.adversarial_training import POWER_SYSTEM_CELLS
from src.utils.artifacts import ArtifactStore
from src.utils.errors import ArtifactError, ConfigError
from src.utils.seeding import derive_seed
from src.workflows.stages import STAGES, cmd_ingest
from src.workflows.study_workflow import StudyWorkflow

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

TINY = {
    "name": "tiny",
    "seed": 5,
    "data": {"kind": "synthetic", "synthetic": {"n": 240, "d": 6, "separation": 2.5, "label_noise": 0.02}},
    "models": {
        "cv_kinds": ["zero_r", "naive_bayes", "forest", "tree"],
        "victims": ["forest", "tree"],
        "cv_folds": 3,
        "params": {"forest": {"n_trees": 5}, "mlp": {"hidden": 8, "epochs": 15, "batch_size": 32}},
    },
    "attack": {
        "theta_values": [0.2, 0.5],
        "gamma_values": [0.3, 0.6],
        "epsilons": [0.1],
        "report_cells": [[0.2, 0.3]],
    },
    "defense": {"sample_fraction": 0.5},
}

COMPARED = (
    "data/train.csv",
    "data/test.csv",
    "models/forest.json",
    "models/tree.json",
    "models/surrogate.json",
    "cv/forest.json",
    "attack/grids/forest.json",
    "attack/grids/tree.json",
    "attack/adversarial/theta0.2_gamma0.3.csv",
    "defense/report.json",
    "defense/models/tree.json",
    "report/summary.txt",
)


def write_config(directory, payload=TINY):
    path = directory / "experiment.yaml"
    path.write_text(yaml.safe_dump(payload), encoding="utf-8")
    return path


def run_cli(*args):
    return CliRunner().invoke(cli, list(map(str, args)))


@pytest.fixture(scope="module")
def config_file(tmp_path_factory):
    return write_config(tmp_path_factory.mktemp("config"))


@pytest.fixture(scope="module")
def full_run(tmp_path_factory, config_file):
    """Every stage run once through the CLI."""
    out = tmp_path_factory.mktemp("run")
    for stage in STAGES:
        result = run_cli(stage, "--config", config_file, "--out", out)
        assert result.exit_code == EXIT_OK, result.output
    return out


class TestExperimentConfig:
    def test_sub_seeds_derive_from_global_seed(self):
        cfg = ExperimentConfig(seed=5)

        assert cfg.split.seed == derive_seed(5, "split")
        assert cfg.attack.seed == derive_seed(5, "attack")
        assert cfg.defense.seed == derive_seed(5, "defense")
        assert cfg.train_config.seed == derive_seed(5, "train")
        assert cfg.data.synthetic.seed == derive_seed(5, "synthetic")

    def test_explicit_sub_seed_wins(self):
        cfg = ExperimentConfig(seed=5, split={"seed": 99})

        assert cfg.split.seed == 99

    def test_hash_ignores_output_dir_and_threads(self):
        a = ExperimentConfig(seed=1, output_dir="runs/a", threads=1)
        b = ExperimentConfig(seed=1, output_dir="runs/b", threads=8)

        assert a.config_hash() == b.config_hash()
        assert a.config_hash() != ExperimentConfig(seed=2).config_hash()

    def test_override_seed_reaches_derived_seeds(self, config_file):
        cfg = load_experiment_config(config_file, overrides={"seed": 9, "output_dir": None})

        assert cfg.seed == 9
        assert cfg.split.seed == derive_seed(9, "split")

    def test_power_system_defaults_to_hand_picked_cells(self):
        cfg = ExperimentConfig(data={"kind": "power_system", "directory": "unused"})

        assert cfg.data.kind is DataKind.POWER_SYSTEM
        assert dict(cfg.defense.victim_cells) == POWER_SYSTEM_CELLS

    def test_no_file_gives_defaults(self):
        assert load_experiment_config(None) == ExperimentConfig()

    def test_sanitize_keeps_every_row_by_default(self):
        shipped = load_experiment_config(CONFIGS / "power_system.yaml")

        assert ExperimentConfig().data.sanitize_policy is SanitizePolicy.CLAMP_TO_COLUMN_EXTREMES
        assert shipped.data.sanitize_policy is SanitizePolicy.CLAMP_TO_COLUMN_EXTREMES

    def test_ingest_keeps_rows_with_non_finite_readings(self, tmp_path):
        payload = {**TINY, "data": {"kind": "synthetic", "synthetic": {"n": 240, "d": 6, "non_finite_fraction": 0.02}}}
        cfg = load_experiment_config(write_config(tmp_path, payload), overrides={"output_dir": str(tmp_path / "out")})
        summary = cmd_ingest(cfg)["summary"]

        assert summary["raw_rows"] == summary["rows"] == 240
        assert summary["dropped_rows"] == 0
        assert any(k == "sanitize" and v.startswith("clamp_to_column_extremes:") for k, v in summary["provenance"])

    @pytest.mark.parametrize(
        "payload",
        [
            {"seed": -1},
            {"unknown_key": 1},
            {"models": {"victims": ["mlp"]}},
            {"models": {"victims": []}},
            {"attack": {"theta_values": [0.0, 0.5]}},
            {"attack": {"theta_values": [0.1], "gamma_values": [0.1], "report_cells": [[0.2, 0.1]]}},
            {"data": {"kind": "csv"}},
            {"defense": {"sample_fraction": 0}},
            {"defense": {"victim_cells": {"forest": [0.25, 0.4]}}},
            {"defense": {"victim_cells": {"forrest": [0.2, 0.4]}}},
            {"defense": {"source_cells": [[0.2, 0.45]]}},
        ],
    )
    def test_invalid_configs(self, tmp_path, payload):
        with pytest.raises(ConfigError):
            load_experiment_config(write_config(tmp_path, payload))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_experiment_config(tmp_path / "absent.yaml")

    def test_bad_yaml(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("seed: [1, 2\n", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_experiment_config(path)

    def test_top_level_must_be_mapping(self, tmp_path):
        path = tmp_path / "list.yaml"
        path.write_text("- 1\n- 2\n", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_experiment_config(path)


class TestArtifactStore:
    def test_manifest_records_hashes(self, tmp_path):
        store = ArtifactStore(tmp_path)
        digest = store.write_json("a/b.json", {"x": 1})
        manifest = store.write_manifest("ingest", "abc", ["a/b.json"], {"ingest": 0.5})

        assert manifest["artifacts"] == {"a/b.json": digest}
        assert store.read_manifest("ingest")["timings"] == {"ingest": 0.5}
        assert store.verify("ingest") == {}
        assert store.stages() == ["ingest"]

    def test_verify_flags_tampered_and_missing(self, tmp_path):
        store = ArtifactStore(tmp_path)
        store.write_text("one.txt", "1")
        store.write_text("two.txt", "2")
        store.write_manifest("train", "abc", ["one.txt", "two.txt"])
        store.path("one.txt").write_text("changed", encoding="utf-8")
        store.path("two.txt").unlink()

        assert store.verify("train") == {"one.txt": "hash_mismatch", "two.txt": "missing"}
        with pytest.raises(ArtifactError):
            store.require("train", "abc")

    def test_require_checks_config_hash(self, tmp_path):
        store = ArtifactStore(tmp_path)
        store.write_text("one.txt", "1")
        store.write_manifest("ingest", "abc", ["one.txt"])

        assert store.require("ingest", "abc")["stage"] == "ingest"
        with pytest.raises(ArtifactError):
            store.require("ingest", "def")

    def test_missing_stage(self, tmp_path):
        with pytest.raises(ArtifactError):
            ArtifactStore(tmp_path).read_manifest("attack")

    def test_no_temporary_files_left(self, tmp_path):
        store = ArtifactStore(tmp_path)
        store.write_json("x.json", [1, 2])

        assert [p.name for p in tmp_path.iterdir()] == ["x.json"]


class TestStudyWorkflow:
    @staticmethod
    def fake_commands(calls, failing=None):
        def make(stage):
            def command(cfg):
                calls.append(stage)
                if stage == failing:
                    raise ConfigError(f"{stage} broke")
                return {"stage": stage, "artifacts": [], "summary": {}, "timings": {}}

            return command

        return {stage: make(stage) for stage in STAGES}

    def test_runs_every_stage_in_order(self):
        calls = []
        state = StudyWorkflow(self.fake_commands(calls)).run(ExperimentConfig())

        assert calls == list(STAGES)
        assert state["completed"] == list(STAGES)
        assert not state["error"]

    def test_stop_after(self):
        calls = []
        state = StudyWorkflow(self.fake_commands(calls)).run(ExperimentConfig(), stop_after="attack")

        assert calls == ["ingest", "train", "attack"]
        assert state["completed"] == calls

    def test_failure_stops_the_study(self):
        calls = []
        state = StudyWorkflow(self.fake_commands(calls, failing="train")).run(ExperimentConfig())

        assert calls == ["ingest", "train"]
        assert state["completed"] == ["ingest"]
        assert state["failed_stage"] == "train"
        assert "train broke" in state["error"]
        assert isinstance(state["results"]["train"]["exception"], ConfigError)

    def test_unknown_stop_stage(self):
        with pytest.raises(ConfigError):
            StudyWorkflow(self.fake_commands([])).run(ExperimentConfig(), stop_after="deploy")


class TestCli:
    def test_attack_help_names_the_direction_setting(self):
        result = run_cli("attack", "--help")

        assert result.exit_code == EXIT_OK
        assert "attack.direction" in result.output

    def test_config_error_exits_2(self, tmp_path):
        path = write_config(tmp_path, {"seed": -3})

        result = run_cli("ingest", "--config", path, "--out", tmp_path / "out")

        assert result.exit_code == EXIT_CONFIG

    def test_missing_config_file_exits_2(self, tmp_path):
        result = run_cli("train", "--config", tmp_path / "absent.yaml", "--out", tmp_path)

        assert result.exit_code == EXIT_CONFIG

    def test_stage_without_prerequisites_exits_1(self, tmp_path, config_file):
        result = run_cli("attack", "--config", config_file, "--out", tmp_path)

        assert result.exit_code == EXIT_FAILURE

    def test_report_lists_missing_stages(self, tmp_path, config_file):
        result = run_cli("report", "--config", config_file, "--out", tmp_path)

        assert result.exit_code == EXIT_FAILURE
        assert "ingest" in result.output and "defend" in result.output

    def test_info(self, config_file):
        result = run_cli("info", "--config", config_file)

        assert result.exit_code == EXIT_OK
        assert load_experiment_config(config_file).config_hash()[:12] in result.output

    def test_run_stop_after(self, tmp_path, config_file):
        result = run_cli("run", "--config", config_file, "--out", tmp_path, "--stop-after", "ingest")

        assert result.exit_code == EXIT_OK, result.output
        assert ArtifactStore(tmp_path).stages() == ["ingest"]

    def test_run_reports_config_errors(self, tmp_path):
        result = run_cli("run", "--config", write_config(tmp_path, {"threads": 0}))

        assert result.exit_code == EXIT_CONFIG


@pytest.mark.slow
class TestEndToEnd:
    def test_every_stage_wrote_a_manifest(self, full_run):
        assert ArtifactStore(full_run).stages() == sorted(STAGES)

    def test_report_index(self, full_run):
        index = json.loads((full_run / "report/index.json").read_text(encoding="utf-8"))

        assert index["integrity"] == {}
        assert index["sweep_grids"] == ["attack/grids/forest.json", "attack/grids/tree.json"]
        assert "cv/zero_r.json" in index["cv_results"]
        assert (full_run / "report/summary.txt").read_text(encoding="utf-8").startswith("Experiment tiny")

    def test_defense_outputs(self, full_run):
        report = json.loads((full_run / "defense/report.json").read_text(encoding="utf-8"))

        assert set(report["victims"]) == {"forest", "tree"}
        for victim in ("forest", "tree"):
            for tag in ("pre", "post", "delta"):
                assert (full_run / f"defense/heatmaps/{victim}_{tag}.csv").is_file()

    def test_timings_only_in_manifests(self, full_run):
        summary = (full_run / "train/summary.json").read_text(encoding="utf-8")

        assert "timings" not in summary
        assert json.loads((full_run / "manifests/train.json").read_text(encoding="utf-8"))["timings"]

    def test_rerun_is_bitwise_identical(self, tmp_path, config_file, full_run):
        result = run_cli("run", "--config", config_file, "--out", tmp_path, "--threads", 3)

        assert result.exit_code == EXIT_OK, result.output
        for rel in COMPARED:
            assert (tmp_path / rel).read_bytes() == (full_run / rel).read_bytes(), rel

    def test_stale_config_is_rejected(self, tmp_path, full_run):
        changed = {**TINY, "seed": 6}
        result = run_cli("attack", "--config", write_config(tmp_path, changed), "--out", full_run)

        assert result.exit_code == EXIT_FAILURE

    def test_tampered_artifact_fails_report(self, tmp_path, config_file, full_run):
        copy = tmp_path / "run"
        shutil.copytree(full_run, copy)
        (copy / "attack/grids/tree.json").write_text("{}", encoding="utf-8")

        result = run_cli("report", "--config", config_file, "--out", copy)
        index = json.loads((copy / "report/index.json").read_text(encoding="utf-8"))

        assert result.exit_code == EXIT_FAILURE
        assert index["integrity"] == {"attack/grids/tree.json": "hash_mismatch"}
