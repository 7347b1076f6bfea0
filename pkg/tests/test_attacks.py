"""
Tests for FGSM, JSMA, the random baseline, adversarial sets and sweeps.
"""
import numpy as np
import pytest
from pydantic import ValidationError

from src.attacks.baseline import flip_rate, random_flip_rate, random_perturbation, random_perturbation_batch
from src.attacks.config import AttackConfig, AttackMethod, Direction, jsma_budget
from src.attacks.crafting import (
    craft_adversarial_testset,
    load_adversarial_set,
    perturbation_example,
    save_adversarial_set,
    surrogate_flip_rate,
    transfer_confusion,
    transfer_evaluate,
)
from src.attacks.fgsm import fgsm, fgsm_batch
from src.attacks.jsma import (
    STOP_ALREADY_TARGET,
    STOP_BUDGET,
    STOP_NO_SALIENCY,
    STOP_TARGET_REACHED,
    jsma,
    jsma_batch,
    saliency_map,
)
from src.attacks.sweep import SweepGrid, fgsm_sweep, sweep
from src.data.tables import BENIGN, MALICIOUS
from src.models.forest import fit_forest
from src.models.mlp import init_mlp, mlp_input_gradient
from src.models.tree import fit_tree
from src.utils.errors import AttackError

STOP_REASONS = {STOP_ALREADY_TARGET, STOP_BUDGET, STOP_NO_SALIENCY, STOP_TARGET_REACHED}


@pytest.fixture(scope="module")
def victims(train_ds, fast_config):
    return {"forest": fit_forest(train_ds, fast_config), "tree": fit_tree(train_ds, fast_config)}


@pytest.fixture(scope="module")
def malicious_rows(test_ds):
    return test_ds.features[test_ds.labels == MALICIOUS]


def random_surrogate(rng, d):
    model = init_mlp(d, int(rng.integers(4, 12)), rng)
    model.b1 = rng.normal(0.0, 0.3, size=model.b1.shape)
    return model


class TestAttackConfig:
    @pytest.mark.parametrize("theta,d,expected", [(0.3, 10, 3), (0.1, 8, 1), (0.05, 4, 1), (1.0, 7, 7), (0.2, 128, 26)])
    def test_budget(self, theta, d, expected):
        assert jsma_budget(theta, d) == expected

    def test_jsma_needs_theta_and_gamma(self):
        with pytest.raises(ValidationError):
            AttackConfig(method=AttackMethod.JSMA, theta=0.2)

    def test_fgsm_needs_epsilon(self):
        with pytest.raises(ValidationError):
            AttackConfig(method=AttackMethod.FGSM)

    @pytest.mark.parametrize("theta", [0.0, 1.5])
    def test_theta_range(self, theta):
        with pytest.raises(ValidationError):
            AttackConfig.jsma(theta, 0.3)

    def test_labels(self):
        assert AttackConfig.jsma(0.2, 0.4).label == "jsma(theta=0.2,gamma=0.4)"
        assert AttackConfig.fgsm(0.1).label == "fgsm(eps=0.1)"


class TestSaliency:
    def test_worked_example(self):
        jac = np.array([[-0.2, 0.1, 0.0], [0.2, -0.1, 0.0]])
        smap = saliency_map(jac, target=1, direction=Direction.INCREASE)

        np.testing.assert_allclose(smap.scores, [0.04, 0.0, 0.0])
        assert smap.best == 0

    def test_default_direction_is_both(self):
        jac = np.array([[-0.2, 0.1, 0.0], [0.2, -0.1, 0.0]])

        np.testing.assert_array_equal(
            saliency_map(jac, target=1).scores, saliency_map(jac, target=1, direction=Direction.BOTH).scores
        )
        assert AttackConfig.jsma(0.2, 0.4).direction is Direction.BOTH

    def test_both_directions(self):
        jac = np.array([[-0.2, 0.1, 0.0], [0.2, -0.1, 0.0]])
        smap = saliency_map(jac, target=1)

        np.testing.assert_allclose(smap.scores, [0.04, 0.01, 0.0])
        np.testing.assert_array_equal(smap.direction[:2], [1, -1])

    def test_decrease_only(self):
        jac = np.array([[-0.2, 0.1, 0.0], [0.2, -0.1, 0.0]])
        smap = saliency_map(jac, target=1, direction="decrease")

        np.testing.assert_allclose(smap.scores, [0.0, 0.01, 0.0])

    def test_excluded_features_score_zero(self):
        jac = np.array([[-0.2, 0.1], [0.2, -0.1]])
        smap = saliency_map(jac, target=1, excluded=[0])

        assert smap.scores[0] == 0.0
        assert smap.best == 1

    def test_saturated_features_cannot_move_further(self):
        jac = np.array([[-0.2, 0.1], [0.2, -0.1]])
        smap = saliency_map(jac, target=1, x=np.array([1.0, 0.0]))

        assert smap.best is None

    def test_target_must_be_binary(self):
        with pytest.raises(AttackError):
            saliency_map(np.zeros((2, 3)), target=2)


class TestJsma:
    def test_budget_and_box_over_random_invocations(self):
        rng = np.random.default_rng(99)
        model = None
        for i in range(1000):
            if i % 50 == 0:
                d = int(rng.integers(2, 13))
                model = random_surrogate(rng, d)
            theta = float(rng.uniform(0.01, 1.0))
            gamma = float(rng.uniform(0.01, 1.0))
            x = rng.random(d)

            x_adv, log = jsma(model, x, MALICIOUS, theta, gamma)

            changed = np.flatnonzero(x_adv != x)
            assert len(changed) <= jsma_budget(theta, d)
            assert x_adv.min() >= 0.0 and x_adv.max() <= 1.0
            assert np.abs(x_adv - x).max() <= gamma + 1e-12
            assert set(changed) <= set(log.features)
            assert log.stop_reason in STOP_REASONS

    def test_batch_matches_single_rows(self):
        rng = np.random.default_rng(5)
        model = random_surrogate(rng, 6)
        X = rng.random((20, 6))

        X_adv, logs = jsma_batch(model, X, 0.5, 0.3)
        for i in range(20):
            x_adv, log = jsma(model, X[i], MALICIOUS, 0.5, 0.3)
            np.testing.assert_array_equal(X_adv[i], x_adv)
            assert logs[i] == log

    def test_rows_already_at_target_are_untouched(self, surrogate, test_ds):
        X = test_ds.features
        benign_rows = X[surrogate.predict(X) == BENIGN][:5]

        X_adv, logs = jsma_batch(surrogate, benign_rows, 0.5, 0.5)

        np.testing.assert_array_equal(X_adv, benign_rows)
        assert all(log.stop_reason == STOP_ALREADY_TARGET and log.n_changed == 0 for log in logs)

    def test_attacking_toward_own_class(self, surrogate, test_ds):
        with pytest.raises(AttackError):
            jsma(surrogate, test_ds.features[0], BENIGN, 0.2, 0.2)

    def test_each_feature_changes_once(self, surrogate, malicious_rows):
        _, logs = jsma_batch(surrogate, malicious_rows, 0.9, 0.1)

        for log in logs:
            assert len(set(log.features)) == len(log.features)

    def test_reached_rows_are_benign_for_the_surrogate(self, surrogate, malicious_rows):
        X_adv, logs = jsma_batch(surrogate, malicious_rows, 0.5, 0.5)
        reached = [i for i, log in enumerate(logs) if log.stop_reason == STOP_TARGET_REACHED]

        assert reached
        assert (surrogate.predict(X_adv[reached]) == BENIGN).all()

    def test_larger_theta_never_changes_fewer_features(self, surrogate, malicious_rows):
        for x in malicious_rows[:10]:
            counts = [jsma(surrogate, x, MALICIOUS, theta, 0.3)[1].n_changed for theta in (0.1, 0.3, 0.6, 1.0)]

            assert counts == sorted(counts)

    def test_invalid_parameters(self, surrogate, malicious_rows):
        with pytest.raises(AttackError):
            jsma_batch(surrogate, malicious_rows, 0.0, 0.3)

    def test_beats_random_same_budget_perturbation(self, surrogate, malicious_rows):
        rng = np.random.default_rng(0)
        for theta in (0.1, 0.3, 0.5, 0.9):
            for gamma in (0.3, 0.6, 0.9):
                X_adv, _ = jsma_batch(surrogate, malicious_rows, theta, gamma)
                attack = flip_rate(surrogate, X_adv)
                baseline = random_flip_rate(surrogate, malicious_rows, theta, gamma, rng, trials=100)

                assert attack > baseline, f"theta={theta} gamma={gamma}: {attack} <= {baseline}"


class TestFgsm:
    def test_step_bounded_by_epsilon(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            d = int(rng.integers(2, 10))
            model = random_surrogate(rng, d)
            X = rng.random((10, d))
            y = rng.integers(0, 2, size=10)
            eps = float(rng.uniform(0.01, 0.5))

            X_adv = fgsm_batch(model, X, y, eps)

            assert np.abs(X_adv - X).max() <= eps + 1e-12
            assert X_adv.min() >= 0.0 and X_adv.max() <= 1.0

    def test_follows_gradient_sign(self, surrogate, test_ds):
        x, y = test_ds.features[0], int(test_ds.labels[0])
        grad = surrogate.input_gradients(x[None, :], np.array([y]))[0]

        expected = np.clip(x + 0.05 * np.sign(grad), 0.0, 1.0)
        np.testing.assert_array_equal(fgsm(surrogate, x, y, 0.05), expected)

    def test_zero_gradient_feature_is_untouched(self):
        rng = np.random.default_rng(12)
        model = random_surrogate(rng, 4)
        model.W1[2, :] = 0.0
        x = rng.random(4)

        assert mlp_input_gradient(model, x, MALICIOUS)[2] == 0.0
        assert fgsm(model, x, MALICIOUS, 0.3)[2] == x[2]

    def test_zero_epsilon_is_identity(self, surrogate, test_ds):
        X = test_ds.features[:4]

        np.testing.assert_array_equal(fgsm_batch(surrogate, X, test_ds.labels[:4], 0.0), X)

    def test_negative_epsilon(self, surrogate, test_ds):
        with pytest.raises(AttackError):
            fgsm_batch(surrogate, test_ds.features[:1], test_ds.labels[:1], -0.1)


class TestRandomBaseline:
    def test_changes_exactly_budget_features(self):
        rng = np.random.default_rng(1)
        x = np.full(10, 0.5)
        out = random_perturbation(x, 4, 0.3, rng)

        assert np.count_nonzero(out != x) == 4
        np.testing.assert_allclose(np.abs(out - x)[out != x], 0.3)

    def test_rows_draw_independent_features(self):
        rng = np.random.default_rng(2)
        X = np.full((50, 10), 0.5)
        out = random_perturbation_batch(X, 1, 0.2, rng)

        assert len({int(np.flatnonzero(row != 0.5)[0]) for row in out}) > 1


class TestAdversarialSet:
    @pytest.fixture(scope="class")
    def adv(self, surrogate, test_ds):
        return craft_adversarial_testset(surrogate, test_ds, AttackConfig.jsma(0.3, 0.3))

    def test_only_malicious_rows_change(self, adv, test_ds):
        benign = test_ds.labels == BENIGN

        np.testing.assert_array_equal(adv.features[benign], test_ds.features[benign])
        np.testing.assert_array_equal(adv.labels, test_ds.labels)
        np.testing.assert_array_equal(adv.origin_mask, test_ds.labels == MALICIOUS)
        np.testing.assert_array_equal(adv.data.row_ids, test_ds.row_ids)

    def test_budget_holds_for_every_row(self, adv, test_ds):
        assert adv.changed_counts().max() <= jsma_budget(0.3, test_ds.d)
        assert adv.summary()["perturbed_rows"] == int((test_ds.labels == MALICIOUS).sum())

    def test_threads_do_not_change_the_set(self, surrogate, test_ds, adv):
        again = craft_adversarial_testset(surrogate, test_ds, AttackConfig.jsma(0.3, 0.3), threads=4)

        np.testing.assert_array_equal(again.features, adv.features)
        assert again.logs == adv.logs

    def test_fgsm_set(self, surrogate, test_ds):
        adv = craft_adversarial_testset(surrogate, test_ds, AttackConfig.fgsm(0.1))
        benign = test_ds.labels == BENIGN

        np.testing.assert_array_equal(adv.features[benign], test_ds.features[benign])
        assert np.abs(adv.features - test_ds.features).max() <= 0.1 + 1e-12

    def test_no_malicious_rows(self, surrogate, test_ds):
        benign_only = test_ds.subset(np.flatnonzero(test_ds.labels == BENIGN))
        with pytest.raises(AttackError):
            craft_adversarial_testset(surrogate, benign_only, AttackConfig.jsma(0.2, 0.2))

    def test_transfer_metrics(self, adv, victims, test_ds):
        cm = transfer_confusion(victims["tree"], adv)
        report = transfer_evaluate(victims["tree"], adv)

        assert cm.total == test_ds.n
        assert 0.0 <= report.weighted_f1 <= 1.0
        assert report.support == (int((test_ds.labels == BENIGN).sum()), int((test_ds.labels == MALICIOUS).sum()))

    def test_surrogate_flip_rate(self, adv, surrogate):
        rate = surrogate_flip_rate(surrogate, adv)
        perturbed = adv.perturbed_indices

        assert rate == pytest.approx(np.mean(surrogate.predict(adv.features[perturbed]) == BENIGN))
        assert rate > 0.0

    def test_file_round_trip(self, adv, tmp_path):
        path = tmp_path / "adv.csv"
        sidecar = save_adversarial_set(adv, path)
        loaded = load_adversarial_set(path)

        assert sidecar.name == "adv.csv.json"
        assert np.array_equal(loaded.features, adv.features)
        np.testing.assert_array_equal(loaded.origin_mask, adv.origin_mask)
        assert loaded.logs == adv.logs
        assert loaded.config == adv.config
        assert loaded.data.schema_fingerprint == adv.data.schema_fingerprint

    def test_perturbation_example(self, surrogate, test_ds, schema):
        sets = [
            craft_adversarial_testset(surrogate, test_ds, AttackConfig.jsma(0.1, 0.3)),
            craft_adversarial_testset(surrogate, test_ds, AttackConfig.jsma(0.3, 0.2)),
        ]
        frame = perturbation_example(test_ds, sets, schema)
        position = int(np.flatnonzero(test_ds.row_ids == frame.attrs["row_id"])[0])

        assert list(frame.columns[:2]) == ["original", "original_raw"]
        assert "jsma(theta=0.1,gamma=0.3)" in frame.columns
        assert "jsma(theta=0.3,gamma=0.2)_raw" in frame.columns
        assert test_ds.labels[position] == MALICIOUS
        assert 1 <= len(frame) <= jsma_budget(0.1, test_ds.d) + jsma_budget(0.3, test_ds.d)

    def test_rejects_perturbed_benign_rows(self, adv):
        mask = np.ones(adv.n, dtype=bool)
        with pytest.raises(AttackError):
            type(adv)(adv.data, mask, adv.config, adv.logs)


class TestSweep:
    THETAS = (0.1, 0.3)
    GAMMAS = (0.2, 0.5)

    @pytest.fixture(scope="class")
    def grids(self, victims, surrogate, test_ds):
        return sweep(victims, surrogate, test_ds, self.THETAS, self.GAMMAS)

    def test_shape_and_bounds(self, grids, test_ds):
        assert set(grids) == {"forest", "tree"}
        for grid in grids.values():
            assert grid.f1.shape == (2, 2)
            assert ((grid.f1 >= 0) & (grid.f1 <= 1)).all()
            assert grid.confusion_at(0.3, 0.5).total == test_ds.n
            assert grid.n_cells == 4

    def test_cells_match_single_crafting(self, grids, victims, surrogate, test_ds):
        adv = craft_adversarial_testset(surrogate, test_ds, AttackConfig.jsma(0.3, 0.2))

        assert grids["tree"].cell(0.3, 0.2) == transfer_evaluate(victims["tree"], adv).weighted_f1
        assert grids["tree"].flip_rates[1, 0] == surrogate_flip_rate(surrogate, adv)

    def test_baseline_is_clean_f1(self, grids, victims, test_ds):
        clean = (victims["forest"].predict(test_ds) == test_ds.labels)

        assert grids["forest"].baseline_confusion.total == test_ds.n
        assert grids["forest"].baseline_confusion.array.trace() == int(clean.sum())

    def test_worst_cell(self, grids):
        grid = grids["tree"]
        theta, gamma, f1 = grid.worst_cell()

        assert f1 == grid.f1.min()
        assert grid.cell(theta, gamma) == f1

    def test_threads_do_not_change_the_grid(self, grids, victims, surrogate, test_ds):
        again = sweep(victims, surrogate, test_ds, self.THETAS, self.GAMMAS, threads=4)

        for name in grids:
            assert again[name].to_dict() == grids[name].to_dict()

    def test_victim_list_is_keyed_by_kind(self, victims, surrogate, test_ds):
        grids = sweep([victims["tree"]], surrogate, test_ds, (0.1,), (0.2,))

        assert list(grids) == ["tree"]

    def test_heatmap_frame(self, grids):
        frame = grids["forest"].to_frame()

        assert list(frame.index) == ["0.1", "0.3"]
        assert list(frame.columns) == ["0.2", "0.5"]
        assert frame.index.name == "theta"

    def test_dict_round_trip(self, grids):
        restored = SweepGrid.from_dict(grids["tree"].to_dict())

        assert restored.to_dict() == grids["tree"].to_dict()

    def test_off_grid_cell(self, grids):
        with pytest.raises(AttackError):
            grids["tree"].cell(0.9, 0.9)

    def test_empty_axis(self, victims, surrogate, test_ds):
        with pytest.raises(AttackError):
            sweep(victims, surrogate, test_ds, (), (0.1,))

    def test_fgsm_curves(self, victims, surrogate, test_ds):
        curves = fgsm_sweep(victims, surrogate, test_ds, [0.05, 0.2])

        assert set(curves) == {"forest", "tree"}
        assert curves["tree"].epsilons == (0.05, 0.2)
        assert len(curves["tree"].f1) == 2
        assert list(curves["tree"].to_frame().columns) == ["f1", "surrogate_flip_rate"]
