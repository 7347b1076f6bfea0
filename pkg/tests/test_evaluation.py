"""
Tests for confusion matrices, precision / recall / F1 and cross-validation.
"""
import numpy as np
import pytest

from src.data.tables import Dataset
from src.evaluation.cross_validation import CvResult, cross_validate, fold_indices
from src.evaluation.metrics import METRIC_KEYS, ConfusionMatrix, MetricsReport, confusion, evaluate, prf
from src.models.baselines import fit_zero_r
from src.models.config import ModelKind
from src.utils.errors import EvaluationError

FOREST_COUNTS = ((2840, 6149), (1240, 21122))


class TestConfusion:
    def test_counts_actual_by_predicted(self):
        cm = confusion(np.array([0, 0, 1, 1, 1]), np.array([0, 1, 1, 1, 0]))

        assert cm.to_list() == [[1, 1], [1, 2]]
        assert cm.total == 5
        assert (cm.tp(1), cm.fp(1), cm.fn(1), cm.tn(1)) == (2, 1, 1, 1)

    def test_length_mismatch(self):
        with pytest.raises(EvaluationError):
            confusion(np.array([0, 1]), np.array([0]))

    def test_label_outside_binary(self):
        with pytest.raises(EvaluationError):
            confusion(np.array([0, 2]), np.array([0, 1]))

    def test_addition(self):
        total = ConfusionMatrix(((1, 2), (3, 4))) + ConfusionMatrix(((10, 20), (30, 40)))

        assert total.to_list() == [[11, 22], [33, 44]]

    def test_rejects_negative_counts(self):
        with pytest.raises(EvaluationError):
            ConfusionMatrix(((1, -1), (0, 0)))


class TestPrf:
    def test_hand_computed_forest_counts(self):
        report = prf(ConfusionMatrix(FOREST_COUNTS))
        p1, r1 = 21122 / 27271, 21122 / 22362
        p0, r0 = 2840 / 4080, 2840 / 8989
        f1_1 = 2 * p1 * r1 / (p1 + r1)
        f1_0 = 2 * p0 * r0 / (p0 + r0)

        assert report.precision[1] == pytest.approx(p1, abs=1e-6)
        assert report.recall[1] == pytest.approx(r1, abs=1e-6)
        assert report.f1[1] == pytest.approx(f1_1, abs=1e-6)
        assert report.f1[1] == pytest.approx(0.851127, abs=1e-6)
        assert report.precision[0] == pytest.approx(p0, abs=1e-6)
        assert report.recall[0] == pytest.approx(r0, abs=1e-6)
        assert report.support == (8989, 22362)
        assert report.weighted_f1 == pytest.approx((f1_0 * 8989 + f1_1 * 22362) / 31351, abs=1e-6)
        assert report.macro_f1 == pytest.approx((f1_0 + f1_1) / 2, abs=1e-6)

    def test_zero_denominators_are_zero(self):
        report = prf(ConfusionMatrix(((0, 5), (0, 5))))

        assert report.precision[0] == 0.0
        assert report.recall[0] == 0.0
        assert report.f1[0] == 0.0
        assert report.recall[1] == 1.0

    def test_empty_matrix(self):
        report = prf(ConfusionMatrix(((0, 0), (0, 0))))

        assert report.weighted_f1 == 0.0

    def test_dict_keys(self):
        payload = prf(ConfusionMatrix(FOREST_COUNTS)).to_dict()

        assert set(METRIC_KEYS) <= set(payload)
        assert {"macro_precision", "macro_recall", "macro_f1"} <= set(payload)
        assert MetricsReport.from_dict(payload) == prf(ConfusionMatrix(FOREST_COUNTS))

    def test_evaluate(self, train_ds):
        model = fit_zero_r(train_ds)
        cm, report = evaluate(model, train_ds)

        assert cm.total == train_ds.n
        assert report.support == (int((train_ds.labels == 0).sum()), int((train_ds.labels == 1).sum()))


class TestFolds:
    def test_partition_and_sizes(self):
        folds = fold_indices(23, 5, seed=1)
        sizes = sorted(len(f) for f in folds)

        assert sizes == [4, 4, 5, 5, 5]
        assert sorted(np.concatenate(folds).tolist()) == list(range(23))

    def test_deterministic(self):
        a = fold_indices(30, 3, seed=4)
        b = fold_indices(30, 3, seed=4)

        for x, y in zip(a, b):
            np.testing.assert_array_equal(x, y)

    @pytest.mark.parametrize("k,n", [(1, 10), (11, 10)])
    def test_invalid_k(self, k, n):
        with pytest.raises(EvaluationError):
            fold_indices(n, k, seed=0)


class TestCrossValidate:
    def test_pooled_confusion_covers_every_row(self, train_ds):
        result = cross_validate(ModelKind.NAIVE_BAYES, train_ds, k=5, seed=3)

        assert result.k == 5
        assert len(result.fold_confusions) == 5
        assert result.pooled.total == train_ds.n
        assert result.aggregate == prf(result.pooled)

    def test_zero_r_recall_equals_majority_prevalence(self, train_ds):
        result = cross_validate(ModelKind.ZERO_R, train_ds, k=10, seed=0)
        prevalence = max(np.mean(train_ds.labels), 1 - np.mean(train_ds.labels))

        assert result.aggregate.weighted_recall == pytest.approx(prevalence)

    def test_threads_do_not_change_results(self, train_ds, fast_config):
        serial = cross_validate(ModelKind.TREE, train_ds, k=4, seed=2, cfg=fast_config, threads=1)
        parallel = cross_validate(ModelKind.TREE, train_ds, k=4, seed=2, cfg=fast_config, threads=4)

        assert serial.to_dict() == parallel.to_dict()

    def test_dict_round_trip(self, train_ds):
        result = cross_validate(ModelKind.NAIVE_BAYES, train_ds, k=3, seed=1)
        restored = CvResult.from_dict(result.to_dict())

        assert restored == result
        assert result.to_dict()["aggregation"] == "pooled_confusion"

    def test_too_many_folds(self):
        ds = Dataset(np.zeros((3, 1)), np.array([0, 1, 0]))
        with pytest.raises(EvaluationError):
            cross_validate(ModelKind.ZERO_R, ds, k=5)
