import numpy as np
import pytest

from plantdx.dataset import FeatureTable
from plantdx.errors import EmptyMatrix, LabelOutOfRange, SingleClassInput, TooFewSamplesPerClass
from plantdx.evaluation import (
    ConfusionMatrix,
    auc,
    confusion,
    evaluate_model,
    kfold_assign,
    kfold_cv,
    metrics,
    read_confusion_csv,
    read_roc_csv,
    roc_curve,
    write_confusion_csv,
    write_roc_csv,
)
from plantdx.forest import ForestParams, fit_forest

from oracles import mann_whitney_auc


def test_confusion_examples():
    assert np.array_equal(confusion([0, 1, 2, 1], [0, 1, 2, 1], 3).counts, np.diag([1, 2, 1]))
    assert confusion([0, 0, 1, 1], [0, 1, 1, 1], 2).counts.tolist() == [[1, 1], [0, 2]]
    assert not confusion([], [], 3).counts.any()
    with pytest.raises(LabelOutOfRange):
        confusion([0, 3], [0, 1], 3)


def test_metrics_worked_example():
    rep = metrics(ConfusionMatrix(["a", "b"], np.array([[1, 1], [0, 2]])))
    assert rep.accuracy == 0.75
    assert rep.f1 == pytest.approx([2 / 3, 0.8], abs=1e-15)
    assert rep.macro_f1 == pytest.approx(11 / 15, abs=1e-15)
    assert rep.precision == [1.0, 2 / 3] and rep.recall == [0.5, 1.0]
    assert rep.weighted_f1 == pytest.approx(0.7333333333333334)
    assert rep.micro_f1 == rep.accuracy


def test_metrics_perfect_and_empty():
    rep = metrics(ConfusionMatrix(["a", "b", "c"], np.diag([3, 4, 5])))
    assert rep.accuracy == 1 and rep.f1 == [1, 1, 1]
    with pytest.raises(EmptyMatrix):
        metrics(ConfusionMatrix(["a"], np.zeros((1, 1), dtype=int)))


def test_metrics_empty_class_is_zero():
    rep = metrics(ConfusionMatrix(["a", "b"], np.array([[3, 0], [0, 0]])))
    assert rep.f1 == [1.0, 0.0] and rep.precision[1] == 0 and rep.recall[1] == 0


def test_micro_f1_equals_accuracy():
    rng = np.random.default_rng(0)
    for _ in range(200):
        k = int(rng.integers(2, 7))
        cm = rng.integers(0, 30, (k, k))
        cm[0, 0] += 1
        rep = metrics(ConfusionMatrix([str(i) for i in range(k)], cm))
        assert rep.micro_f1 == rep.accuracy == np.trace(cm) / cm.sum()
        assert rep.support == cm.sum(axis=1).tolist()


def test_relabeling_equivariance():
    rng = np.random.default_rng(1)
    for _ in range(50):
        k = int(rng.integers(2, 6))
        cm = rng.integers(0, 20, (k, k)) + np.eye(k, dtype=int)
        perm = rng.permutation(k)
        a = metrics(ConfusionMatrix([str(i) for i in range(k)], cm))
        b = metrics(ConfusionMatrix([str(i) for i in perm], cm[np.ix_(perm, perm)]))
        assert b.f1 == pytest.approx([a.f1[i] for i in perm], abs=1e-15)
        assert b.precision == pytest.approx([a.precision[i] for i in perm], abs=1e-15)
        assert b.accuracy == a.accuracy


def test_roc_examples():
    assert roc_curve([1, 1, 0, 0], [0.9, 0.8, 0.7, 0.6]) == [(0, 0), (0, 0.5), (0, 1), (0.5, 1), (1, 1)]
    flat = roc_curve([1, 0, 1], [0.4, 0.4, 0.4])
    assert flat == [(0, 0), (1, 1)] and auc(flat) == 0.5
    curve = roc_curve([1, 0, 1, 0], [0.9, 0.8, 0.7, 0.6])
    assert (0.5, 0.5) in curve and auc(curve) == 0.75
    assert auc(roc_curve([0, 0, 1], [0.1, 0.2, 0.3])) == 1.0
    with pytest.raises(SingleClassInput):
        roc_curve([1, 1], [0.1, 0.2])


def test_roc_shape_and_mann_whitney():
    rng = np.random.default_rng(2)
    for _ in range(1000):
        n = int(rng.integers(2, 30))
        labels = rng.integers(0, 2, n)
        labels[:2] = [0, 1]
        scores = rng.integers(0, 6, n) / 5.0  # coarse grid: plenty of ties
        curve = roc_curve(labels, scores)
        assert curve[0] == (0, 0) and curve[-1] == (1, 1)
        fpr = [p[0] for p in curve]
        tpr = [p[1] for p in curve]
        assert fpr == sorted(fpr) and tpr == sorted(tpr)
        assert abs(auc(curve) - float(mann_whitney_auc(labels.tolist(), scores.tolist()))) <= 1e-12


def test_kfold_partition_and_balance():
    labels = np.repeat([0, 1, 2, 3], 25)
    folds = kfold_assign(labels, 5, 3)
    assert sorted(np.bincount(folds)) == [20] * 5
    for c in range(4):
        per = np.bincount(folds[labels == c], minlength=5)
        assert per.max() - per.min() <= 1
    assert np.array_equal(kfold_assign(labels, 5, 3), folds)


def test_kfold_uneven_classes_balanced():
    rng = np.random.default_rng(4)
    for _ in range(100):
        k = int(rng.integers(2, 7))
        sizes = rng.integers(k, 4 * k, int(rng.integers(1, 5)))
        labels = np.repeat(np.arange(len(sizes)), sizes)
        folds = kfold_assign(labels, k, int(rng.integers(0, 1000)))
        assert set(folds.tolist()) == set(range(k))
        for c in range(len(sizes)):
            per = np.bincount(folds[labels == c], minlength=k)
            assert per.max() - per.min() <= 1
        total = np.bincount(folds, minlength=k)
        assert total.max() - total.min() <= 1


def test_kfold_too_few():
    with pytest.raises(TooFewSamplesPerClass):
        kfold_assign([0] * 10 + [1] * 3, 5, 0)


def _blobs(n_per=20, k=3, d=4, seed=0, spread=0.3):
    rng = np.random.default_rng(seed)
    X = np.concatenate([rng.normal(10.0 * c, spread, (n_per, d)) for c in range(k)])
    y = np.repeat(np.arange(k), n_per)
    return FeatureTable("Blobs", [f"c{c}" for c in range(k)], [f"f{j}" for j in range(d)], X, y)


def test_kfold_cv_separable():
    table = _blobs()
    cv = kfold_cv(table, ForestParams(n_trees=15), k=5, seed=1)
    assert cv.fold_accuracies == [1.0] * 5 and cv.mean_accuracy == 1.0
    assert all(v == 1.0 for v in cv.pooled.auc.values())
    again = kfold_cv(table, ForestParams(n_trees=15), k=5, seed=1)
    assert np.array_equal(again.folds, cv.folds) and again.fold_accuracies == cv.fold_accuracies


def test_kfold_cv_selection_refit_per_fold():
    calls = []

    def select(train):
        calls.append(len(train.y))
        return train.feature_names[:2]

    cv = kfold_cv(_blobs(), ForestParams(n_trees=5), k=4, select=select)
    assert calls == [45] * 4 and cv.selections == [["f0", "f1"]] * 4


def test_evaluate_on_training_data():
    table = _blobs(seed=3)
    model = fit_forest(table, ForestParams(n_trees=10))
    rep = evaluate_model(model, table)
    assert rep.accuracy == 1.0 and rep.micro_f1 == 1.0
    assert set(rep.roc) == {"c0", "c1", "c2"} and rep.macro_auc == 1.0
    assert rep.confusion.counts.sum(axis=1).tolist() == [20, 20, 20]


def test_confusion_and_roc_csv_round_trip(tmp_path):
    cm = ConfusionMatrix(["a", "b"], np.array([[1, 1], [0, 2]]))
    write_confusion_csv(cm, tmp_path / "c.csv")
    back = read_confusion_csv(tmp_path / "c.csv")
    assert back.labels == cm.labels and np.array_equal(back.counts, cm.counts)
    curve = roc_curve([1, 0, 1, 0], [0.9, 0.8, 0.7, 0.6])
    write_roc_csv(curve, tmp_path / "r.csv")
    assert read_roc_csv(tmp_path / "r.csv") == curve
