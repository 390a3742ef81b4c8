import json

import numpy as np
import pytest

from mgembed.classifiers import KNN, ClassifierConfig, as_dataset, fit
from mgembed.errors import DataError
from mgembed.evaluation import (classification_report, confusion, evaluate_scores,
                                learning_curve, mann_whitney_auc, render_summary, render_table,
                                render_text, roc_auc, roc_curve, threshold_sweep, write_report)


def hand_report(y_true, y_pred):
    """Plain-loop reference: per-class (precision, recall, f1, support)."""
    out = {}
    for c in (0, 1):
        tp = sum(1 for t, p in zip(y_true, y_pred) if t == c and p == c)
        fp = sum(1 for t, p in zip(y_true, y_pred) if t != c and p == c)
        fn = sum(1 for t, p in zip(y_true, y_pred) if t == c and p != c)
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        out[c] = (prec, rec, f1, tp + fn)
    return out


def report_matches_oracle(y, p):
    rep = classification_report(y, p)
    ref = hand_report(y.tolist(), p.tolist())
    tn = sum(1 for t, q in zip(y, p) if t == 0 and q == 0)
    tp = sum(1 for t, q in zip(y, p) if t == 1 and q == 1)
    ok = (rep.tn, rep.tp, rep.tn + rep.fp + rep.fn + rep.tp) == (tn, tp, len(y))
    for c in (0, 1):
        cm = rep.per_class[c]
        ok &= (cm.precision, cm.recall, cm.f1, cm.support) == ref[c]
    n = len(y)
    ok &= rep.macro_avg.precision == (ref[0][0] + ref[1][0]) / 2
    ok &= rep.weighted_avg.precision == (ref[0][0] * ref[0][3] + ref[1][0] * ref[1][3]) / n
    return bool(ok)


def fuzz_labels(rng):
    n = int(rng.integers(1, 60))
    y = rng.integers(0, 2, n)
    p = np.where(rng.random(n) < rng.random(), y, 1 - y)
    return y, p


def fuzz_scores(rng, n=200):
    y = rng.integers(0, 2, n)
    y[:2] = [0, 1]
    # coarse grid so that ties occur within and across classes
    s = np.round(rng.random(n) + 0.3 * y, int(rng.integers(1, 4)))
    return y, s


def test_report_matches_hand_counting(rng):
    assert all(report_matches_oracle(*fuzz_labels(rng)) for _ in range(20))


def test_report_examples():
    rep = classification_report([1, 1, 1, 1, 0], [1, 1, 1, 0, 1])
    c1 = rep.per_class[1]
    assert (c1.precision, c1.recall, c1.f1) == (0.75, 0.75, 0.75)
    perfect = classification_report([0, 1, 1], [0, 1, 1])
    assert perfect.macro_avg.f1 == perfect.weighted_avg.precision == 1.0


def test_undefined_precision_flagged():
    rep = classification_report([0, 1, 1], [0, 0, 0])
    assert rep.per_class[1].precision == 0.0
    assert rep.flags == ["1.precision"]


def test_report_errors():
    with pytest.raises(DataError):
        classification_report([], [])
    with pytest.raises(DataError):
        classification_report([0, 1], [0])
    with pytest.raises(DataError):
        confusion([0, 2], [0, 1])


def test_report_invariants(rng):
    for _ in range(30):
        y, p = fuzz_labels(rng)
        rep = classification_report(y, p)
        assert rep.weighted_avg.recall == pytest.approx(rep.accuracy, abs=1e-12)
        swapped = classification_report(1 - y, 1 - p)
        for c in (0, 1):
            a, b = rep.per_class[c], swapped.per_class[1 - c]
            assert (a.precision, a.recall, a.f1, a.support) == (b.precision, b.recall, b.f1, b.support)
        for cm in rep.per_class.values():
            assert 0 <= cm.precision <= 1 and 0 <= cm.recall <= 1


def test_auc_matches_mann_whitney(rng):
    for _ in range(20):
        y, s = fuzz_scores(rng)
        assert abs(roc_auc(y, s)[0] - mann_whitney_auc(y, s)) <= 1e-12


def test_auc_examples():
    y = np.array([0, 1, 1, 0, 1])
    assert roc_auc(y, y.astype(float))[0] == 1.0
    assert roc_auc(y, np.full(5, 0.3))[0] == 0.5
    with pytest.raises(DataError):
        roc_auc([1, 1], [0.1, 0.2])


def test_auc_of_negated_scores(rng):
    y = rng.integers(0, 2, 100)
    y[:2] = [0, 1]
    s = rng.random(100)
    assert roc_auc(y, s)[0] + roc_auc(y, -s)[0] == pytest.approx(1.0, abs=1e-12)


def test_roc_shape(rng):
    y, s = fuzz_scores(rng)
    roc = roc_curve(y, s)
    assert tuple(roc[0]) == (0.0, 0.0, np.inf) and tuple(roc[-1, :2]) == (1.0, 1.0)
    assert np.all(np.diff(roc[:, 0]) >= 0) and np.all(np.diff(roc[:, 1]) >= 0)
    assert len(roc) == len(np.unique(s)) + 1


def test_threshold_sweep_rows():
    rows = threshold_sweep([0, 1, 1, 0], [0.2, 0.9, 0.6, 0.7], [0.5, 0.8, 0.95])
    assert rows[0] == (0.5, 2 / 3, 1.0, True)
    assert rows[1] == (0.8, 1.0, 0.5, True)
    assert rows[2][3] is False


def test_rendering(tmp_path):
    rep = evaluate_scores([0, 1, 1, 0], [0.1, 0.8, 0.4, 0.3])
    text = render_text(rep)
    assert "auc=1.0\n" in text and "class1.recall=0.5\n" in text
    assert json.loads(render_summary(rep))["tp"] == 1
    assert "auc 100" in render_table(rep)
    write_report(rep, tmp_path / "r", tmp_path / "roc.csv")
    assert (tmp_path / "roc.csv").read_text().startswith("fpr,tpr,threshold\n0.0,0.0,inf\n")
    assert (tmp_path / "r").read_text().splitlines()[-1].startswith("summary={")


def knn_fit(ds):
    return fit(ds, ClassifierConfig(kind=KNN, k=1, standardize=False))


def test_learning_curve_memorizer(rng):
    x = rng.normal(size=(200, 3))
    ds = as_dataset(x, (x[:, 0] > 0).astype(int))
    pts = learning_curve(knn_fit, ds, [0.2, 0.5, 1.0], folds=5, seed=0)
    assert [p.train_mean for p in pts] == [1.0, 1.0, 1.0]
    assert pts[-1].cv_mean > 0.8 and pts[0].n_train < pts[-1].n_train


def test_learning_curve_null_signal(rng):
    from mgembed.classifiers import LOGREG
    x = rng.normal(size=(500, 3))
    y = (rng.random(500) < 0.8).astype(int)
    ds = as_dataset(x, y)
    pts = learning_curve(lambda d: fit(d, ClassifierConfig(kind=LOGREG)), ds, [0.5, 1.0])
    for p in pts:
        assert abs(p.cv_mean - y.mean()) < 0.05 and abs(p.train_mean - y.mean()) < 0.05


def test_learning_curve_errors(rng):
    ds = as_dataset(rng.normal(size=(20, 2)), np.tile([0, 1], 10))
    with pytest.raises(DataError):
        learning_curve(knn_fit, ds, [0.0])
    with pytest.raises(DataError):
        learning_curve(knn_fit, ds, [0.05])
