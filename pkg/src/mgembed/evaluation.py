"""Binary classification metrics, ROC/AUC and learning curves."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .dataset import stratified_kfold
from .errors import DataError


@dataclass
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int
    undefined: tuple = ()  # names of metrics reported as 0 because undefined


@dataclass
class MetricsReport:
    tn: int
    fp: int
    fn: int
    tp: int
    per_class: dict
    macro_avg: ClassMetrics
    weighted_avg: ClassMetrics
    auc: float | None = None
    roc: np.ndarray | None = None  # rows (fpr, tpr, threshold)
    extra: dict = field(default_factory=dict)

    @property
    def accuracy(self):
        return (self.tp + self.tn) / (self.tp + self.tn + self.fp + self.fn)

    @property
    def flags(self):
        return [f"{c}.{m}" for c, cm in self.per_class.items() for m in cm.undefined]


def _binary(y, name):
    y = np.asarray(y)
    if y.ndim != 1:
        raise DataError(f"{name} must be one-dimensional")
    if not np.isin(y, (0, 1)).all():
        raise DataError(f"{name} must be binary 0/1")
    return y.astype(np.int64)


def confusion(y_true, y_pred):
    """``(tn, fp, fn, tp)``."""
    y_true, y_pred = _binary(y_true, "y_true"), _binary(y_pred, "y_pred")
    counts = np.bincount(2 * y_true + y_pred, minlength=4)
    return tuple(int(c) for c in counts)


def _ratio(num, den):
    return (num / den, False) if den else (0.0, True)


def _class_metrics(tp, fp, fn):
    p, p_undef = _ratio(tp, tp + fp)
    r, r_undef = _ratio(tp, tp + fn)
    f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
    undefined = tuple(n for n, u in (("precision", p_undef), ("recall", r_undef)) if u)
    return ClassMetrics(p, r, f1, tp + fn, undefined)


def classification_report(y_true, y_pred):
    """Per-class precision/recall/F1 with macro and support-weighted averages.

    A metric whose denominator is zero is reported as 0 and named in
    ``ClassMetrics.undefined``.
    """
    y_true, y_pred = np.asarray(y_true), np.asarray(y_pred)
    if len(y_true) == 0:
        raise DataError("empty input")
    if len(y_true) != len(y_pred):
        raise DataError("y_true and y_pred differ in length")
    tn, fp, fn, tp = confusion(y_true, y_pred)
    per = {1: _class_metrics(tp, fp, fn), 0: _class_metrics(tn, fn, fp)}
    per = {0: per[0], 1: per[1]}
    n = tn + fp + fn + tp
    keys = ("precision", "recall", "f1")
    macro = ClassMetrics(*(float(np.mean([getattr(per[c], k) for c in (0, 1)])) for k in keys), n)
    weighted = ClassMetrics(*(sum(getattr(per[c], k) * per[c].support for c in (0, 1)) / n for k in keys), n)
    return MetricsReport(tn, fp, fn, tp, per, macro, weighted)


def roc_curve(y_true, scores):
    """ROC points ``(fpr, tpr, threshold)`` sweeping every distinct score.

    The first row is ``(0, 0, inf)``; tied scores move together in one step.
    """
    y = _binary(y_true, "y_true")
    s = np.asarray(scores, dtype=np.float64)
    if len(s) != len(y):
        raise DataError("labels and scores differ in length")
    if not np.isfinite(s).all():
        raise DataError("scores must be finite")
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataError("ROC needs both classes in y_true")
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    last = np.r_[np.flatnonzero(np.diff(s)), len(s) - 1]
    tps = np.cumsum(y)[last]
    fps = (last + 1) - tps
    fpr = np.r_[0.0, fps / n_neg]
    tpr = np.r_[0.0, tps / n_pos]
    thr = np.r_[np.inf, s[last]]
    return np.column_stack([fpr, tpr, thr])


def roc_auc(y_true, scores):
    """``(auc, roc_points)`` with the AUC from the trapezoidal rule."""
    roc = roc_curve(y_true, scores)
    return float(np.trapezoid(roc[:, 1], roc[:, 0])), roc


def mann_whitney_auc(y_true, scores):
    """O(n^2) pairwise ranking probability with ties counting one half."""
    y = np.asarray(y_true)
    s = np.asarray(scores, dtype=np.float64)
    pos, neg = s[y == 1], s[y == 0]
    diff = pos[:, None] - neg[None, :]
    return float(((diff > 0).sum() + 0.5 * (diff == 0).sum()) / (len(pos) * len(neg)))


def evaluate_scores(y_true, scores, threshold=0.5):
    """Threshold metrics plus AUC for a score vector."""
    y_pred = (np.asarray(scores) >= threshold).astype(np.int64)
    rep = classification_report(y_true, y_pred)
    rep.auc, rep.roc = roc_auc(y_true, scores)
    rep.extra["threshold"] = threshold
    return rep


def threshold_sweep(y_true, scores, thresholds):
    """Rows ``(t, precision_1, recall_1, defined)`` per threshold."""
    rows = []
    for t in thresholds:
        rep = classification_report(y_true, (np.asarray(scores) >= t).astype(np.int64))
        c1 = rep.per_class[1]
        rows.append((float(t), c1.precision, c1.recall, "precision" not in c1.undefined))
    return rows


# -- learning curve --------------------------------------------------------

@dataclass
class CurvePoint:
    fraction: float
    n_train: int
    train_mean: float
    train_sd: float
    cv_mean: float
    cv_sd: float


def learning_curve(fit, ds, fractions, folds=5, seed=0, threshold=0.5):
    """Train and CV accuracy against training-set size.

    ``fit(train_ds) -> model`` with ``model.predict_proba``. For each of
    ``folds`` stratified folds, a stratified ``fraction`` of the remaining
    rows trains the model, which is scored on that subsample and on the
    held-out fold.
    """
    fractions = [float(f) for f in fractions]
    if not fractions or any(not 0.0 < f <= 1.0 for f in fractions):
        raise DataError("fractions must lie in (0, 1]")
    fold_idx = stratified_kfold(ds.labels, folds, np.random.default_rng([seed, 21]))
    all_rows = np.arange(ds.n_rows)
    points = []
    for fi, frac in enumerate(fractions):
        train_acc, cv_acc, sizes = [], [], []
        for f, test in enumerate(fold_idx):
            pool = np.setdiff1d(all_rows, test)
            rng = np.random.default_rng([seed, 22, fi, f])
            take = []
            for cls in (0, 1):
                idx = pool[ds.labels[pool] == cls]
                m = int(round(len(idx) * frac))
                take.append(rng.permutation(idx)[:m])
            rows = np.sort(np.concatenate(take))
            sub = ds.subset(rows)
            if len(np.unique(sub.labels)) < 2:
                raise DataError(f"fraction {frac} leaves a single class in a fold")
            model = fit(sub)
            pred = (model.predict_proba(sub.matrix) >= threshold).astype(np.int64)
            train_acc.append(np.mean(pred == sub.labels))
            held = ds.subset(test)
            pred = (model.predict_proba(held.matrix) >= threshold).astype(np.int64)
            cv_acc.append(np.mean(pred == held.labels))
            sizes.append(len(rows))
        points.append(CurvePoint(frac, int(np.mean(sizes)), float(np.mean(train_acc)),
                                 float(np.std(train_acc)), float(np.mean(cv_acc)),
                                 float(np.std(cv_acc))))
    return points


# -- rendering -------------------------------------------------------------

def report_items(rep):
    """Flat ``(name, value)`` pairs in a fixed order."""
    items = [("tn", rep.tn), ("fp", rep.fp), ("fn", rep.fn), ("tp", rep.tp),
             ("accuracy", rep.accuracy)]
    for c, cm in rep.per_class.items():
        items += [(f"class{c}.precision", cm.precision), (f"class{c}.recall", cm.recall),
                  (f"class{c}.f1", cm.f1), (f"class{c}.support", cm.support)]
    for name, cm in (("macro_avg", rep.macro_avg), ("weighted_avg", rep.weighted_avg)):
        items += [(f"{name}.precision", cm.precision), (f"{name}.recall", cm.recall),
                  (f"{name}.f1", cm.f1)]
    if rep.auc is not None:
        items.append(("auc", rep.auc))
    items += sorted(rep.extra.items())
    items.append(("undefined", ",".join(rep.flags) or "none"))
    return items


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def render_text(rep):
    return "".join(f"{k}={_fmt(v)}\n" for k, v in report_items(rep))


def render_summary(rep):
    """Single-line JSON summary."""
    return json.dumps(dict(report_items(rep)), sort_keys=True)


def render_table(rep):
    """Integer-percent table in the usual classification-report layout."""
    lines = [f"{'':>14}{'precision':>11}{'recall':>9}{'f1':>6}{'support':>9}"]

    def row(name, cm):
        pct = [int(round(100 * x)) for x in (cm.precision, cm.recall, cm.f1)]
        return f"{name:>14}{pct[0]:>11}{pct[1]:>9}{pct[2]:>6}{cm.support:>9}"

    for c, cm in rep.per_class.items():
        lines.append(row(str(c), cm))
    lines.append(row("macro avg", rep.macro_avg))
    lines.append(row("weighted avg", rep.weighted_avg))
    if rep.auc is not None:
        lines.append(f"auc {int(round(100 * rep.auc))}")
    return "\n".join(lines) + "\n"


def write_roc_csv(roc, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("fpr,tpr,threshold\n")
        for fpr, tpr, thr in roc:
            fh.write(f"{float(fpr)!r},{float(tpr)!r},{float(thr)!r}\n")


def write_report(rep, path, roc_path=None):
    """``name=value`` lines, then ``summary=<json>``."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(render_text(rep))
        fh.write("summary=" + render_summary(rep) + "\n")
    if roc_path is not None and rep.roc is not None:
        write_roc_csv(rep.roc, roc_path)
