"""Multi-graph feature fusion and feature selection.

Embeddings of the same entity learned on different graphs are concatenated
in a fixed source order. Columns are then ranked by recursive feature
elimination driven by a linear SVM (Pegasos) under stratified CV.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .dataset import PAIR_SEP, FeatureDataset, Standardizer, stratified_kfold
from .errors import ColdNodeError, DataError, UnresolvableEntityError

ZERO_FILL = "zero"
MIMIC_FILL = "mimic"


@dataclass(eq=False)
class FusedVector:
    entity: str
    values: np.ndarray
    presence_mask: np.ndarray
    filled_mask: np.ndarray = field(default=None)


def fuse(entity, sources, policy=ZERO_FILL, fill=None):
    """Concatenate ``entity``'s vectors from each source, in order.

    Missing segments are zero-filled, or, with ``policy=MIMIC_FILL``, produced
    by ``fill(source_index, entity)``; a :class:`ColdNodeError` from ``fill``
    falls back to zeros. ``presence_mask`` flags sources that held the entity;
    ``filled_mask`` flags mimic-filled segments.
    """
    if policy == MIMIC_FILL and fill is None:
        raise ValueError("mimic fill policy needs a fill function")
    segs, present, filled = [], [], []
    for i, src in enumerate(sources):
        if entity in src:
            segs.append(src.vector(entity).astype(np.float32))
            present.append(True)
            filled.append(False)
            continue
        vec = None
        if policy == MIMIC_FILL:
            try:
                vec = np.asarray(fill(i, entity), dtype=np.float32)
            except ColdNodeError:
                vec = None
        segs.append(vec if vec is not None else np.zeros(src.dimension, np.float32))
        present.append(False)
        filled.append(vec is not None)
    if not any(present) and not any(filled):
        raise UnresolvableEntityError(f"entity {entity!r} is in no source and cannot be mimicked")
    return FusedVector(entity, np.concatenate(segs), np.array(present), np.array(filled))


def fuse_pair(user, seller, user_sources, seller_sources, policy=ZERO_FILL,
              user_fill=None, seller_fill=None):
    """Pair features ``[user segments || seller segments]``."""
    u = fuse(user, user_sources, policy if user_fill else ZERO_FILL, user_fill)
    s = fuse(seller, seller_sources, policy if seller_fill else ZERO_FILL, seller_fill)
    return FusedVector(f"{user}{PAIR_SEP}{seller}",
                       np.concatenate([u.values, s.values]),
                       np.concatenate([u.presence_mask, s.presence_mask]),
                       np.concatenate([u.filled_mask, s.filled_mask]))


def source_origins(sources, prefix=""):
    return [f"{prefix}{src.graph_id}:{j}" for src in sources for j in range(src.dimension)]


def build_dataset(rows, labels, origins):
    """Stack :class:`FusedVector` rows into a :class:`FeatureDataset`."""
    if not rows:
        raise DataError("no rows to build a dataset from")
    lengths = {len(r.values) for r in rows}
    if len(lengths) != 1:
        raise DataError(f"fused vectors differ in length: {sorted(lengths)}")
    matrix = np.vstack([r.values for r in rows])
    return FeatureDataset(matrix, labels, [r.entity for r in rows], origins)


# -- linear SVM ------------------------------------------------------------

@dataclass
class LinearSVM:
    weights: np.ndarray
    bias: float

    def decision_function(self, x):
        return np.asarray(x, dtype=np.float64) @ self.weights + self.bias

    def predict(self, x):
        return (self.decision_function(x) >= 0).astype(np.int64)


def _pegasos(x, y, lam, epochs, rng, batch_size=1):
    n, f = x.shape
    xa = np.hstack([x, np.ones((n, 1))])
    ys = 2.0 * y - 1.0
    w = np.zeros(f + 1)
    avg = np.zeros(f + 1)
    navg = 0
    radius = 1.0 / np.sqrt(lam)
    t = 0
    for epoch in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            t += 1
            idx = order[start:start + batch_size]
            eta = 1.0 / (lam * t)
            xb, yb = xa[idx], ys[idx]
            viol = yb * (xb @ w) < 1.0
            w *= 1.0 - eta * lam
            if viol.any():
                w += (eta / len(idx)) * (yb[viol] @ xb[viol])
            norm = np.sqrt(w @ w)
            if norm > radius:
                w *= radius / norm
            if epoch == epochs - 1:
                avg += w
                navg += 1
    return avg / max(navg, 1)


def linear_svm_fit(ds, regularization=1e-2, epochs=10, seed=0, batch_size=1):
    """L2-regularized hinge loss by Pegasos stochastic subgradient steps.

    The bias is an extra always-one column. Returns the average iterate of
    the final epoch.
    """
    ds.require_both_classes()
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    w = _pegasos(np.asarray(ds.matrix, dtype=np.float64), ds.labels.astype(np.float64),
                 regularization, epochs, rng, batch_size)
    return LinearSVM(w[:-1], float(w[-1]))


def _fit_scaled(x, y, lam, epochs, rng):
    scaler = Standardizer.fit(x)
    w = _pegasos(scaler.transform(x), y, lam, epochs, rng)
    return scaler, w


@dataclass
class RFEResult:
    selected: np.ndarray
    cv_scores: dict
    ranking: np.ndarray
    degenerate: bool = False


def default_step(n_features):
    return max(1, n_features // 20)


def rfe_select(ds, step=None, folds=5, seed=0, regularization=1e-2, epochs=10):
    """Recursive feature elimination with a linear SVM.

    At each size the stratified ``folds``-fold CV accuracy is recorded, the
    SVM is refit on all rows and the ``step`` columns with the smallest
    ``|w|`` are dropped. Returns the subset with the best CV accuracy,
    preferring the smaller subset on ties. ``ranking[j]`` is 1 for selected
    columns and grows with how early a column was eliminated.
    """
    n_rows, n_feat = ds.matrix.shape
    if n_feat < 1:
        raise DataError("dataset has no feature columns")
    if n_rows < folds:
        raise DataError(f"{n_rows} rows is fewer than {folds} folds")
    ds.require_both_classes()
    x = np.asarray(ds.matrix, dtype=np.float64)
    y = ds.labels.astype(np.float64)
    if np.all(x.std(axis=0) == 0):
        warnings.warn("all feature columns are constant; keeping every column", RuntimeWarning)
        return RFEResult(np.arange(n_feat), {}, np.ones(n_feat, dtype=np.int64), True)

    step = default_step(n_feat) if step is None else int(step)
    if step < 1:
        raise ValueError("step must be >= 1")
    fold_idx = stratified_kfold(ds.labels, folds, np.random.default_rng([seed, 0]))
    remaining = np.arange(n_feat)
    scores, subsets, eliminated = {}, {}, []
    while True:
        size = len(remaining)
        accs = []
        for f, test in enumerate(fold_idx):
            train = np.setdiff1d(np.arange(n_rows), test)
            xs = x[:, remaining]
            rng = np.random.default_rng([seed, size, f + 1])
            scaler, w = _fit_scaled(xs[train], y[train], regularization, epochs, rng)
            pred = (scaler.transform(xs[test]) @ w[:-1] + w[-1] >= 0).astype(np.float64)
            accs.append(np.mean(pred == y[test]))
        scores[size] = float(np.mean(accs))
        subsets[size] = remaining.copy()
        if size == 1:
            break
        rng = np.random.default_rng([seed, size, 0])
        _, w = _fit_scaled(x[:, remaining], y, regularization, epochs, rng)
        drop = min(step, size - 1)
        order = np.argsort(np.abs(w[:-1]), kind="stable")[:drop]
        eliminated.append(remaining[order])
        remaining = np.delete(remaining, order)

    best = max(scores.values())
    best_size = min(s for s, v in scores.items() if v == best)
    selected = np.sort(subsets[best_size])
    ranking = np.ones(n_feat, dtype=np.int64)
    kept = set(selected.tolist())
    rank = 1
    for cols in reversed(eliminated):
        cols = [c for c in cols.tolist() if c not in kept]
        if cols:
            rank += 1
            ranking[cols] = rank
    return RFEResult(selected, scores, ranking)
