"""Downstream binary classifiers and the train/test split.

All models standardize inputs with training-set statistics and expose
``predict_proba(x)`` giving P(class 1).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import FeatureDataset, Standardizer
from .errors import DataError, FileFormatError, NumericalError

LOGREG, KNN, MLP = "logreg", "knn", "mlp"
KINDS = (LOGREG, KNN, MLP)


@dataclass
class SplitSpec:
    train_fraction: float = 0.8
    stratified: bool = True
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie strictly between 0 and 1")


@dataclass
class ClassifierConfig:
    kind: str = LOGREG
    # logistic regression
    C: float = 1.0
    logreg_max_epochs: int = 5000
    logreg_tol: float = 1e-6
    # k-nearest neighbors
    k: int = 3
    # multilayer perceptron
    hidden: int = 100
    lr: float = 1e-3
    max_iter: int = 200
    batch_size: int = 200
    alpha: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    tol: float = 1e-4
    n_iter_no_change: int = 10
    standardize: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if self.C <= 0:
            raise ValueError("C must be > 0")
        if self.k < 1 or self.k % 2 == 0:
            raise ValueError("k must be a positive odd integer")
        if self.hidden < 1:
            raise ValueError("hidden must be >= 1")


# -- splitting -------------------------------------------------------------

def _take(rng, idx, n_test):
    idx = rng.permutation(idx)
    return idx[:n_test], idx[n_test:]


def stratified_split(ds, spec=None):
    """Split ``ds`` into ``(train, test)``.

    With one row per entity, each class contributes
    ``round(n_class * (1 - train_fraction))`` rows to the test side. When an
    entity owns several rows (pair datasets, keyed by the user part of the
    id), whole entities are assigned, stratified by each entity's majority
    label, so no entity lands on both sides.
    """
    spec = spec or SplitSpec()
    rng = np.random.default_rng([spec.seed, 11])
    groups = ds.groups()
    test_frac = 1.0 - spec.train_fraction
    uniq, inverse = np.unique(groups, return_inverse=True)

    if len(uniq) == ds.n_rows:
        keys = ds.labels if spec.stratified else np.zeros(ds.n_rows, dtype=np.int64)
        if spec.stratified:
            counts = np.bincount(ds.labels, minlength=2)
            if counts.min() < 2:
                raise DataError(f"each class needs >= 2 samples (counts {counts.tolist()})")
        test = []
        for key in np.unique(keys):
            idx = np.flatnonzero(keys == key)
            t, _ = _take(rng, idx, int(round(len(idx) * test_frac)))
            test.append(t)
        test_rows = np.sort(np.concatenate(test))
    else:
        pos = np.bincount(inverse, weights=ds.labels, minlength=len(uniq))
        tot = np.bincount(inverse, minlength=len(uniq))
        keys = (2 * pos >= tot).astype(np.int64) if spec.stratified else np.zeros(len(uniq), np.int64)
        test_groups = []
        for key in np.unique(keys):
            idx = np.flatnonzero(keys == key)
            t, _ = _take(rng, idx, int(round(len(idx) * test_frac)))
            test_groups.append(t)
        is_test = np.isin(inverse, np.concatenate(test_groups))
        test_rows = np.flatnonzero(is_test)
    train_rows = np.setdiff1d(np.arange(ds.n_rows), test_rows)
    return ds.subset(train_rows), ds.subset(test_rows)


# -- logistic regression ---------------------------------------------------

def _sigmoid(z):
    return np.exp(-np.logaddexp(0.0, -z))


def soft_threshold(x, t):
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


@dataclass(eq=False)
class LogisticModel:
    weights: np.ndarray
    bias: float
    scaler: Standardizer
    C: float = 1.0
    n_iter: int = 0
    kind: str = LOGREG

    def decision_function(self, x):
        return self.scaler.transform(x) @ self.weights + self.bias

    def predict_proba(self, x):
        return _sigmoid(self.decision_function(x))


def logreg_objective(w, b, x, y, C):
    z = x @ w + b
    return float(np.sum(np.logaddexp(0.0, z) - y * z) + np.abs(w).sum() / C)


def logreg_train(train, cfg=None):
    """Minimize ``||w||_1 / C + sum_i logloss_i`` by accelerated proximal
    gradient (FISTA with restart). The bias is not penalized.

    Stops when the largest parameter change falls below ``logreg_tol`` or
    after ``logreg_max_epochs`` iterations.
    """
    cfg = cfg or ClassifierConfig(kind=LOGREG)
    train.require_both_classes()
    x_raw = np.asarray(train.matrix, dtype=np.float64)
    if not np.isfinite(x_raw).all():
        raise DataError("non-finite features")
    scaler = Standardizer.fit(x_raw) if cfg.standardize else Standardizer.identity(x_raw.shape[1])
    x = scaler.transform(x_raw)
    y = train.labels.astype(np.float64)
    n, f = x.shape
    xa = np.hstack([x, np.ones((n, 1))])
    lipschitz = 0.25 * np.linalg.norm(xa, 2) ** 2
    step = 1.0 / lipschitz
    thresh = step / cfg.C

    def prox(theta):
        out = theta.copy()
        out[:f] = soft_threshold(theta[:f], thresh)
        return out

    def smooth(theta):
        z = xa @ theta
        return float(np.sum(np.logaddexp(0.0, z) - y * z))

    def grad(theta):
        return xa.T @ (_sigmoid(xa @ theta) - y)

    theta = np.zeros(f + 1)
    prior = np.clip(y.mean(), 1e-12, 1 - 1e-12)
    theta[f] = np.log(prior / (1 - prior))
    momentum = theta.copy()
    t = 1.0
    obj = smooth(theta) + np.abs(theta[:f]).sum() / cfg.C
    it = 0
    for it in range(1, cfg.logreg_max_epochs + 1):
        new = prox(momentum - step * grad(momentum))
        new_obj = smooth(new) + np.abs(new[:f]).sum() / cfg.C
        if new_obj > obj:
            # restart: plain proximal step from the current iterate
            t = 1.0
            new = prox(theta - step * grad(theta))
            new_obj = smooth(new) + np.abs(new[:f]).sum() / cfg.C
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        momentum = new + ((t - 1.0) / t_next) * (new - theta)
        delta = np.max(np.abs(new - theta))
        theta, obj, t = new, new_obj, t_next
        if delta < cfg.logreg_tol:
            break
    return LogisticModel(theta[:f], float(theta[f]), scaler, cfg.C, it)


def logreg_predict_proba(model, x):
    return model.predict_proba(x)


def threshold_apply(p, t=0.5):
    """Class 1 where ``p >= t``."""
    if not 0.0 <= t <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    return (np.asarray(p) >= t).astype(np.int64)


# -- k nearest neighbors ---------------------------------------------------

@dataclass(eq=False)
class KNNModel:
    x: np.ndarray
    y: np.ndarray
    k: int
    scaler: Standardizer
    kind: str = KNN

    def neighbors(self, x):
        return knn_neighbors(self.x, self.scaler.transform(x), self.k)

    def predict_proba(self, x):
        idx = self.neighbors(x)
        return self.y[idx].mean(axis=1)

    def predict(self, x):
        return (self.predict_proba(x) > 0.5).astype(np.int64)


def knn_neighbors_brute(train_x, queries, k):
    """Exhaustive scan: exact squared distances, ties to the lower row index."""
    train_x = np.asarray(train_x, dtype=np.float64)
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    k = min(k, len(train_x))
    out = np.empty((len(queries), k), dtype=np.int64)
    for i, q in enumerate(queries):
        d = np.sum((train_x - q) ** 2, axis=1)
        out[i] = np.argsort(d, kind="stable")[:k]
    return out


def knn_neighbors(train_x, queries, k, block=256):
    """Row indices of the ``k`` nearest training rows per query.

    Candidates come from the matrix-product expansion of the squared
    distance; every row within its rounding bound of the k-th candidate is
    then rescored exactly, so the result equals
    :func:`knn_neighbors_brute` (ties go to the lower row index).
    """
    train_x = np.asarray(train_x, dtype=np.float64)
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    n = len(train_x)
    k = min(k, n)
    sq_train = np.einsum("ij,ij->i", train_x, train_x)
    out = np.empty((len(queries), k), dtype=np.int64)
    for start in range(0, len(queries), block):
        q = queries[start:start + block]
        sq_q = np.einsum("ij,ij->i", q, q)
        approx = sq_q[:, None] - 2.0 * (q @ train_x.T) + sq_train[None, :]
        slack = 1e-9 * (sq_q[:, None] + sq_train.max() + 1.0)
        kth = np.partition(approx, k - 1, axis=1)[:, k - 1:k]
        for r in range(len(q)):
            cand = np.flatnonzero(approx[r] <= kth[r, 0] + 2.0 * slack[r, 0])
            d = np.sum((train_x[cand] - q[r]) ** 2, axis=1)
            out[start + r] = cand[np.lexsort((cand, d))[:k]]
    return out


def knn_fit(train, cfg=None):
    cfg = cfg or ClassifierConfig(kind=KNN)
    if train.n_rows == 0:
        raise DataError("empty training set")
    x = np.asarray(train.matrix, dtype=np.float64)
    scaler = Standardizer.fit(x) if cfg.standardize else Standardizer.identity(x.shape[1])
    return KNNModel(scaler.transform(x), train.labels.astype(np.float64), cfg.k, scaler)


def knn_predict(train, x, k=3, standardize=False):
    """Majority vote of the ``k`` nearest training rows (Euclidean)."""
    model = knn_fit(train, ClassifierConfig(kind=KNN, k=k, standardize=standardize))
    return model.predict(x)


# -- multilayer perceptron -------------------------------------------------

@dataclass(eq=False)
class MLPModel:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: float
    scaler: Standardizer
    loss_trace: list = field(default_factory=list)
    kind: str = MLP

    def params(self):
        return [self.w1, self.b1, self.w2, np.array([self.b2])]

    def predict_proba(self, x):
        h = np.maximum(self.scaler.transform(x) @ self.w1 + self.b1, 0.0)
        return _sigmoid(h @ self.w2 + self.b2)


def mlp_loss_and_grads(params, x, y, alpha=0.0):
    """Mean binary cross-entropy plus ``alpha/2 * ||W||^2 / n`` and its gradients.

    ``params`` is ``[w1 (F,H), b1 (H,), w2 (H,), b2 (1,)]``.
    """
    w1, b1, w2, b2 = params
    n = len(y)
    pre = x @ w1 + b1
    h = np.maximum(pre, 0.0)
    z = h @ w2 + b2[0]
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
    loss += 0.5 * alpha * (np.sum(w1 * w1) + np.sum(w2 * w2)) / n
    dz = (_sigmoid(z) - y) / n
    gw2 = h.T @ dz + alpha * w2 / n
    gb2 = np.array([dz.sum()])
    dh = np.outer(dz, w2) * (pre > 0)
    gw1 = x.T @ dh + alpha * w1 / n
    gb1 = dh.sum(axis=0)
    return loss, [gw1, gb1, gw2, gb2]


def mlp_init(n_features, hidden, rng):
    b1 = np.sqrt(6.0 / (n_features + hidden))
    b2 = np.sqrt(6.0 / (hidden + 1))
    return [rng.uniform(-b1, b1, (n_features, hidden)), rng.uniform(-b1, b1, hidden),
            rng.uniform(-b2, b2, hidden), rng.uniform(-b2, b2, 1)]


def mlp_train(train, cfg=None):
    """One ReLU hidden layer, sigmoid output, cross-entropy, Adam.

    At most ``max_iter`` epochs of shuffled mini-batches; stops early when the
    epoch loss has not improved by ``tol`` for ``n_iter_no_change`` epochs.
    """
    cfg = cfg or ClassifierConfig(kind=MLP)
    train.require_both_classes()
    x_raw = np.asarray(train.matrix, dtype=np.float64)
    scaler = Standardizer.fit(x_raw) if cfg.standardize else Standardizer.identity(x_raw.shape[1])
    x = scaler.transform(x_raw)
    y = train.labels.astype(np.float64)
    rng = np.random.default_rng([cfg.seed, 13])
    params = mlp_init(x.shape[1], cfg.hidden, rng)
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    trace = []
    best, stale, step = np.inf, 0, 0
    batch = max(1, min(cfg.batch_size, len(y)))
    for epoch in range(cfg.max_iter):
        order = rng.permutation(len(y))
        total = 0.0
        for start in range(0, len(y), batch):
            idx = order[start:start + batch]
            loss, grads = mlp_loss_and_grads(params, x[idx], y[idx], cfg.alpha)
            total += loss * len(idx)
            step += 1
            for p, g, mi, vi in zip(params, grads, m, v):
                mi *= cfg.beta1
                mi += (1 - cfg.beta1) * g
                vi *= cfg.beta2
                vi += (1 - cfg.beta2) * g * g
                mhat = mi / (1 - cfg.beta1 ** step)
                vhat = vi / (1 - cfg.beta2 ** step)
                p -= cfg.lr * mhat / (np.sqrt(vhat) + cfg.epsilon)
        epoch_loss = total / len(y)
        trace.append(epoch_loss)
        if not np.isfinite(epoch_loss):
            raise NumericalError(f"MLP loss diverged at epoch {epoch}; trace={trace}")
        if epoch_loss > best - cfg.tol:
            stale += 1
            if stale >= cfg.n_iter_no_change:
                break
        else:
            stale = 0
        best = min(best, epoch_loss)
    w1, b1, w2, b2 = params
    return MLPModel(w1, b1, w2, float(b2[0]), scaler, trace)


def mlp_predict_proba(model, x):
    return model.predict_proba(x)


def fit(train, cfg):
    if cfg.kind == LOGREG:
        return logreg_train(train, cfg)
    if cfg.kind == KNN:
        return knn_fit(train, cfg)
    return mlp_train(train, cfg)


def accuracy(model, ds, threshold=0.5):
    pred = threshold_apply(model.predict_proba(ds.matrix), threshold)
    return float(np.mean(pred == ds.labels))


# -- persistence -----------------------------------------------------------

def _row(a):
    return " ".join(repr(float(v)) for v in np.ravel(a))


def save_model(model, path):
    """Kind tag line, then named arrays as ``name n`` + values lines."""
    if model.kind == LOGREG:
        header = f"model kind=logreg C={model.C!r}"
        arrays = {"weights": model.weights, "bias": [model.bias]}
    elif model.kind == KNN:
        header = f"model kind=knn k={model.k} rows={len(model.y)} cols={model.x.shape[1]}"
        arrays = {"x": model.x, "y": model.y}
    else:
        header = f"model kind=mlp hidden={len(model.b1)} cols={model.w1.shape[0]}"
        arrays = {"w1": model.w1, "b1": model.b1, "w2": model.w2, "b2": [model.b2]}
    arrays = {"scaler_mean": model.scaler.mean, "scaler_scale": model.scaler.scale, **arrays}
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for name, arr in arrays.items():
            arr = np.asarray(arr, dtype=np.float64)
            fh.write(f"{name} {arr.size}\n{_row(arr)}\n")


def load_model(path):
    try:
        with open(path, encoding="utf-8") as fh:
            lines = [ln.rstrip("\n") for ln in fh]
    except OSError as exc:
        raise FileFormatError(path, "a classifier model file", str(exc)) from None
    if not lines or not lines[0].startswith("model kind="):
        raise FileFormatError(path, "'model kind=...' header")
    head = dict(tok.split("=", 1) for tok in lines[0].split()[1:])
    arrays = {}
    try:
        for i in range(1, len(lines), 2):
            name, size = lines[i].split()
            vals = np.array(lines[i + 1].split(), dtype=np.float64)
            if len(vals) != int(size):
                raise ValueError
            arrays[name] = vals
    except (ValueError, IndexError):
        raise FileFormatError(path, "'name size' lines followed by values") from None
    scaler = Standardizer(arrays["scaler_mean"], arrays["scaler_scale"])
    kind = head["kind"]
    if kind == LOGREG:
        return LogisticModel(arrays["weights"], float(arrays["bias"][0]), scaler, float(head["C"]))
    if kind == KNN:
        rows, cols = int(head["rows"]), int(head["cols"])
        return KNNModel(arrays["x"].reshape(rows, cols), arrays["y"], int(head["k"]), scaler)
    if kind == MLP:
        hidden, cols = int(head["hidden"]), int(head["cols"])
        return MLPModel(arrays["w1"].reshape(cols, hidden), arrays["b1"], arrays["w2"],
                        float(arrays["b2"][0]), scaler)
    raise FileFormatError(path, f"model kind in {KINDS}", kind)


def write_predictions(path, entity_ids, labels, scores):
    """``entity_id true_label score`` lines."""
    with open(path, "w", encoding="utf-8") as fh:
        for ent, y, s in zip(entity_ids, labels, scores):
            fh.write(f"{ent} {int(y)} {float(s)!r}\n")


def read_predictions(path):
    ents, labels, scores = [], [], []
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise FileFormatError(path, "a predictions file", str(exc)) from None
    with fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            try:
                if len(parts) != 3 or parts[1] not in ("0", "1"):
                    raise ValueError
                ents.append(parts[0])
                labels.append(int(parts[1]))
                scores.append(float(parts[2]))
            except ValueError:
                raise FileFormatError(path, "'entity_id true_label score' lines", f"line {lineno}") from None
    return ents, np.array(labels, dtype=np.int64), np.array(scores)


def as_dataset(x, y, prefix="e"):
    """Wrap a bare matrix and labels in a :class:`FeatureDataset`."""
    x = np.atleast_2d(np.asarray(x))
    return FeatureDataset(x, y, [f"{prefix}{i}" for i in range(len(x))])
