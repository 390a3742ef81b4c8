"""Embeddings for nodes that were absent from training.

Two estimators, both driven by a node's neighbors in some graph ``g`` and an
embedding table ``e`` keyed by label (the graph and the table need not come
from the same source):

* :func:`naive_mimic` averages the embedded neighbors' vectors;
* :func:`mimic_train` / :func:`mimic_infer` fit a feedforward regressor from
  ``n`` concatenated neighbor vectors to the node's own vector.

Neighbor slots are filled in order of decreasing degree in ``g`` (ties by
label); when fewer than ``n`` neighbors are embedded, the remaining slots get
their mean.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ColdNodeError, DataError, FileFormatError, TrainingDivergedError

ACTIVATIONS = ("tanh", "identity")


@dataclass
class MimicConfig:
    n: int = 10
    hidden: tuple | None = None  # None means one layer of width 2 * D
    lr: float = 1e-3
    epochs: int = 300
    batch_size: int = 32
    seed: int = 0
    val_fraction: float = 0.1
    activation: str = "tanh"
    # add the mean of the neighbor slots to the network output
    residual: bool = True
    # keep the parameters of the epoch with the lowest validation MSE
    restore_best: bool = True


@dataclass(eq=False)
class MimicModel:
    n: int
    dimension: int
    weights: list
    biases: list
    activation: str = "tanh"
    ordering: str = "degree-desc-label"
    residual: bool = False
    train_mse: float = float("nan")
    val_mse: float = float("nan")
    history: list = field(default_factory=list)

    @property
    def input_width(self):
        return self.n * self.dimension

    @property
    def layer_sizes(self):
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]


def embedded_neighbors(v, g, e):
    """Labels of ``v``'s neighbors in ``g`` that have a vector in ``e``,
    ordered by decreasing degree then label."""
    try:
        vid = g.index(v)
    except KeyError:
        raise ColdNodeError(f"node {v!r} is not in graph {g.name!r}") from None
    nbrs = g.neighbors(vid)
    deg = g.degrees()
    found = [(-int(deg[u]), g.labels[u]) for u in nbrs if g.labels[u] in e]
    found.sort()
    return [lab for _, lab in found]


def naive_mimic(v, g, e):
    """Mean of the embedded neighbors' vectors."""
    labs = embedded_neighbors(v, g, e)
    if not labs:
        raise ColdNodeError(f"node {v!r} has no embedded neighbor")
    return np.mean([e.vector(lab).astype(np.float64) for lab in labs], axis=0)


def neighbor_input(v, g, e, n):
    """The ``n * D`` regressor input for node ``v``."""
    labs = embedded_neighbors(v, g, e)
    if not labs:
        raise ColdNodeError(f"node {v!r} has no embedded neighbor")
    vecs = np.array([e.vector(lab) for lab in labs], dtype=np.float64)
    slots = vecs[:n]
    if len(slots) < n:
        pad = np.repeat(vecs.mean(axis=0, keepdims=True), n - len(slots), axis=0)
        slots = np.vstack([slots, pad])
    return slots.ravel()


# -- regressor -------------------------------------------------------------

def _act(name, z):
    return np.tanh(z) if name == "tanh" else z


def _act_grad(name, a):
    return 1.0 - a * a if name == "tanh" else np.ones_like(a)


def forward(weights, biases, x, activation="tanh"):
    """Return the activations of every layer; the last one is the output."""
    acts = [x]
    for i, (w, b) in enumerate(zip(weights, biases)):
        z = acts[-1] @ w + b
        acts.append(z if i == len(weights) - 1 else _act(activation, z))
    return acts


def mse_loss_and_grads(weights, biases, x, y, activation="tanh"):
    """Squared error summed over output dimensions, averaged over rows, and
    its parameter gradients."""
    acts = forward(weights, biases, x, activation)
    diff = acts[-1] - y
    loss = float(np.sum(diff * diff) / len(diff))
    delta = 2.0 * diff / len(diff)
    gw, gb = [None] * len(weights), [None] * len(weights)
    for i in range(len(weights) - 1, -1, -1):
        gw[i] = acts[i].T @ delta
        gb[i] = delta.sum(axis=0)
        if i:
            delta = (delta @ weights[i].T) * _act_grad(activation, acts[i])
    return loss, gw, gb


def init_regressor(sizes, rng):
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return weights, biases


def training_nodes(g, e, exclude=()):
    """Nodes with their own vector and at least one embedded neighbor."""
    exclude = set(exclude)
    out = []
    for lab in g.labels:
        if lab in e and lab not in exclude and embedded_neighbors(lab, g, e):
            out.append(lab)
    return out


def design_matrix(nodes, g, e, n):
    x = np.array([neighbor_input(v, g, e, n) for v in nodes])
    y = np.array([e.vector(v) for v in nodes], dtype=np.float64)
    return x, y


def slot_mean(x, n):
    """Mean over the ``n`` neighbor slots of each input row."""
    x = np.atleast_2d(x)
    return x.reshape(len(x), n, -1).mean(axis=1)


def predict(model, x):
    x = np.atleast_2d(x)
    out = forward(model.weights, model.biases, x, model.activation)[-1]
    if model.residual:
        out = out + slot_mean(x, model.n)
    return out


def _mse(model, x, y):
    if len(x) == 0:
        return float("nan")
    d = predict(model, x) - y
    return float(np.mean(d * d))


def mimic_train(g, e, cfg=None, exclude=()):
    """Fit the neighbor-to-node regressor by mini-batch gradient descent.

    Training nodes are split ``1 - val_fraction`` / ``val_fraction`` at
    random. ``history`` holds ``(epoch, train_mse, val_mse)`` with epoch 0
    being the untrained model. With ``residual`` the network fits the gap
    between the node's vector and its slot mean. With ``restore_best`` and a
    non-empty validation split, the returned parameters are those of the
    epoch with the lowest validation MSE.
    """
    cfg = cfg or MimicConfig()
    if cfg.activation not in ACTIVATIONS:
        raise ValueError(f"activation must be one of {ACTIVATIONS}")
    nodes = training_nodes(g, e, exclude)
    if not nodes:
        raise DataError("no node has both an embedding and an embedded neighbor")
    rng = np.random.default_rng([cfg.seed, 7])
    dim = e.dimension
    x, y = design_matrix(nodes, g, e, cfg.n)
    order = rng.permutation(len(nodes))
    n_val = int(round(cfg.val_fraction * len(nodes))) if len(nodes) >= 10 else 0
    val, tr = order[:n_val], order[n_val:]

    hidden = (2 * dim,) if cfg.hidden is None else tuple(cfg.hidden)
    sizes = [cfg.n * dim, *hidden, dim]
    weights, biases = init_regressor(sizes, rng)
    if cfg.residual:
        # start exactly at the slot mean
        weights[-1][...] = 0.0
    model = MimicModel(cfg.n, dim, weights, biases, cfg.activation, residual=cfg.residual)
    target = y - slot_mean(x, cfg.n) if cfg.residual else y
    model.history.append((0, _mse(model, x[tr], y[tr]), _mse(model, x[val], y[val])))
    best = (model.history[0][2], [w.copy() for w in weights], [b.copy() for b in biases])
    for epoch in range(1, cfg.epochs + 1):
        perm = rng.permutation(tr)
        for start in range(0, len(perm), cfg.batch_size):
            idx = perm[start:start + cfg.batch_size]
            _, gw, gb = mse_loss_and_grads(weights, biases, x[idx], target[idx], cfg.activation)
            for w, b, dw, db in zip(weights, biases, gw, gb):
                w -= cfg.lr * dw
                b -= cfg.lr * db
        if not all(np.isfinite(w).all() for w in weights):
            raise TrainingDivergedError(epoch, start, "mimic regressor diverged")
        model.history.append((epoch, _mse(model, x[tr], y[tr]), _mse(model, x[val], y[val])))
        if model.history[-1][2] < best[0]:
            best = (model.history[-1][2], [w.copy() for w in weights], [b.copy() for b in biases])
    if cfg.restore_best and n_val:
        for w, b, bw, bb in zip(weights, biases, best[1], best[2]):
            w[...] = bw
            b[...] = bb
    model.train_mse = _mse(model, x[tr], y[tr])
    model.val_mse = _mse(model, x[val], y[val])
    return model


def mimic_infer(model, v, g, e):
    """Regressor output for node ``v``; raises :class:`ColdNodeError` when
    ``v`` has no embedded neighbor."""
    if e.dimension != model.dimension:
        raise DataError(f"model expects D={model.dimension}, embeddings have D={e.dimension}")
    return predict(model, neighbor_input(v, g, e, model.n))[0]


# -- persistence -----------------------------------------------------------

def save_mimic(model, path):
    sizes = ",".join(map(str, model.layer_sizes))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"mimic n={model.n} dim={model.dimension} layers={sizes} "
                 f"activation={model.activation} ordering={model.ordering} "
                 f"residual={int(model.residual)}\n")
        for w, b in zip(model.weights, model.biases):
            fh.write(f"W {w.shape[0]} {w.shape[1]}\n")
            for row in w:
                fh.write(" ".join(repr(float(v)) for v in row) + "\n")
            fh.write(f"b {len(b)}\n")
            fh.write(" ".join(repr(float(v)) for v in b) + "\n")


def load_mimic(path):
    try:
        with open(path, encoding="utf-8") as fh:
            lines = [ln.rstrip("\n") for ln in fh]
    except OSError as exc:
        raise FileFormatError(path, "a mimic model file", str(exc)) from None
    if not lines or not lines[0].startswith("mimic "):
        raise FileFormatError(path, "'mimic n=... dim=... layers=...' header")
    head = dict(tok.split("=", 1) for tok in lines[0].split()[1:])
    sizes = [int(s) for s in head["layers"].split(",")]
    weights, biases, pos = [], [], 1
    try:
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            tag, r, c = lines[pos].split()
            assert tag == "W" and (int(r), int(c)) == (fan_in, fan_out)
            w = np.array([lines[pos + 1 + i].split() for i in range(fan_in)], dtype=np.float64)
            pos += 1 + fan_in
            tag, m = lines[pos].split()
            assert tag == "b" and int(m) == fan_out
            b = np.array(lines[pos + 1].split(), dtype=np.float64)
            pos += 2
            weights.append(w.reshape(fan_in, fan_out))
            biases.append(b)
    except (AssertionError, IndexError, ValueError):
        raise FileFormatError(path, "weight blocks matching the header", f"near line {pos + 1}") from None
    return MimicModel(int(head["n"]), int(head["dim"]), weights, biases,
                      head.get("activation", "tanh"), head.get("ordering", "degree-desc-label"),
                      head.get("residual", "0") == "1")
