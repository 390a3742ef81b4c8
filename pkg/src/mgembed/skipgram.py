"""SkipGram with negative sampling over a :class:`~mgembed.context.GroupCorpus`.

Training maximizes the per-pair negative-sampling objective by SGD with a
linearly decaying learning rate. The exact-softmax helpers
(:func:`softmax_prob`, :func:`corpus_log_likelihood`) are O(|V|) per query and
meant for monitoring small vocabularies.
"""
from __future__ import annotations

import logging
import zlib
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .context import corpus_to_prediction_pairs
from .errors import FileFormatError, TrainingDivergedError

logger = logging.getLogger(__name__)

# final learning rate as a fraction of the initial one
LR_FLOOR = 0.01


@dataclass(eq=False)
class EmbeddingSet:
    """Input vectors ``input`` (the delivered embedding) and output vectors
    ``output`` used only while training. ``output`` is ``None`` for sets read
    back from disk."""

    input: np.ndarray
    output: np.ndarray | None
    labels: tuple
    graph_id: str = ""
    _index: dict = field(default=None, repr=False)

    def __post_init__(self):
        self.labels = tuple(self.labels)
        if self.input.ndim != 2 or self.input.shape[0] != len(self.labels):
            raise ValueError("input table must be |V| x D with one label per row")
        if self.output is not None and self.output.shape != self.input.shape:
            raise ValueError("input and output tables differ in shape")

    @property
    def dimension(self):
        return self.input.shape[1]

    @property
    def vocab_size(self):
        return self.input.shape[0]

    def index(self, label):
        if self._index is None:
            self._index = {lab: i for i, lab in enumerate(self.labels)}
        return self._index[label]

    def __contains__(self, label):
        try:
            self.index(label)
        except KeyError:
            return False
        return True

    def vector(self, label):
        return self.input[self.index(label)]

    def copy(self):
        out = None if self.output is None else self.output.copy()
        return EmbeddingSet(self.input.copy(), out, self.labels, self.graph_id)


@dataclass
class TrainConfig:
    dimension: int = 32
    epochs: int = 5
    initial_learning_rate: float = 0.025
    negative_samples: int = 5
    noise_exponent: float = 0.75
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")
        if self.initial_learning_rate <= 0:
            raise ValueError("initial_learning_rate must be > 0")
        if self.negative_samples < 1:
            raise ValueError("negative_samples must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")


def graph_seed(seed, graph_id):
    """Seed material for one graph's training run."""
    return [int(seed), zlib.crc32(str(graph_id).encode())]


def init_embeddings(vocab_size, dimension, rng, labels=None, graph_id="", dtype=np.float32):
    """Inputs uniform on ``[-0.5/D, 0.5/D]``, outputs zero."""
    if vocab_size < 1 or dimension < 1:
        raise ValueError("vocab_size and dimension must be >= 1")
    half = 0.5 / dimension
    bound = dtype(half)
    if bound > half:
        bound = np.nextafter(bound, dtype(0))
    syn0 = rng.uniform(-half, half, size=(vocab_size, dimension)).astype(dtype)
    np.clip(syn0, -bound, bound, out=syn0)
    syn1 = np.zeros((vocab_size, dimension), dtype=dtype)
    if labels is None:
        labels = [str(i) for i in range(vocab_size)]
    return EmbeddingSet(syn0, syn1, labels, graph_id)


def _log_softmax_rows(e, centers):
    scores = e.input[centers].astype(np.float64) @ e.output.astype(np.float64).T
    scores -= scores.max(axis=1, keepdims=True)
    return scores - np.log(np.exp(scores).sum(axis=1, keepdims=True))


def softmax_distribution(e, center):
    """Exact softmax over all contexts for one center node."""
    return np.exp(_log_softmax_rows(e, [center])[0])


def softmax_prob(e, center, context):
    return float(softmax_distribution(e, center)[context])


def corpus_log_likelihood(e, corpus):
    """Mean over groups of ``(1/|s|) * sum_{i != j in s} log p(j | i)``,
    where ``s`` is the root together with its chunk members."""
    if len(corpus) == 0:
        return 0.0
    logp = _log_softmax_rows(e, np.arange(e.vocab_size))
    total = 0.0
    for root, members in corpus:
        nodes = np.array((root,) + members)
        block = logp[np.ix_(nodes, nodes)]
        total += (block.sum() - np.trace(block)) / len(nodes)
    return total / len(corpus)


class NoiseTable:
    """Alias-method sampler over node ids, weight ``count ** exponent``.

    Nodes with a zero count are never drawn.
    """

    def __init__(self, counts, exponent=0.75):
        counts = np.asarray(counts, dtype=np.float64)
        if counts.ndim != 1 or not np.any(counts > 0):
            raise ValueError("noise table needs at least one positive count")
        weights = np.where(counts > 0, counts, 0.0) ** exponent
        weights[counts <= 0] = 0.0
        self.probs = weights / weights.sum()
        self.exponent = exponent
        self._build()

    def _build(self):
        n = len(self.probs)
        scaled = self.probs * n
        prob = np.zeros(n)
        alias = np.arange(n, dtype=np.int64)
        small = [i for i in range(n) if scaled[i] < 1.0]
        large = [i for i in range(n) if scaled[i] >= 1.0]
        while small and large:
            s, l = small.pop(), large.pop()
            prob[s] = scaled[s]
            alias[s] = l
            scaled[l] -= 1.0 - scaled[s]
            (small if scaled[l] < 1.0 else large).append(l)
        for i in large + small:
            prob[i] = 1.0
        self.accept = prob
        self.alias = alias

    def draw(self, size, rng):
        n = len(self.probs)
        idx = rng.integers(0, n, size=size)
        keep = rng.random(size) < self.accept[idx]
        return np.where(keep, idx, self.alias[idx])


def context_counts(corpus):
    """How often each node appears as a context in the expanded pairs."""
    sizes = corpus.sizes()
    counts = np.zeros(corpus.num_nodes, dtype=np.int64)
    # every node in a group of g nodes is the context of g - 1 pairs
    np.add.at(counts, corpus.roots, sizes)
    np.add.at(counts, corpus.members, np.repeat(sizes, sizes))
    return counts


def build_noise_table(corpus, exponent=0.75):
    if len(corpus) == 0:
        raise ValueError("cannot build a noise table from an empty corpus")
    return NoiseTable(context_counts(corpus), exponent)


def negative_sampling_step(e, center, context, noise, lr, rng, negatives=None, count=5):
    """One in-place SGD step on a single (center, context) pair.

    ``negatives`` overrides the noise draw (useful for tests). Returns the
    negatives that were used.
    """
    if negatives is None:
        negatives = noise.draw(count, rng)
    negs = np.ascontiguousarray(np.atleast_2d(negatives), dtype=np.int32)
    bad = kernels.sgns_pairs(e.input, e.output,
                             np.array([center], dtype=np.int32),
                             np.array([context], dtype=np.int32),
                             negs, float(lr), float(lr), 1)
    if bad >= 0:
        raise TrainingDivergedError(0, 0)
    return negs[0]


def pair_objective(e, center, context, negatives):
    """Negative-sampling objective of one pair, in float64."""
    rc = e.input[center].astype(np.float64)
    out = e.output.astype(np.float64)
    val = -np.logaddexp(0.0, -(out[context] @ rc))
    for n in negatives:
        if n != context:
            val += -np.logaddexp(0.0, out[n] @ rc)
    return float(val)


def train(corpus, cfg, labels=None, callback=None):
    """Train an :class:`EmbeddingSet` on ``corpus``.

    Each epoch shuffles the prediction pairs, draws ``negative_samples``
    negatives per pair and hands the batch to the kernel. The learning rate
    decays linearly from ``initial_learning_rate`` to 1% of it over all
    epochs. ``callback(epoch, embeddings)`` runs after every epoch.
    With ``workers == 1`` the result is bit-reproducible for a given seed.
    """
    rng = np.random.default_rng(graph_seed(cfg.seed, corpus.source_graph_id))
    e = init_embeddings(corpus.num_nodes, cfg.dimension, rng, labels=labels,
                        graph_id=corpus.source_graph_id)
    if cfg.epochs == 0 or len(corpus) == 0:
        return e
    centers, contexts = corpus_to_prediction_pairs(corpus)
    noise = build_noise_table(corpus, cfg.noise_exponent)
    lr0 = cfg.initial_learning_rate
    npairs = len(centers)
    total = cfg.epochs * npairs
    logger.info("training %d pairs x %d epochs (backend=%s)", npairs, cfg.epochs, kernels.BACKEND)
    for epoch in range(cfg.epochs):
        order = rng.permutation(npairs)
        negs = noise.draw((npairs, cfg.negative_samples), rng).astype(np.int32)
        start = lr0 * (1.0 - (1.0 - LR_FLOOR) * (epoch * npairs) / total)
        end = lr0 * (1.0 - (1.0 - LR_FLOOR) * ((epoch + 1) * npairs) / total)
        bad = kernels.sgns_pairs(e.input, e.output,
                                 np.ascontiguousarray(centers[order]),
                                 np.ascontiguousarray(contexts[order]),
                                 negs, start, end, cfg.workers)
        if bad >= 0 or not (np.isfinite(e.input).all() and np.isfinite(e.output).all()):
            raise TrainingDivergedError(epoch, int(bad))
        if callback is not None:
            callback(epoch, e)
    return e


# -- persistence -----------------------------------------------------------

def format_float32(x):
    """Shortest decimal that round-trips to the same float32."""
    return np.format_float_positional(np.float32(x), unique=True, trim="-")


def write_embeddings(e, path):
    """Text format: ``|V| D`` header, then ``label v1 ... vD`` per node."""
    vals = e.input.astype(np.float32)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{e.vocab_size} {e.dimension}\n")
        for lab, row in zip(e.labels, vals):
            fh.write(lab + " " + " ".join(format_float32(x) for x in row) + "\n")


def read_embeddings(path, graph_id=""):
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise FileFormatError(path, "an embedding file", str(exc)) from None
    with fh:
        header = fh.readline().split()
        if len(header) != 2 or not all(h.isdigit() for h in header):
            raise FileFormatError(path, "'|V| D' header line")
        nv, dim = map(int, header)
        labels, rows = [], []
        for lineno, line in enumerate(fh, 2):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != dim + 1:
                raise FileFormatError(path, f"label followed by {dim} floats", f"line {lineno}")
            labels.append(parts[0])
            rows.append(np.array(parts[1:], dtype=np.float32))
    if len(labels) != nv:
        raise FileFormatError(path, f"{nv} embedding rows", f"found {len(labels)}")
    table = np.vstack(rows) if rows else np.zeros((0, dim), np.float32)
    return EmbeddingSet(table, None, labels, graph_id)


def cosine_matrix(x):
    x = np.asarray(x, dtype=np.float64)
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    x = x / np.where(norms == 0, 1.0, norms)
    return x @ x.T
