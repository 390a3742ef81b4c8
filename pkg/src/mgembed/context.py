"""Neighborhood-permutation training groups.

For every node with neighbors, ``n`` random permutations of its neighbor list
are cut into consecutive chunks of at most ``k`` members. Each chunk plus its
root node is one training group; every node in a group predicts every other.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import FileFormatError

DEFAULT_K = 5
DEFAULT_N = 5


class Group(NamedTuple):
    root: int
    members: tuple


@dataclass(frozen=True, eq=False)
class GroupCorpus:
    """Groups stored flat: group ``i`` has root ``roots[i]`` and members
    ``members[offsets[i]:offsets[i + 1]]``."""

    roots: np.ndarray
    offsets: np.ndarray
    members: np.ndarray
    k: int
    n: int
    num_nodes: int
    source_graph_id: str = ""

    def __len__(self):
        return len(self.roots)

    def group(self, i):
        lo, hi = self.offsets[i], self.offsets[i + 1]
        return Group(int(self.roots[i]), tuple(self.members[lo:hi].tolist()))

    def __iter__(self):
        for i in range(len(self)):
            yield self.group(i)

    def sizes(self):
        """Member count per group (root excluded)."""
        return np.diff(self.offsets)


def node_rng(seed, node):
    """Per-node generator, independent of how nodes are split across workers."""
    return np.random.default_rng([int(seed), int(node)])


def _node_groups(g, v, k, n, seed):
    nbrs = g.neighbors(v)
    if len(nbrs) == 0:
        return []
    rng = node_rng(seed, v)
    chunks = []
    for _ in range(n):
        perm = rng.permutation(nbrs)
        chunks.extend(perm[i:i + k] for i in range(0, len(perm), k))
    return chunks


def _range_groups(g, nodes, k, n, seed):
    roots, chunks = [], []
    for v in nodes:
        cs = _node_groups(g, v, k, n, seed)
        roots.extend([v] * len(cs))
        chunks.extend(cs)
    return roots, chunks


def generate_groups(g, k=DEFAULT_K, n=DEFAULT_N, seed=0, workers=1):
    """Build the :class:`GroupCorpus` for graph ``g``.

    Groups are ordered by root id, then permutation, then chunk position.
    Trailing short chunks are kept. Isolated nodes contribute nothing.
    The result depends only on ``seed``, not on ``workers``.
    """
    if k < 1 or n < 1:
        raise ValueError(f"k and n must be >= 1 (got k={k}, n={n})")
    nodes = np.arange(g.num_nodes)
    if workers > 1 and g.num_nodes > 1:
        parts = np.array_split(nodes, workers)
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(lambda p: _range_groups(g, p, k, n, seed), parts))
    else:
        results = [_range_groups(g, nodes, k, n, seed)]

    roots = [r for rs, _ in results for r in rs]
    chunks = [c for _, cs in results for c in cs]
    sizes = np.fromiter((len(c) for c in chunks), dtype=np.int64, count=len(chunks))
    offsets = np.zeros(len(chunks) + 1, dtype=np.int64)
    np.cumsum(sizes, out=offsets[1:])
    members = np.concatenate(chunks).astype(np.int32) if chunks else np.empty(0, np.int32)
    return GroupCorpus(np.asarray(roots, dtype=np.int32), offsets, members,
                       int(k), int(n), g.num_nodes, g.name)


def expected_group_count(g, k, n):
    deg = g.degrees()
    return int(n * np.sum(-(-deg // k)))


def _group_nodes(corpus, idx, size):
    """``(len(idx), size + 1)`` matrix of [root, members...] for equal-size groups."""
    starts = corpus.offsets[idx]
    mem = corpus.members[starts[:, None] + np.arange(size)]
    return np.concatenate([corpus.roots[idx, None], mem], axis=1)


def corpus_to_prediction_pairs(corpus):
    """Expand every group into all ordered (center, context) pairs.

    A group with root ``r`` and ``j`` members yields ``j * (j + 1)`` pairs,
    one per ordered pair of distinct positions in ``[r, m1, ..., mj]``.
    Pairs are laid out group by group, row-major over (center, context)
    positions.
    """
    sizes = corpus.sizes()
    per_group = sizes * (sizes + 1)
    starts = np.zeros(len(sizes) + 1, dtype=np.int64)
    np.cumsum(per_group, out=starts[1:])
    total = int(starts[-1])
    centers = np.empty(total, dtype=np.int32)
    contexts = np.empty(total, dtype=np.int32)
    for size in np.unique(sizes):
        idx = np.flatnonzero(sizes == size)
        nodes = _group_nodes(corpus, idx, int(size))
        ci, xi = np.nonzero(~np.eye(size + 1, dtype=bool))
        pos = starts[idx][:, None] + np.arange(len(ci))
        centers[pos] = nodes[:, ci]
        contexts[pos] = nodes[:, xi]
    return centers, contexts


def iter_prediction_pairs(groups):
    """Streaming counterpart of :func:`corpus_to_prediction_pairs`."""
    for root, members in groups:
        nodes = (root,) + tuple(members)
        for i, a in enumerate(nodes):
            for j, b in enumerate(nodes):
                if i != j:
                    yield a, b


def write_corpus(corpus, path):
    with open(path, "w", encoding="utf-8") as fh:
        for root, members in corpus:
            fh.write(f"{root}\t{' '.join(map(str, members))}\n")


def iter_corpus_file(path):
    """Yield :class:`Group` records from a corpus dump without loading it whole."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            try:
                root, rest = line.split("\t")
                yield Group(int(root), tuple(int(m) for m in rest.split()))
            except ValueError:
                raise FileFormatError(path, "'root<TAB>m1 m2 ...' lines", f"line {lineno}") from None


def read_corpus(path, k, n, num_nodes, source_graph_id=""):
    roots, chunks = [], []
    for root, members in iter_corpus_file(path):
        roots.append(root)
        chunks.append(members)
    offsets = np.zeros(len(chunks) + 1, dtype=np.int64)
    np.cumsum([len(c) for c in chunks], out=offsets[1:])
    members = np.fromiter((m for c in chunks for m in c), dtype=np.int32, count=int(offsets[-1]))
    return GroupCorpus(np.asarray(roots, dtype=np.int32), offsets, members,
                       k, n, num_nodes, source_graph_id)
