"""Undirected graphs over dense integer ids, edge-list I/O and
complement (non-edge) sampling.

A :class:`Graph` is immutable once built. Node ids are dense
``0..num_nodes-1``; the external labels are kept in ``labels``. Bipartite
graphs store their left partition first, so ids ``0..left_size-1`` are left
nodes and the remaining ids are right nodes.
"""
from __future__ import annotations

import io
import os
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import EdgeListParseError, FileFormatError, GraphValidationError

HOMOGENEOUS = "homogeneous"
BIPARTITE = "bipartite"
KINDS = (HOMOGENEOUS, BIPARTITE)

# rejection sampling gives up after this many draws per requested pair
REJECTION_FACTOR = 100


@dataclass(frozen=True, eq=False)
class Graph:
    kind: str
    indptr: np.ndarray
    indices: np.ndarray
    labels: tuple
    left_size: int = 0
    name: str = ""
    _index: dict = field(default=None, repr=False, compare=False)

    @classmethod
    def from_edges(cls, num_nodes, edges, kind=HOMOGENEOUS, labels=None,
                   left_size=0, name=""):
        """Build a graph from an ``(m, 2)`` array of integer endpoints.

        Duplicate edges (in either orientation) are collapsed. Self-loops and,
        for bipartite graphs, edges inside one partition raise
        :class:`GraphValidationError`.
        """
        if kind not in KINDS:
            raise ValueError(f"unknown graph kind {kind!r}")
        num_nodes = int(num_nodes)
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if labels is None:
            labels = tuple(str(i) for i in range(num_nodes))
        labels = tuple(labels)
        if len(labels) != num_nodes:
            raise GraphValidationError(
                f"{len(labels)} labels given for {num_nodes} nodes")
        if len(set(labels)) != num_nodes:
            raise GraphValidationError("node labels are not unique")
        if kind == BIPARTITE:
            if not 0 <= left_size <= num_nodes:
                raise GraphValidationError(f"left_size {left_size} out of range")
        else:
            left_size = 0
        if edges.size and (edges.min() < 0 or edges.max() >= num_nodes):
            raise GraphValidationError("edge endpoint out of range")

        u, v = edges[:, 0], edges[:, 1]
        loops = u == v
        if kind == HOMOGENEOUS and loops.any():
            i = int(np.flatnonzero(loops)[0])
            raise GraphValidationError(f"self-loop on node {labels[u[i]]!r}")
        if kind == BIPARTITE:
            same_side = (u < left_size) == (v < left_size)
            if same_side.any():
                i = int(np.flatnonzero(same_side)[0])
                raise GraphValidationError(
                    f"edge ({labels[u[i]]!r}, {labels[v[i]]!r}) lies within one partition")

        lo, hi = np.minimum(u, v), np.maximum(u, v)
        codes = np.unique(lo * num_nodes + hi)
        lo, hi = codes // num_nodes, codes % num_nodes
        src = np.concatenate([lo, hi])
        dst = np.concatenate([hi, lo])
        order = np.lexsort((dst, src))
        src, dst = src[order], dst[order]
        indptr = np.zeros(num_nodes + 1, dtype=np.int64)
        np.add.at(indptr, src + 1, 1)
        np.cumsum(indptr, out=indptr)
        indices = dst.astype(np.int32)
        indptr.flags.writeable = False
        indices.flags.writeable = False
        return cls(kind, indptr, indices, labels, int(left_size), name)

    @property
    def num_nodes(self):
        return len(self.indptr) - 1

    @property
    def edge_count(self):
        return len(self.indices) // 2

    @property
    def right_size(self):
        return self.num_nodes - self.left_size if self.kind == BIPARTITE else 0

    def _check(self, v):
        if not 0 <= v < self.num_nodes:
            raise IndexError(f"node id {v} out of range for {self.num_nodes} nodes")

    def neighbors(self, v):
        """Sorted neighbor ids of ``v`` (a read-only view)."""
        self._check(v)
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def degree(self, v):
        self._check(v)
        return int(self.indptr[v + 1] - self.indptr[v])

    def degrees(self):
        return np.diff(self.indptr)

    def has_edge(self, u, v):
        nbrs = self.neighbors(u)
        self._check(v)
        i = np.searchsorted(nbrs, v)
        return bool(i < len(nbrs) and nbrs[i] == v)

    def index(self, label):
        """Dense id of an external label; ``KeyError`` if absent."""
        if self._index is None:
            object.__setattr__(self, "_index", {lab: i for i, lab in enumerate(self.labels)})
        return self._index[label]

    def __contains__(self, label):
        try:
            self.index(label)
        except KeyError:
            return False
        return True

    def edges(self):
        """``(m, 2)`` array of edges with the smaller id first."""
        src = np.repeat(np.arange(self.num_nodes, dtype=np.int64), self.degrees())
        keep = src < self.indices
        return np.stack([src[keep], self.indices[keep].astype(np.int64)], axis=1)

    def edge_codes(self):
        e = self.edges()
        return e[:, 0] * self.num_nodes + e[:, 1]

    def is_left(self, v):
        return self.kind == BIPARTITE and v < self.left_size


def neighbors(g, v):
    return g.neighbors(v)


# -- edge-list ingestion ---------------------------------------------------

def _iter_lines(source):
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            yield from fh
        return
    if isinstance(source, bytes):
        source = io.BytesIO(source)
    for line in source:
        yield line


def _decode(line):
    if isinstance(line, bytes):
        line = line.decode("utf-8")
    return line.strip()


def load_edge_list(source, kind=HOMOGENEOUS, labels=None, left_size=None, name=""):
    """Read an undirected graph from a whitespace-separated edge list.

    ``source`` may be a path, a bytes blob, or any iterable of ``str``/``bytes``
    lines. Blank lines and ``#`` comments are skipped. Without ``labels`` ids
    are assigned in first-appearance order; for bipartite graphs the first
    column is the left partition and the second the right, each numbered in
    first-appearance order with the left block first.

    ``labels`` (with ``left_size`` for bipartite graphs) fixes the id
    assignment up front, which is how isolated nodes survive a round trip.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown graph kind {kind!r}")
    pairs = []
    for lineno, raw in enumerate(_iter_lines(source), 1):
        line = _decode(raw)
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise EdgeListParseError(lineno, line, "expected two node labels")
        if kind == HOMOGENEOUS and parts[0] == parts[1]:
            raise GraphValidationError(f"line {lineno}: self-loop on {parts[0]!r}")
        pairs.append((lineno, parts[0], parts[1]))

    if labels is not None:
        labels = list(labels)
        index = {lab: i for i, lab in enumerate(labels)}
        if kind == BIPARTITE and left_size is None:
            raise ValueError("left_size is required with a bipartite label map")
        for lineno, a, b in pairs:
            for lab in (a, b):
                if lab not in index:
                    raise GraphValidationError(f"line {lineno}: label {lab!r} not in label map")
            if kind == BIPARTITE and (index[a] < left_size) == (index[b] < left_size):
                raise GraphValidationError(
                    f"line {lineno}: edge ({a!r}, {b!r}) lies within one partition")
    elif kind == HOMOGENEOUS:
        index = {}
        for _, a, b in pairs:
            index.setdefault(a, len(index))
            index.setdefault(b, len(index))
        labels = list(index)
        left_size = 0
    else:
        left, right = {}, {}
        for lineno, a, b in pairs:
            if a in right or b in left or a == b:
                bad = a if (a in right or a == b) else b
                raise GraphValidationError(
                    f"line {lineno}: label {bad!r} appears on both sides of a bipartite graph")
            left.setdefault(a, len(left))
            right.setdefault(b, len(right))
        left_size = len(left)
        labels = list(left) + list(right)
        index = {lab: i for i, lab in enumerate(labels)}

    edges = np.array([(index[a], index[b]) for _, a, b in pairs], dtype=np.int64).reshape(-1, 2)
    return Graph.from_edges(len(labels), edges, kind, labels, left_size or 0, name)


def write_edge_list(g, path):
    lab = g.labels
    with open(path, "w", encoding="utf-8") as fh:
        for u, v in g.edges():
            fh.write(f"{lab[u]} {lab[v]}\n")


def write_label_map(g, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# kind={g.kind} left_size={g.left_size} name={g.name}\n")
        for i, lab in enumerate(g.labels):
            fh.write(f"{i}\t{lab}\n")


def read_label_map(path):
    """Return ``(labels, meta)`` from an ``id<TAB>label`` file.

    ``meta`` holds the ``key=value`` pairs of a leading ``#`` header, if any.
    """
    labels, meta = [], {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    if "=" in tok:
                        k, v = tok.split("=", 1)
                        meta[k] = v
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0].isdigit() or int(parts[0]) != len(labels):
                raise FileFormatError(path, "dense 'id<TAB>label' lines", f"line {lineno}")
            labels.append(parts[1])
    return labels, meta


def save_graph(g, stem):
    """Write ``<stem>.edges`` and ``<stem>.labels``."""
    stem = str(stem)
    write_edge_list(g, stem + ".edges")
    write_label_map(g, stem + ".labels")


def load_graph(edges_path, kind=None, name=None):
    """Load an edge list, using the sibling ``.labels`` file when present."""
    edges_path = str(edges_path)
    if not os.path.exists(edges_path):
        raise FileFormatError(edges_path, "an edge-list file", "file not found")
    stem = edges_path[:-6] if edges_path.endswith(".edges") else edges_path
    label_path = stem + ".labels"
    labels, meta, left_size = None, {}, None
    if os.path.exists(label_path):
        labels, meta = read_label_map(label_path)
        left_size = int(meta.get("left_size", 0))
    kind = kind or meta.get("kind", HOMOGENEOUS)
    if name is None:
        name = meta.get("name") or os.path.basename(stem)
    return load_edge_list(edges_path, kind, labels=labels, left_size=left_size, name=name)


# -- complement sampling ---------------------------------------------------

class NegativeSample(NamedTuple):
    pairs: np.ndarray
    exhausted: bool


def complement_size(g):
    n = g.num_nodes
    if g.kind == BIPARTITE:
        return g.left_size * g.right_size - g.edge_count
    return n * (n - 1) // 2 - g.edge_count


def enumerate_complement(g):
    """All admissible non-edges as an ``(m, 2)`` array, smaller id first."""
    n = g.num_nodes
    if g.kind == BIPARTITE:
        u, v = np.meshgrid(np.arange(g.left_size), np.arange(g.left_size, n), indexing="ij")
        u, v = u.ravel(), v.ravel()
    else:
        u, v = np.triu_indices(n, 1)
    codes = u.astype(np.int64) * n + v
    keep = ~np.isin(codes, g.edge_codes())
    return np.stack([u[keep], v[keep]], axis=1).astype(np.int64)


def complement_negative_sample(g, count, rng):
    """Draw ``count`` distinct non-edges uniformly from the complement of ``g``.

    Pairs are ``(u, v)`` with ``u < v``; for bipartite graphs ``u`` is the
    left node. Rejection sampling is tried first and, after
    ``REJECTION_FACTOR * count`` draws, the remainder comes from the explicit
    complement. If the complement holds fewer than ``count`` pairs, all of
    them are returned with ``exhausted=True``.
    """
    count = int(count)
    n = g.num_nodes
    if count <= 0:
        return NegativeSample(np.empty((0, 2), dtype=np.int64), False)
    avail = complement_size(g)
    if avail <= count:
        pairs = enumerate_complement(g)
        return NegativeSample(pairs[rng.permutation(len(pairs))], avail < count)

    edge_codes = g.edge_codes()
    chosen, seen = [], set()
    cap, attempts = REJECTION_FACTOR * count, 0
    while len(chosen) < count and attempts < cap:
        batch = min(cap - attempts, max(2 * (count - len(chosen)), 64))
        attempts += batch
        if g.kind == BIPARTITE:
            u = rng.integers(0, g.left_size, batch)
            v = rng.integers(g.left_size, n, batch)
        else:
            a = rng.integers(0, n, batch)
            b = rng.integers(0, n, batch)
            u, v = np.minimum(a, b), np.maximum(a, b)
        codes = u.astype(np.int64) * n + v
        ok = (u != v) & ~np.isin(codes, edge_codes)
        for code in codes[ok].tolist():
            if code not in seen:
                seen.add(code)
                chosen.append(code)
                if len(chosen) == count:
                    break

    if len(chosen) < count:
        rest = enumerate_complement(g)
        rest_codes = rest[:, 0] * n + rest[:, 1]
        rest = rest_codes[~np.isin(rest_codes, np.fromiter(seen, np.int64, len(seen)))]
        extra = rng.choice(rest, count - len(chosen), replace=False)
        chosen.extend(extra.tolist())

    codes = np.asarray(chosen, dtype=np.int64)
    return NegativeSample(np.stack([codes // n, codes % n], axis=1), False)

