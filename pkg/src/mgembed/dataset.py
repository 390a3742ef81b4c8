"""Feature datasets, persistence, standardization and stratified folds."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, FileFormatError
from .skipgram import format_float32

# pair rows are keyed "<user>|<seller>"; splits partition on the user part
PAIR_SEP = "|"


@dataclass(eq=False)
class FeatureDataset:
    matrix: np.ndarray
    labels: np.ndarray
    entity_ids: tuple
    feature_origin: tuple = ()

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.float32)
        if self.matrix.ndim != 2:
            raise DataError("feature matrix must be two-dimensional")
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.entity_ids = tuple(self.entity_ids)
        n = self.matrix.shape[0]
        if len(self.labels) != n or len(self.entity_ids) != n:
            raise DataError("matrix, labels and entity ids disagree in length")
        if not np.isfinite(self.matrix).all():
            raise DataError("feature matrix contains non-finite values")
        if n and not np.isin(self.labels, (0, 1)).all():
            raise DataError("labels must be 0 or 1")
        if not self.feature_origin:
            self.feature_origin = tuple(f"f{j}" for j in range(self.matrix.shape[1]))
        self.feature_origin = tuple(self.feature_origin)

    @property
    def n_rows(self):
        return self.matrix.shape[0]

    @property
    def n_features(self):
        return self.matrix.shape[1]

    def subset(self, rows):
        rows = np.asarray(rows, dtype=np.int64)
        return FeatureDataset(self.matrix[rows], self.labels[rows],
                              [self.entity_ids[i] for i in rows], self.feature_origin)

    def select_columns(self, cols):
        cols = np.asarray(cols, dtype=np.int64)
        return FeatureDataset(self.matrix[:, cols], self.labels, self.entity_ids,
                              [self.feature_origin[j] for j in cols])

    def groups(self):
        """Split key per row: the entity id, or its user part for pair rows."""
        return np.array([e.split(PAIR_SEP, 1)[0] for e in self.entity_ids])

    def require_both_classes(self):
        if self.n_rows < 2 or len(np.unique(self.labels)) < 2:
            raise DataError("both classes must be present")


def write_dataset(ds, path):
    """Header ``N F`` then ``entity_id label f1 ... fF`` per row."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{ds.n_rows} {ds.n_features}\n")
        for ent, lab, row in zip(ds.entity_ids, ds.labels, ds.matrix):
            fh.write(f"{ent} {lab} " + " ".join(format_float32(x) for x in row) + "\n")


def read_dataset(path, feature_origin=()):
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise FileFormatError(path, "a dataset file", str(exc)) from None
    with fh:
        header = fh.readline().split()
        if len(header) != 2 or not all(h.isdigit() for h in header):
            raise FileFormatError(path, "'N F' header line")
        n, f = map(int, header)
        ents, labels, rows = [], [], []
        for lineno, line in enumerate(fh, 2):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != f + 2 or parts[1] not in ("0", "1"):
                raise FileFormatError(path, f"'entity label' followed by {f} floats", f"line {lineno}")
            ents.append(parts[0])
            labels.append(int(parts[1]))
            rows.append(np.array(parts[2:], dtype=np.float32))
    if len(ents) != n:
        raise FileFormatError(path, f"{n} rows", f"found {len(ents)}")
    matrix = np.vstack(rows) if rows else np.zeros((0, f), np.float32)
    return FeatureDataset(matrix, labels, ents, feature_origin)


class Standardizer:
    """Per-column zero mean / unit variance; constant columns are only centered."""

    def __init__(self, mean, scale):
        self.mean = np.asarray(mean, dtype=np.float64)
        self.scale = np.asarray(scale, dtype=np.float64)

    @classmethod
    def fit(cls, x):
        x = np.asarray(x, dtype=np.float64)
        sd = x.std(axis=0)
        return cls(x.mean(axis=0), np.where(sd > 0, sd, 1.0))

    @classmethod
    def identity(cls, n_features):
        return cls(np.zeros(n_features), np.ones(n_features))

    def transform(self, x):
        return (np.asarray(x, dtype=np.float64) - self.mean) / self.scale


def stratified_kfold(labels, folds, rng):
    """Test-index arrays for ``folds`` stratified folds.

    Each class is shuffled and dealt round-robin, so per-fold class counts
    differ by at most one.
    """
    labels = np.asarray(labels)
    if folds < 2:
        raise ValueError("need at least 2 folds")
    if len(labels) < folds:
        raise DataError(f"{len(labels)} rows cannot fill {folds} folds")
    assignment = np.empty(len(labels), dtype=np.int64)
    offset = 0
    for cls in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == cls))
        assignment[idx] = (np.arange(len(idx)) + offset) % folds
        offset += len(idx)
    return [np.flatnonzero(assignment == f) for f in range(folds)]
