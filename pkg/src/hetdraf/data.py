"""Tabular datasets, stratified folds and bootstrap resampling.

All randomness in the package flows through :func:`make_rng`, which builds a
numpy ``Generator`` on the counter-based Philox4x64 bit generator keyed by a
``SeedSequence`` of integers.  Philox output is specified bit-for-bit, so
sequences are identical across platforms.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class DataError(ValueError):
    """Raised for malformed or unusable input data."""


def make_rng(seed: int, *path: int) -> np.random.Generator:
    """Philox generator for ``seed`` and an optional integer derivation path."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, path)])))


def derive_seed(seed: int, *path: int) -> int:
    """Deterministic 63-bit child seed."""
    return int(np.random.SeedSequence([int(seed), *map(int, path)]).generate_state(1, np.uint64)[0] >> np.uint64(1))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    class_count: int
    feature_names: tuple[str, ...] | None = None
    label_tokens: tuple[str, ...] | None = None

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        y = np.asarray(self.labels)
        if X.ndim != 2 or X.shape[1] < 1:
            raise DataError("features must be a 2-D matrix with at least one column")
        if y.ndim != 1 or len(y) != X.shape[0]:
            raise DataError("labels must be a vector with one entry per row")
        if not np.all(np.isfinite(X)):
            raise DataError("all feature values must be finite")
        if not np.issubdtype(y.dtype, np.integer):
            if not np.all(np.equal(np.mod(y, 1), 0)):
                raise DataError("labels must be integer class indices")
        y = y.astype(np.int64)
        K = int(self.class_count)
        if K < 2:
            raise DataError("fewer than 2 classes")
        if y.min() < 0 or y.max() >= K:
            raise DataError(f"labels must lie in [0, {K})")
        if len(np.unique(y)) != K:
            raise DataError("every class index must appear at least once")
        if X.shape[0] < K:
            raise DataError("need at least as many rows as classes")
        if self.label_tokens is not None and len(self.label_tokens) != K:
            raise DataError("label token map does not match class count")
        object.__setattr__(self, "features", _frozen(X))
        object.__setattr__(self, "labels", _frozen(y))
        object.__setattr__(self, "class_count", K)

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def feature_count(self) -> int:
        return self.features.shape[1]

    def all_rows(self) -> "IndexSet":
        return IndexSet(np.arange(self.n_rows), self.n_rows)

    def with_features(self, features: np.ndarray) -> "Dataset":
        return Dataset(features, self.labels, self.class_count, self.feature_names, self.label_tokens)

    def subset(self, rows: "IndexSet | np.ndarray") -> "Dataset":
        """Row subset keeping the class count and token map.

        Every class must still be present (true for stratified training folds).
        """
        idx = rows.indices if isinstance(rows, IndexSet) else np.asarray(rows)
        return Dataset(self.features[idx], self.labels[idx], self.class_count,
                       self.feature_names, self.label_tokens)

    def decode(self, index: int) -> str:
        if self.label_tokens is None:
            return str(index)
        return self.label_tokens[index]

    def encode(self, token: str) -> int:
        if self.label_tokens is None:
            return int(token)
        try:
            return self.label_tokens.index(token)
        except ValueError:
            raise DataError(f"unknown label token {token!r}") from None


@dataclass(frozen=True, eq=False)
class IndexSet:
    """Row indices into a dataset of ``source_size`` rows; duplicates allowed."""

    indices: np.ndarray
    source_size: int

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        if idx.ndim != 1:
            raise DataError("indices must be one-dimensional")
        if len(idx) and (idx.min() < 0 or idx.max() >= self.source_size):
            raise DataError("index out of range for the referenced dataset")
        object.__setattr__(self, "indices", _frozen(idx))

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices.tolist())

    def __eq__(self, other):
        if not isinstance(other, IndexSet):
            return NotImplemented
        return self.source_size == other.source_size and np.array_equal(self.indices, other.indices)

    def __hash__(self):
        return hash((self.source_size, self.indices.tobytes()))


@dataclass(frozen=True)
class FoldPlan:
    k: int
    folds: tuple[tuple[IndexSet, IndexSet], ...]
    seed: int

    def __iter__(self):
        return iter(self.folds)

    def __len__(self) -> int:
        return len(self.folds)


def load_csv(path: str | os.PathLike, has_header: bool = True, label_column: int | str = "last") -> Dataset:
    """Read a comma-separated feature table with one categorical label column.

    Label tokens are mapped to ``0..K-1`` in lexicographic order.
    """
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise DataError(f"{path}: no such file")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    header = None
    if has_header:
        if not rows:
            raise DataError(f"{path}: empty file")
        header, rows = rows[0], rows[1:]
    if not rows:
        raise DataError(f"{path}: no data rows")
    width = len(header) if header is not None else len(rows[0])
    if width < 2:
        raise DataError(f"{path}: need at least one feature column and a label column")
    lab = width - 1 if label_column == "last" else int(label_column)
    if lab < 0:
        lab += width
    if not 0 <= lab < width:
        raise DataError(f"{path}: label column {label_column} out of range")

    X = np.empty((len(rows), width - 1))
    tokens = []
    line_offset = 2 if has_header else 1
    for i, row in enumerate(rows):
        if len(row) != width:
            raise DataError(f"{path}: line {i + line_offset}: expected {width} columns, found {len(row)}")
        tokens.append(row[lab].strip())
        j = 0
        for c, cell in enumerate(row):
            if c == lab:
                continue
            try:
                v = float(cell)
            except ValueError:
                raise DataError(f"{path}: line {i + line_offset}, column {c + 1}: "
                                f"non-numeric feature value {cell!r}") from None
            if not np.isfinite(v):
                raise DataError(f"{path}: line {i + line_offset}, column {c + 1}: non-finite value {cell!r}")
            X[i, j] = v
            j += 1

    vocab = sorted(set(tokens))
    if len(vocab) < 2:
        raise DataError(f"{path}: fewer than 2 classes")
    lookup = {t: k for k, t in enumerate(vocab)}
    y = np.array([lookup[t] for t in tokens], dtype=np.int64)
    names = None
    if header is not None:
        names = tuple(h for c, h in enumerate(header) if c != lab)
    return Dataset(X, y, len(vocab), names, tuple(vocab))


def read_feature_csv(path: str | os.PathLike, n_features: int, has_header: bool = True) -> np.ndarray:
    """Read rows for prediction; a trailing label column is tolerated and dropped."""
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise DataError(f"{path}: no such file")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if has_header and rows:
        rows = rows[1:]
    if not rows:
        raise DataError(f"{path}: no data rows")
    width = len(rows[0])
    if width not in (n_features, n_features + 1):
        raise DataError(f"{path}: feature count mismatch: model expects {n_features} features, "
                        f"file has {width} columns")
    out = np.empty((len(rows), n_features))
    for i, row in enumerate(rows):
        if len(row) != width:
            raise DataError(f"{path}: line {i + 1}: inconsistent column count")
        try:
            out[i] = [float(c) for c in row[:n_features]]
        except ValueError:
            raise DataError(f"{path}: line {i + 1}: non-numeric feature value") from None
    if not np.all(np.isfinite(out)):
        raise DataError(f"{path}: non-finite feature value")
    return out


def stratified_kfold(ds: Dataset, k: int, seed: int) -> FoldPlan:
    """Stratified k-fold split.

    Each class is shuffled and dealt round-robin into the folds, starting at a
    rotating offset so fold sizes stay within one row of each other.
    """
    if k < 2:
        raise DataError("fold count must be at least 2")
    counts = np.bincount(ds.labels, minlength=ds.class_count)
    short = [c for c in range(ds.class_count) if counts[c] < k]
    if short:
        raise DataError(f"classes {short} have fewer than {k} members")
    rng = make_rng(seed, 0x51F)
    buckets: list[list[int]] = [[] for _ in range(k)]
    offset = 0
    for c in range(ds.class_count):
        members = np.flatnonzero(ds.labels == c)
        members = members[rng.permutation(len(members))]
        for j, row in enumerate(members):
            buckets[(offset + j) % k].append(int(row))
        offset = (offset + len(members)) % k
    n = ds.n_rows
    folds = []
    for b in buckets:
        test = np.sort(np.array(b, dtype=np.int64))
        mask = np.ones(n, dtype=bool)
        mask[test] = False
        folds.append((IndexSet(np.flatnonzero(mask), n), IndexSet(test, n)))
    return FoldPlan(k, tuple(folds), int(seed))


def bootstrap(source: IndexSet | np.ndarray, seed: int | np.random.Generator) -> IndexSet | np.ndarray:
    """Same-size uniform resample with replacement of ``source``.

    Accepts an :class:`IndexSet` (returns one) or a raw index array (returns
    an array); ``seed`` may be an integer or a generator.
    """
    raw = source.indices if isinstance(source, IndexSet) else np.asarray(source)
    if len(raw) == 0:
        raise DataError("cannot bootstrap an empty index set")
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed, 0xB007)
    out = raw[rng.integers(0, len(raw), size=len(raw))]
    if isinstance(source, IndexSet):
        return IndexSet(out, source.source_size)
    return out


@dataclass(frozen=True)
class Standardizer:
    """Per-feature z-score; zero-variance features map to 0."""

    mean: np.ndarray
    scale: np.ndarray
    constant: np.ndarray = field(default=None)

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        X = np.asarray(X, dtype=float)
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        constant = std <= 1e-12 * np.maximum(1.0, np.abs(mean))
        scale = np.where(constant, 1.0, std)
        return cls(mean, scale, constant)

    def transform(self, X: np.ndarray) -> np.ndarray:
        Z = (np.asarray(X, dtype=float) - self.mean) / self.scale
        if self.constant is not None and self.constant.any():
            Z[..., self.constant] = 0.0
        return Z

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "scale": self.scale.tolist(),
                "constant": self.constant.astype(int).tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Standardizer":
        return cls(np.array(d["mean"], dtype=float), np.array(d["scale"], dtype=float),
                   np.array(d["constant"], dtype=bool))


def make_xor(n: int = 400, noise: float = 0.1, seed: int = 0) -> Dataset:
    """Four Gaussian clusters at (+-1, +-1); class = sign(x0) != sign(x1)."""
    rng = make_rng(seed, 0x0A)
    centers = np.array([[1.0, 1.0], [-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0]])
    which = np.arange(n) % 4
    X = centers[which] + noise * rng.standard_normal((n, 2))
    y = (which >= 2).astype(np.int64)
    return Dataset(X, y, 2, ("x0", "x1"), ("0", "1"))


def as_index_array(rows: IndexSet | Sequence[int] | np.ndarray) -> np.ndarray:
    if isinstance(rows, IndexSet):
        return rows.indices
    return np.asarray(rows, dtype=np.int64)
