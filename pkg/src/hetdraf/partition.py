"""Grouping a node's classes into two hyperclasses.

Candidates come from exhaustive enumeration (up to eight classes) or a small
genetic search (more than eight), are ranked by the impurity a perfect
hyperclass separator would leave behind, and are tie-broken by the
Bhattacharyya separability of the two groups.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from .data import make_rng


@dataclass(frozen=True, eq=False)
class GaussianSummary:
    mean: np.ndarray
    cov: np.ndarray
    count: int


def _regularize(mean: np.ndarray, cov: np.ndarray, n: int) -> GaussianSummary:
    m = len(mean)
    if n < m + 2 or np.linalg.matrix_rank(cov, hermitian=True) < m:
        eps = 1e-6 * max(float(np.trace(cov)) / m, 1.0)
        cov = np.diag(np.clip(np.diag(cov), 0.0, None)) + eps * np.eye(m)
    return GaussianSummary(mean, cov, int(n))


def gaussian_summary(X: np.ndarray) -> GaussianSummary:
    """Mean and population covariance of the rows of ``X``.

    Small samples (``n < m + 2``) and rank-deficient covariances fall back to
    the diagonal plus ``1e-6 * max(trace/m, 1)`` on the diagonal.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    if n == 0:
        raise ValueError("cannot summarize an empty row set")
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = Xc.T @ Xc / n
    return _regularize(mean, 0.5 * (cov + cov.T), n)


def bhattacharyya(g1: GaussianSummary, g2: GaussianSummary) -> float:
    if g1.mean.shape != g2.mean.shape:
        raise ValueError("summaries cover different feature subsets")
    S = 0.5 * (g1.cov + g2.cov)
    d = g2.mean - g1.mean
    s, ld = np.linalg.slogdet(S)
    s1, ld1 = np.linalg.slogdet(g1.cov)
    s2, ld2 = np.linalg.slogdet(g2.cov)
    if s <= 0 or s1 <= 0 or s2 <= 0:
        raise np.linalg.LinAlgError("covariance is not positive definite")
    maha = float(d @ np.linalg.solve(S, d))
    val = maha / 8.0 + 0.5 * (ld - 0.5 * (ld1 + ld2))
    return max(val, 0.0)


@dataclass(frozen=True)
class BinaryPartition:
    """Two disjoint non-empty class groups; the smallest class is always in ``pos``."""

    pos: frozenset
    neg: frozenset

    def __post_init__(self):
        pos, neg = frozenset(int(c) for c in self.pos), frozenset(int(c) for c in self.neg)
        if not pos or not neg:
            raise ValueError("both hyperclasses must be non-empty")
        if pos & neg:
            raise ValueError("hyperclasses overlap")
        if min(pos | neg) not in pos:
            pos, neg = neg, pos
        object.__setattr__(self, "pos", pos)
        object.__setattr__(self, "neg", neg)

    @property
    def classes(self) -> frozenset:
        return self.pos | self.neg

    def key(self) -> tuple:
        return tuple(sorted(self.pos))

    def targets(self, labels: np.ndarray) -> np.ndarray:
        """+1 for rows whose class is in ``pos``, -1 otherwise."""
        return np.where(np.isin(labels, list(self.pos)), 1.0, -1.0)

    def __repr__(self):
        return f"BinaryPartition({sorted(self.pos)} | {sorted(self.neg)})"


@dataclass(frozen=True)
class PartitionScore:
    partition: BinaryPartition
    separability: float
    ideal_gini: float


class NodeClassStats:
    """Per-class counts, means and scatter matrices at one node."""

    def __init__(self, X: np.ndarray, labels: np.ndarray):
        X = np.asarray(X, dtype=float)
        labels = np.asarray(labels)
        self.classes, inv, counts = np.unique(labels, return_inverse=True, return_counts=True)
        self.counts = counts
        self.n = len(labels)
        self.dim = X.shape[1]
        k = len(self.classes)
        self.means = np.zeros((k, self.dim))
        np.add.at(self.means, inv, X)
        self.means /= counts[:, None]
        self.scatters = np.empty((k, self.dim, self.dim))
        for j in range(k):
            Xc = X[inv == j] - self.means[j]
            self.scatters[j] = Xc.T @ Xc
        self._index = {int(c): j for j, c in enumerate(self.classes)}
        self._cache: dict = {}

    def _rows(self, group: Iterable[int]) -> np.ndarray:
        return np.array([self._index[int(c)] for c in group], dtype=np.int64)

    def group_summary(self, group: Iterable[int]) -> GaussianSummary:
        key = tuple(sorted(int(c) for c in group))
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        idx = self._rows(key)
        cnt = self.counts[idx]
        n = int(cnt.sum())
        mu = (cnt[:, None] * self.means[idx]).sum(axis=0) / n
        dm = self.means[idx] - mu
        scatter = self.scatters[idx].sum(axis=0) + (cnt[:, None, None] * dm[:, :, None] * dm[:, None, :]).sum(axis=0)
        cov = scatter / n
        g = _regularize(mu, 0.5 * (cov + cov.T), n)
        self._cache[key] = g
        return g

    def ideal_gini(self, p: BinaryPartition) -> float:
        total = 0.0
        for side in (p.pos, p.neg):
            c = self.counts[self._rows(side)].astype(float)
            ns = c.sum()
            total += ns - (c @ c) / ns
        return total / self.n

    def separability(self, p: BinaryPartition) -> float:
        return bhattacharyya(self.group_summary(p.pos), self.group_summary(p.neg))

    def score(self, p: BinaryPartition) -> PartitionScore:
        return PartitionScore(p, self.separability(p), self.ideal_gini(p))


def _rank_key(s: PartitionScore) -> tuple:
    return (round(s.ideal_gini, 12), -round(s.separability, 12), s.partition.key())


def bhattacharyya_partition(X: np.ndarray, labels: np.ndarray, stats: NodeClassStats | None = None) -> BinaryPartition:
    """Seed the two groups with the most distant class pair; others join the nearer seed."""
    st = stats if stats is not None else NodeClassStats(X, labels)
    classes = [int(c) for c in st.classes]
    if len(classes) < 2:
        raise ValueError("need at least two classes at the node")
    summ = {c: st.group_summary((c,)) for c in classes}
    dist = {}
    best, seeds = -1.0, None
    for a, b in combinations(classes, 2):
        d = bhattacharyya(summ[a], summ[b])
        dist[a, b] = dist[b, a] = d
        if d > best:
            best, seeds = d, (a, b)
    p, f = seeds
    pos, neg = {p}, {f}
    for c in classes:
        if c in (p, f):
            continue
        (pos if dist[c, p] <= dist[c, f] else neg).add(c)
    return BinaryPartition(frozenset(pos), frozenset(neg))


MAX_ENUMERATED = 8


def enumerate_partitions(classes: Iterable[int]) -> list[BinaryPartition]:
    """All ``2**(K-1) - 1`` two-group splits of ``classes`` (2 <= K <= 8)."""
    cls = sorted({int(c) for c in classes})
    K = len(cls)
    if K < 2:
        raise ValueError("need at least two classes")
    if K > MAX_ENUMERATED:
        raise ValueError(f"{K} classes: enumeration is limited to {MAX_ENUMERATED}, use the genetic search")
    first, rest = cls[0], cls[1:]
    out = []
    for mask in range(2 ** (K - 1) - 1):
        pos = {first} | {c for i, c in enumerate(rest) if mask >> i & 1}
        out.append(BinaryPartition(frozenset(pos), frozenset(set(cls) - pos)))
    return out


def rank_partitions(candidates: Sequence[BinaryPartition], X: np.ndarray, labels: np.ndarray,
                    top_m: int | None = None, stats: NodeClassStats | None = None) -> list[PartitionScore]:
    """Score candidates, best first: low ideal Gini, then high separability, then class order."""
    if not candidates:
        raise ValueError("no candidate partitions")
    st = stats if stats is not None else NodeClassStats(X, labels)
    unique = {p.key(): p for p in candidates}
    scored = sorted((st.score(p) for p in unique.values()), key=_rank_key)
    return scored if top_m is None else scored[:top_m]


@dataclass(frozen=True)
class GAParams:
    population: int = 32
    generations: int = 30
    crossover_rate: float = 0.9
    mutation_rate: float | None = None  # per bit; None means 1/K
    elitism: int = 2
    tournament: int = 2


def _bits_to_partition(bits: np.ndarray, classes: np.ndarray) -> BinaryPartition:
    return BinaryPartition(frozenset(classes[bits].tolist()), frozenset(classes[~bits].tolist()))


def _canonical_bits(bits: np.ndarray) -> np.ndarray:
    return bits if bits[0] else ~bits


def _repair(bits: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    if bits.all() or not bits.any():
        bits = bits.copy()
        bits[rng.integers(len(bits))] ^= True
    return bits


def ga_partition_search(X: np.ndarray, labels: np.ndarray, top_m: int | None = None,
                        params: GAParams = GAParams(), seed: int | np.random.Generator = 0,
                        stats: NodeClassStats | None = None) -> list[BinaryPartition]:
    """Genetic search over class bit-strings (bit set = class in ``pos``).

    Fitness is the :func:`rank_partitions` order.  Tournament selection,
    one-point crossover, per-bit mutation and elitism; strings with every bit
    equal are repaired by flipping one random bit.  Returns the ``top_m`` best
    distinct partitions of the final population (best first), followed by the
    Bhattacharyya partition when it is not already among them.
    """
    st = stats if stats is not None else NodeClassStats(X, labels)
    classes = st.classes.astype(np.int64)
    K = len(classes)
    if K < 2:
        raise ValueError("need at least two classes")
    if top_m is None:
        top_m = K
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed, 0x6A)
    pmut = params.mutation_rate if params.mutation_rate is not None else 1.0 / K

    scores: dict[tuple, tuple] = {}

    def fitness(bits: np.ndarray) -> tuple:
        p = _bits_to_partition(bits, classes)
        k = p.key()
        if k not in scores:
            scores[k] = _rank_key(st.score(p))
        return scores[k]

    pop = [_canonical_bits(_repair(rng.random(K) < 0.5, rng)) for _ in range(params.population)]
    for _ in range(params.generations):
        keyed = sorted(pop, key=fitness)
        nxt = [b.copy() for b in keyed[:params.elitism]]

        def pick():
            idx = rng.integers(0, len(keyed), size=params.tournament)
            return min((keyed[i] for i in idx), key=fitness)

        while len(nxt) < params.population:
            a, b = pick(), pick()
            if K > 1 and rng.random() < params.crossover_rate:
                cut = int(rng.integers(1, K))
                c1 = np.concatenate([a[:cut], b[cut:]])
                c2 = np.concatenate([b[:cut], a[cut:]])
            else:
                c1, c2 = a.copy(), b.copy()
            for child in (c1, c2):
                child ^= rng.random(K) < pmut
                nxt.append(_canonical_bits(_repair(child, rng)))
                if len(nxt) == params.population:
                    break
        pop = nxt

    out, seen = [], set()
    for bits in sorted(pop, key=fitness):
        p = _bits_to_partition(bits, classes)
        if p.key() not in seen:
            seen.add(p.key())
            out.append(p)
        if len(out) == top_m:
            break
    bp = bhattacharyya_partition(X, labels, st)
    if bp.key() not in seen:
        out.append(bp)
    return out


def candidate_partitions(X: np.ndarray, labels: np.ndarray, top_m: int | None = None,
                         ga_params: GAParams = GAParams(),
                         seed: int | np.random.Generator = 0) -> list[BinaryPartition]:
    """Ranked candidate set for a node: ``top_m`` partitions (default: one per
    class present), always containing the Bhattacharyya partition."""
    st = NodeClassStats(X, labels)
    K = len(st.classes)
    if top_m is None:
        top_m = K
    bp = bhattacharyya_partition(X, labels, st)
    if K <= MAX_ENUMERATED:
        ranked = [s.partition for s in rank_partitions(enumerate_partitions(st.classes), X, labels, None, st)]
    else:
        ranked = ga_partition_search(X, labels, top_m, ga_params, seed, st)
    chosen = ranked[:top_m]
    if bp.key() not in {p.key() for p in chosen}:
        chosen = chosen[:top_m - 1] + [bp] if top_m > 1 else [bp]
    return chosen
