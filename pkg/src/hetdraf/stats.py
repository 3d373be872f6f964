"""Rank statistics for comparing several classifiers over several datasets.

Average Friedman ranks, the Friedman chi-square and its F correction, the
Nemenyi critical difference and the win/tie/loss sign test.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

# Two-tailed Nemenyi critical values q_alpha (studentized range / sqrt 2), alpha = 0.05.
# n = 2..10 are the usual published constants; 11..20 from the studentized range
# distribution with infinite degrees of freedom, rounded to 3 decimals.
Q_ALPHA_005 = {
    2: 1.960, 3: 2.343, 4: 2.569, 5: 2.728, 6: 2.850, 7: 2.949, 8: 3.031, 9: 3.102, 10: 3.164,
    11: 3.219, 12: 3.268, 13: 3.313, 14: 3.354, 15: 3.391, 16: 3.426, 17: 3.458, 18: 3.489,
    19: 3.517, 20: 3.544,
}


def q_alpha(n: int, alpha: float = 0.05) -> float:
    if not math.isclose(alpha, 0.05):
        raise ValueError("only alpha = 0.05 is tabulated; pass q_alpha explicitly")
    try:
        return Q_ALPHA_005[n]
    except KeyError:
        raise ValueError(f"no tabulated q_alpha for {n} models (2..20 available)") from None


@dataclass
class ResultsMatrix:
    """``accuracy[i, j]`` is model ``i`` on dataset ``j``."""

    models: list
    datasets: list
    accuracy: np.ndarray
    unit: str = "fraction"  # or "percent"

    def __post_init__(self):
        self.accuracy = np.asarray(self.accuracy, dtype=float)
        n, N = self.accuracy.shape
        if n != len(self.models) or N != len(self.datasets):
            raise ValueError("accuracy shape does not match model/dataset names")
        if n < 2 or N < 2:
            raise ValueError("need at least two models and two datasets")
        if not np.all(np.isfinite(self.accuracy)):
            raise ValueError("missing or non-finite accuracy cells")
        hi = 100.0 if self.unit == "percent" else 1.0
        if self.accuracy.min() < 0 or self.accuracy.max() > hi:
            raise ValueError(f"accuracies outside [0, {hi:g}]")

    @property
    def n_models(self) -> int:
        return len(self.models)

    @property
    def n_datasets(self) -> int:
        return len(self.datasets)


def dataset_ranks(m: ResultsMatrix) -> np.ndarray:
    """Per-dataset ranks (1 = best, ties averaged), shape models x datasets."""
    return np.column_stack([rankdata(-m.accuracy[:, j], method="average") for j in range(m.n_datasets)])


def average_ranks(m: ResultsMatrix) -> np.ndarray:
    return dataset_ranks(m).mean(axis=1)


def friedman_chi2(ranks: Sequence[float], N: int) -> float:
    R = np.asarray(ranks, dtype=float)
    n = len(R)
    if n < 2 or N < 1:
        raise ValueError("need at least two models and one dataset")
    return float(12.0 * N / (n * (n + 1)) * (R @ R - n * (n + 1) ** 2 / 4.0))


def friedman_f(chi2: float, N: int, n: int) -> float:
    denom = N * (n - 1) - chi2
    if denom <= 0:
        raise ValueError("F statistic undefined: N(n-1) must exceed chi-square")
    return float((N - 1) * chi2 / denom)


def nemenyi_cd(q: float, n: int, N: int) -> float:
    if q < 0:
        raise ValueError("q_alpha must be non-negative")
    return float(q * math.sqrt(n * (n + 1) / (6.0 * N)))


def significance_table(ranks: Sequence[float], cd: float) -> list[list[str]]:
    """``table[i][j]`` is ``"r+"`` when model ``i`` is significantly better
    (lower rank) than model ``j``, ``"r-"`` when worse, blank otherwise."""
    if cd < 0:
        raise ValueError("critical difference must be non-negative")
    R = np.asarray(ranks, dtype=float)
    n = len(R)
    out = [[""] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            d = R[j] - R[i]
            # slack absorbs float noise in rank differences that equal the CD exactly
            if d != 0 and abs(d) >= cd - 1e-12:
                out[i][j] = "r+" if d > 0 else "r-"
    return out


def sign_test_threshold(N: int, z: float = 1.96) -> float:
    return N / 2.0 + z * math.sqrt(N) / 2.0


@dataclass(frozen=True)
class WinTieLoss:
    wins: int
    ties: int
    losses: int
    threshold: float

    @property
    def adjusted_wins(self) -> int:
        return self.wins + self.ties // 2

    @property
    def significant(self) -> bool:
        return self.adjusted_wins >= self.threshold

    def as_list(self) -> list:
        return [self.wins, self.ties, self.losses]


def wtl_from_counts(wins: int, ties: int, losses: int, N: int | None = None) -> WinTieLoss:
    total = wins + ties + losses
    N = total if N is None else N
    if total != N:
        raise ValueError("wins + ties + losses must equal the dataset count")
    return WinTieLoss(wins, ties, losses, sign_test_threshold(N))


def win_tie_loss(m: ResultsMatrix, tol: float = 1e-12) -> dict:
    """``out[(a, b)]`` counts datasets where model ``a`` beats / ties / loses to ``b``."""
    A = m.accuracy
    N = m.n_datasets
    thr = sign_test_threshold(N)
    out = {}
    for i, a in enumerate(m.models):
        for j, b in enumerate(m.models):
            if i == j:
                continue
            d = A[i] - A[j]
            tie = np.abs(d) <= tol
            w = int(np.sum((d > 0) & ~tie))
            t = int(np.sum(tie))
            out[a, b] = WinTieLoss(w, t, N - w - t, thr)
    return out


@dataclass
class RankReport:
    models: list
    ranks: np.ndarray
    n_datasets: int
    chi2: float
    f_stat: float | None
    q: float
    alpha: float
    cd: float
    marks: list
    wtl: dict = field(default_factory=dict)
    sign_threshold: float = 0.0


def rank_report(models: Sequence[str], ranks: Sequence[float], N: int, q: float | None = None,
                alpha: float = 0.05, wtl: dict | None = None) -> RankReport:
    R = np.asarray(ranks, dtype=float)
    n = len(R)
    q = q_alpha(n, alpha) if q is None else float(q)
    chi2 = friedman_chi2(R, N)
    try:
        F = friedman_f(chi2, N, n)
    except ValueError:
        F = None
    cd = nemenyi_cd(q, n, N)
    return RankReport(list(models), R, N, chi2, F, q, alpha, cd, significance_table(R, cd), wtl or {},
                      sign_test_threshold(N))


def analyze(m: ResultsMatrix, q: float | None = None, alpha: float = 0.05, paper_n: int | None = None) -> RankReport:
    """Full report for a results matrix; ``paper_n`` overrides the dataset count in the statistics."""
    N = m.n_datasets if paper_n is None else int(paper_n)
    rep = rank_report(m.models, average_ranks(m), N, q, alpha, win_tie_loss(m))
    rep.sign_threshold = sign_test_threshold(m.n_datasets)
    return rep
