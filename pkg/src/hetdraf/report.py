"""Markdown report from a benchmark results CSV."""

from __future__ import annotations

from collections import defaultdict

import numpy as np

from .bench import read_results
from .data import DataError
from .stats import RankReport, ResultsMatrix, analyze


def results_matrix(records) -> ResultsMatrix:
    """Mean accuracy per (variant, dataset) over folds and repetitions.

    Models and datasets keep their order of first appearance.
    """
    acc = defaultdict(list)
    models, datasets = [], []
    for r in records:
        if r.variant not in models:
            models.append(r.variant)
        if r.dataset not in datasets:
            datasets.append(r.dataset)
        acc[r.variant, r.dataset].append(r.accuracy)
    missing = [f"{m} on {d}" for m in models for d in datasets if (m, d) not in acc]
    if missing:
        raise DataError("results are missing for: " + ", ".join(missing))
    if len(models) < 2 or len(datasets) < 2:
        raise DataError("a report needs at least two variants and two datasets")
    A = np.array([[np.mean(acc[m, d]) for d in datasets] for m in models])
    return ResultsMatrix(models, datasets, A)


def _fmt(x: float, nd: int = 4) -> str:
    return f"{x:.{nd}f}"


def cd_groups(models, ranks, cd) -> list[list[str]]:
    """Maximal runs of rank-ordered models whose spread stays below the CD."""
    order = np.argsort(ranks, kind="stable")
    R = np.asarray(ranks)[order]
    names = [models[i] for i in order]
    groups, last_end = [], -1
    for i in range(len(R)):
        j = i
        while j + 1 < len(R) and R[j + 1] - R[i] < cd:
            j += 1
        if j > i and j > last_end:
            groups.append(names[i:j + 1])
            last_end = j
    return groups


def render(m: ResultsMatrix, rep: RankReport) -> str:
    n = m.n_models
    order = sorted(range(n), key=lambda i: (rep.ranks[i], i))
    mean_acc = m.accuracy.mean(axis=1) * (1.0 if m.unit == "percent" else 100.0)
    lines = ["# Classifier comparison", ""]
    lines.append(f"{n} models, {m.n_datasets} datasets in the results file"
                 + (f"; statistics computed with N = {rep.n_datasets}" if rep.n_datasets != m.n_datasets else "")
                 + ".")
    lines += ["", "## Average accuracy and Friedman rank", "",
              "| Position | Model | Avg. accuracy (%) | Avg. rank |", "|---:|---|---:|---:|"]
    for pos, i in enumerate(order, start=1):
        lines.append(f"| {pos} | {m.models[i]} | {mean_acc[i]:.2f} | {rep.ranks[i]:.2f} |")

    df1, df2 = n - 1, (n - 1) * (rep.n_datasets - 1)
    lines += ["", "## Friedman test", "",
              f"- chi2_F = {_fmt(rep.chi2)} (df = {df1})",
              f"- F_F = {_fmt(rep.f_stat) if rep.f_stat is not None else 'undefined'} (df = {df1}, {df2})"]

    lines += ["", "## Nemenyi post-hoc test", "",
              f"- alpha = {rep.alpha:g}, q_alpha = {rep.q:.4f}",
              f"- CD = {_fmt(rep.cd)}", "",
              "Ranking: " + " < ".join(f"{m.models[i]} ({rep.ranks[i]:.2f})" for i in order), ""]
    groups = cd_groups(m.models, rep.ranks, rep.cd)
    if groups:
        lines.append("Not significantly different (rank spread below CD):")
        lines += [f"- {', '.join(g)}" for g in groups]
    else:
        lines.append("Every pair of models differs by at least the CD.")
    lines += ["", "Pairwise significance (r+: row model significantly better than column model, "
              "r-: significantly worse):", ""]
    lines.append("| | " + " | ".join(m.models) + " |")
    lines.append("|---|" + "---|" * n)
    for i in range(n):
        lines.append(f"| {m.models[i]} | " + " | ".join(rep.marks[i][j] for j in range(n)) + " |")

    lines += ["", "## Pairwise win-tie-loss", "",
              f"Cells are [wins, ties, losses] of the row model against the column model; `*` marks "
              f"wins + floor(ties/2) >= {rep.sign_threshold:.2f} (sign test, alpha = 0.05).", ""]
    lines.append("| | " + " | ".join(m.models[:-1]) + " |")
    lines.append("|---|" + "---|" * (n - 1))
    for i in range(1, n):
        cells = []
        for j in range(n - 1):
            if j < i:
                w = rep.wtl[m.models[i], m.models[j]]
                cells.append(f"[{w.wins},{w.ties},{w.losses}]" + ("*" if w.significant else ""))
            else:
                cells.append("")
        lines.append(f"| {m.models[i]} | " + " | ".join(cells) + " |")
    lines.append("")
    return "\n".join(lines)


def build_report(results_path, q: float | None = None, alpha: float = 0.05, paper_n: int | None = None) -> str:
    m = results_matrix(read_results(results_path))
    return render(m, analyze(m, q, alpha, paper_n))
