import math

import numpy as np
import pytest

from hetdraf import stats as st

# average Friedman ranks over 106 datasets as published for the nine compared forests
PUBLISHED_RANKS = {
    "RaF": 5.61, "MPRaF-T": 5.06, "MPRaF-P": 4.91, "MPRaF-N": 5.75, "RaF-PCA": 5.71,
    "RaF-LDA": 4.78, "DRaF": 5.07, "Het-RaF": 4.16, "Het-DRaF": 3.96,
}


def test_ranks_dominant_model():
    m = st.ResultsMatrix(["a", "b"], ["d1", "d2", "d3"], [[0.9, 0.8, 0.7], [0.5, 0.4, 0.3]])
    assert st.average_ranks(m).tolist() == [1.0, 2.0]


def test_ranks_full_tie():
    m = st.ResultsMatrix(["a", "b", "c"], ["d1", "d2"], [[0.5, 0.9], [0.5, 0.8], [0.5, 0.7]])
    assert st.dataset_ranks(m)[:, 0].tolist() == [2.0, 2.0, 2.0]


def brute_ranks(col):
    """Sort-based average ranks, best (highest) accuracy first."""
    order = sorted(range(len(col)), key=lambda i: -col[i])
    ranks = [0.0] * len(col)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and col[order[j + 1]] == col[order[i]]:
            j += 1
        for k in range(i, j + 1):
            ranks[order[k]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def test_ranks_match_brute_force():
    r = np.random.default_rng(0)
    A = np.round(r.uniform(0.5, 1.0, size=(3, 4)), 1)
    m = st.ResultsMatrix(["a", "b", "c"], list("wxyz"), A)
    ref = np.array([brute_ranks(A[:, j].tolist()) for j in range(4)]).T
    assert np.array_equal(st.dataset_ranks(m), ref)


def test_results_matrix_validation():
    with pytest.raises(ValueError):
        st.ResultsMatrix(["a"], ["d1", "d2"], [[0.1, 0.2]])
    with pytest.raises(ValueError):
        st.ResultsMatrix(["a", "b"], ["d1", "d2"], [[0.1, np.nan], [0.2, 0.3]])
    with pytest.raises(ValueError):
        st.ResultsMatrix(["a", "b"], ["d1", "d2"], [[0.1, 1.2], [0.2, 0.3]])
    st.ResultsMatrix(["a", "b"], ["d1", "d2"], [[10, 90], [20, 30]], unit="percent")


def test_friedman_null_and_hand_value():
    assert st.friedman_chi2([2.0, 2.0, 2.0], 10) == pytest.approx(0.0)
    assert st.friedman_chi2([1.0, 2.0], 10) == pytest.approx(10.0)


def test_friedman_published():
    chi2 = st.friedman_chi2(list(PUBLISHED_RANKS.values()), 106)
    assert chi2 == pytest.approx(47.9247, abs=0.2)


def test_friedman_f():
    assert st.friedman_f(0.0, 10, 3) == 0.0
    assert st.friedman_f(47.9247, 106, 9) == pytest.approx(6.2895, abs=1e-3)
    with pytest.raises(ValueError):
        st.friedman_f(10.0, 10, 2)


def test_nemenyi_cd():
    assert st.nemenyi_cd(0.0, 9, 106) == 0.0
    assert st.nemenyi_cd(3.1020, 9, 106) == pytest.approx(1.17, abs=0.005)
    assert st.nemenyi_cd(1.0, 2, 6) == pytest.approx(math.sqrt(6 / 36))
    assert st.q_alpha(9) == pytest.approx(3.102)
    with pytest.raises(ValueError):
        st.q_alpha(9, 0.1)


def test_q_table_matches_studentized_range():
    from scipy.stats import studentized_range
    for n, q in st.Q_ALPHA_005.items():
        ref = studentized_range.ppf(0.95, n, np.inf) / math.sqrt(2)
        assert q == pytest.approx(ref, abs=2e-3)


def test_significance_pairs():
    t = st.significance_table([3.96, 5.61], 1.17)
    assert t[0][1] == "r+" and t[1][0] == "r-"
    assert st.significance_table([5.06, 4.78], 1.17) == [["", ""], ["", ""]]
    assert st.significance_table([4.0, 4.0], 0.0) == [["", ""], ["", ""]]


def test_significance_antisymmetric():
    r = np.random.default_rng(1).uniform(1, 9, size=9)
    t = st.significance_table(r, 1.17)
    flip = {"r+": "r-", "r-": "r+", "": ""}
    for i in range(9):
        for j in range(9):
            assert t[j][i] == flip[t[i][j]]


def test_sign_test():
    assert st.sign_test_threshold(121) == pytest.approx(71.28, abs=0.01)
    assert st.wtl_from_counts(67, 16, 23).significant
    w = st.wtl_from_counts(50, 14, 42)
    assert w.adjusted_wins == 57 and not w.significant
    with pytest.raises(ValueError):
        st.wtl_from_counts(1, 1, 1, N=4)


def test_win_tie_loss_conservation():
    r = np.random.default_rng(2)
    A = np.round(r.uniform(0.6, 0.9, size=(4, 30)), 2)
    m = st.ResultsMatrix(list("abcd"), [str(i) for i in range(30)], A)
    wtl = st.win_tie_loss(m)
    for (a, b), w in wtl.items():
        assert w.wins + w.ties + w.losses == 30
        back = wtl[b, a]
        assert (w.wins, w.ties, w.losses) == (back.losses, back.ties, back.wins)


def test_analyze_dominant_121():
    A = np.vstack([np.full(121, 0.9), np.full(121, 0.8)])
    m = st.ResultsMatrix(["best", "other"], [f"d{i}" for i in range(121)], A)
    rep = st.analyze(m)
    w = rep.wtl["best", "other"]
    assert w.as_list() == [121, 0, 0] and w.significant
