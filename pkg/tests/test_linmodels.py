import numpy as np
import pytest

from hetdraf import linmodels as lm


def rng(s=0):
    return np.random.default_rng(s)


def gd_ridge_oracle(X, y, lam, iters=200_000, tol=1e-14):
    """Plain gradient descent on sum (y - Xw - b)^2 + lam |w|^2."""
    n, m = X.shape
    A = np.hstack([X, np.ones((n, 1))])
    P = np.diag(np.r_[np.full(m, lam), 0.0])
    L = 2 * np.linalg.eigvalsh(A.T @ A + P).max()
    z = np.zeros(m + 1)
    for _ in range(iters):
        g = 2 * (A.T @ (A @ z - y) + P @ z)
        z_new = z - g / L
        if np.max(np.abs(z_new - z)) < tol:
            return z_new
        z = z_new
    return z


def angle(u, v):
    c = abs(u @ v) / (np.linalg.norm(u) * np.linalg.norm(v))
    return float(np.arccos(min(1.0, c)))


# --------------------------------------------------------------------------- solve_spd

def test_solve_spd_identity_and_diagonal():
    r = np.array([3.0, -1.0, 2.0])
    assert np.allclose(lm.solve_spd(np.eye(3), r), r)
    assert np.allclose(lm.solve_spd(np.diag([2.0, 4.0]), np.array([2.0, 8.0])), [1.0, 2.0])


def test_solve_spd_random_residual():
    B = rng(1).normal(size=(10, 10))
    A = B @ B.T + 0.1 * np.eye(10)
    r = rng(2).normal(size=10)
    x = lm.solve_spd(A, r)
    assert np.linalg.norm(A @ x - r) <= 1e-8 * np.linalg.norm(A) * np.linalg.norm(x)


def test_solve_spd_singular_gets_jitter():
    A = np.array([[1.0, 1.0], [1.0, 1.0]])
    x = lm.solve_spd(A, np.array([1.0, 1.0]))
    assert np.all(np.isfinite(x))


def test_solve_spd_rejects_asymmetric():
    with pytest.raises(ValueError):
        lm.solve_spd(np.array([[1.0, 2.0], [0.0, 1.0]]), np.ones(2))


# --------------------------------------------------------------------------- generalized eig

def test_geig_diagonal_case():
    lam, z = lm.generalized_eig_extreme(np.diag([1.0, 4.0]), np.eye(2), "min")
    assert lam == pytest.approx(1.0) and np.allclose(z, [1.0, 0.0])


def test_geig_equal_matrices():
    B = rng(3).normal(size=(4, 4))
    G = B @ B.T + np.eye(4)
    for which in ("min", "max"):
        assert lm.generalized_eig_extreme(G, G, which)[0] == pytest.approx(1.0)


@pytest.mark.parametrize("seed", range(5))
def test_geig_matches_dense_oracle(seed):
    r = rng(seed)
    B, C = r.normal(size=(6, 6)), r.normal(size=(6, 6))
    G, H = B @ B.T, C @ C.T + 0.5 * np.eye(6)
    oracle = np.sort(np.linalg.eigvals(np.linalg.inv(H) @ G).real)
    for which, ref in (("min", oracle[0]), ("max", oracle[-1])):
        lam, z = lm.generalized_eig_extreme(G, H, which)
        assert abs(lam - ref) <= 1e-8 * max(1.0, abs(ref))
        assert np.linalg.norm(G @ z - lam * H @ z) <= 1e-8 * max(1.0, np.linalg.norm(G))
        assert np.linalg.norm(z) == pytest.approx(1.0)


# --------------------------------------------------------------------------- ridge / ols / lssvm

def test_ridge_exact_interpolation():
    p = lm.fit_ridge(np.array([[1.0], [-1.0]]), np.array([1.0, -1.0]), lam=0.0)
    assert p.w[0] == pytest.approx(1.0) and p.b == pytest.approx(0.0, abs=1e-10)


def test_ridge_heavy_penalty_shrinks():
    r = rng(4)
    X, y = r.normal(size=(40, 3)), np.where(r.random(40) < 0.5, -1.0, 1.0)
    y[:2] = [1, -1]
    assert np.linalg.norm(lm.fit_ridge(X, y, 1e9).w) <= 1e-3


def test_ridge_matches_gradient_descent_oracle():
    r = rng(5)
    X = r.normal(size=(50, 3))
    y = np.sign(X @ np.array([1.0, -2.0, 0.5]) + 0.3 * r.normal(size=50))
    p = lm.fit_ridge(X, y, 0.1)
    z = gd_ridge_oracle(X, y, 0.1)
    assert np.max(np.abs(np.r_[p.w, p.b] - z)) <= 1e-6


def test_ols_duplicate_columns_finite():
    r = rng(6)
    x = r.normal(size=(30, 1))
    X = np.hstack([x, x])
    y = np.sign(x[:, 0] + 0.01)
    p = lm.fit_ols(X, y)
    assert np.all(np.isfinite(p.w))


def test_ols_separable_accuracy():
    r = rng(7)
    X = np.vstack([r.normal(size=(20, 2)) + [4, 4], r.normal(size=(20, 2)) - [4, 4]])
    y = np.r_[np.ones(20), -np.ones(20)]
    p = lm.fit_ols(X, y)
    assert np.all(np.sign(p.decision_local(X)) == y)


def test_ols_monotone_sign():
    x = np.linspace(-1, 1, 11)[:, None]
    y = np.where(2 * x[:, 0] > 0, 1.0, -1.0)
    assert lm.fit_ols(x, y).w[0] > 0


def test_lssvm_symmetric_offset():
    p = lm.fit_lssvm(np.array([[-2.0], [-1.0], [1.0], [2.0]]), np.array([-1.0, -1.0, 1.0, 1.0]), C=3.0)
    assert abs(p.b) <= 1e-10


def test_lssvm_large_c_matches_ols():
    X = np.array([[0.0, 1.0], [1.0, 0.0], [2.0, 1.0], [1.0, 3.0], [3.0, 2.0]])
    y = np.array([1.0, -1.0, -1.0, 1.0, -1.0])
    a, b = lm.fit_lssvm(X, y, C=1e10), lm.fit_ols(X, y)
    assert np.allclose(np.r_[a.w, a.b], np.r_[b.w, b.b], atol=1e-4)


def test_lssvm_matches_dual_kkt_oracle():
    r = rng(8)
    X = r.normal(size=(30, 4))
    y = np.sign(X[:, 0] - X[:, 1] + 0.2 * r.normal(size=30))
    C = 2.0
    n = len(y)
    K = X @ X.T
    M = np.zeros((n + 1, n + 1))
    M[0, 1:] = 1.0
    M[1:, 0] = 1.0
    M[1:, 1:] = K + np.eye(n) / C
    sol = np.linalg.solve(M, np.r_[0.0, y])
    b_ref, alpha = sol[0], sol[1:]
    w_ref = X.T @ alpha
    p = lm.fit_lssvm(X, y, C)
    assert np.max(np.abs(p.w - w_ref)) <= 1e-6 and abs(p.b - b_ref) <= 1e-6


# --------------------------------------------------------------------------- lda

def test_lda_symmetric_clusters():
    r = rng(9)
    e = r.normal(size=50)
    X = np.r_[e - 5, -e + 5][:, None]  # mirror images keep the midpoint exactly at 0
    y = np.r_[-np.ones(50), np.ones(50)]
    p = lm.fit_lda(X, y)
    assert p.w[0] > 0 and abs(p.b) <= 1e-6


def test_lda_identical_means_invalid():
    X = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    with pytest.raises(lm.InvalidPlane):
        lm.fit_lda(X, np.array([1.0, 1.0, -1.0, -1.0]))


def test_lda_fisher_direction():
    r = rng(10)
    S = np.array([[3.0, 1.2], [1.2, 1.0]])
    L = np.linalg.cholesky(S)
    mu = np.array([1.0, -0.5])
    Z1, Z2 = r.normal(size=(400, 2)), r.normal(size=(400, 2))
    # whiten the draws so the sample scatter is exactly the chosen covariance
    for Z in (Z1, Z2):
        Z -= Z.mean(axis=0)
        Z[:] = Z @ np.linalg.inv(np.linalg.cholesky(Z.T @ Z / len(Z))).T
    X = np.vstack([Z1 @ L.T + mu, Z2 @ L.T - mu])
    y = np.r_[np.ones(400), -np.ones(400)]
    p = lm.fit_lda(X, y)
    ref = np.linalg.solve(S, 2 * mu)
    assert angle(p.w, ref) <= 1e-4
    assert p.w @ ref > 0


# --------------------------------------------------------------------------- svm

def test_svm_two_points():
    p = lm.fit_svm(np.array([[-1.0], [1.0]]), np.array([1.0, -1.0]), C=1.0)
    assert np.all(np.sign(p.decision_local(np.array([[-1.0], [1.0]]))) == [1, -1])


def test_svm_zero_c_invalid():
    with pytest.raises(lm.InvalidPlane):
        lm.fit_svm(np.array([[-1.0], [1.0]]), np.array([1.0, -1.0]), C=0.0)


def test_svm_objective_close_to_grid_oracle():
    r = rng(11)
    X = np.vstack([r.normal(size=(15, 2)) * 0.5 + [1.5, 1.0], r.normal(size=(15, 2)) * 0.5 - [1.5, 1.0]])
    y = np.r_[np.ones(15), -np.ones(15)]
    C = 10.0
    grid = np.linspace(-4, 4, 81)
    W1, W2, B = np.meshgrid(grid, grid, grid, indexing="ij")
    F = X[:, 0, None, None, None] * W1 + X[:, 1, None, None, None] * W2 + B
    hinge = np.maximum(0, 1 - y[:, None, None, None] * F).sum(axis=0)
    best_grid = float((0.5 * (W1 ** 2 + W2 ** 2) + C * hinge).min())
    p = lm.fit_svm(X, y, C=C)
    ours = lm.svm_objective(X, y, p.w, p.b, C)
    assert ours <= 1.05 * best_grid
    assert np.all(np.sign(p.decision_local(X)) == y)


def test_svm_numpy_fallback_agrees_with_compiled():
    r = rng(12)
    X = r.normal(size=(25, 3))
    y = np.sign(X[:, 0] + 0.1)
    radius = 50.0
    a = lm._svm_subgradient_numpy(X, y, 1.0, 200, radius)
    if lm._svm_subgradient is None:
        pytest.skip("numba unavailable")
    b = lm._svm_subgradient(np.ascontiguousarray(X), y, 1.0, 200, radius)
    assert np.allclose(a[0], b[0], atol=1e-9) and abs(a[1] - b[1]) <= 1e-9


# --------------------------------------------------------------------------- mpsvm

def test_mpsvm_collinear_group_exact():
    t = np.linspace(-2, 2, 7)
    A = np.c_[t, 2 * t + 1]
    B = np.array([[0.0, 5.0], [3.0, -2.0], [-2.0, 1.0], [1.0, 8.0]])
    pair = lm.fit_mpsvm(A, B, mode="tikhonov", delta=0.01)
    z = np.r_[pair.plane_a.w, pair.plane_a.b]
    assert z @ lm._moment(A) @ z <= 1e-10
    assert np.max(np.abs(pair.plane_a.decision_local(A))) <= 1e-5


def test_mpsvm_raw_rank_deficient():
    r = rng(13)
    with pytest.raises(lm.RankDeficient):
        lm.fit_mpsvm(r.normal(size=(1, 3)), r.normal(size=(1, 3)), mode="raw")


def test_mpsvm_rejects_identical_groups():
    A = rng(14).normal(size=(5, 2))
    with pytest.raises(ValueError):
        lm.fit_mpsvm(A, A[::-1].copy())


@pytest.mark.parametrize("seed", range(5))
def test_mpsvm_rayleigh_matches_dense_oracle(seed):
    r = rng(seed + 20)
    A = r.normal(size=(30, 2)) + [2, 0]
    B = r.normal(size=(25, 2)) @ np.array([[1.0, 0.4], [0.0, 0.6]]) - [1, 1]
    delta = 0.01
    pair = lm.fit_mpsvm(A, B, mode="tikhonov", delta=delta)
    G, H = lm._moment(A), lm._moment(B)
    I = np.eye(3)
    for plane, P, Q in ((pair.plane_a, G, H), (pair.plane_b, H, G)):
        Qr = Q + delta * I
        ref = np.sort(np.linalg.eigvals(np.linalg.inv(Qr) @ P).real)[0]
        z = np.r_[plane.w, plane.b]
        assert abs(lm.rayleigh_quotient(z, P, Qr) - ref) <= 1e-6 * max(1.0, ref)


def test_mpsvm_nullspace_mode_handles_deficiency():
    r = rng(30)
    A = r.normal(size=(2, 3))  # rank-deficient 4x4 moment
    B = r.normal(size=(20, 3)) + 2
    pair = lm.fit_mpsvm(A, B, mode="nullspace")
    za = np.r_[pair.plane_a.w, pair.plane_a.b]
    assert za @ lm._moment(A) @ za <= 1e-9 * (za @ lm._moment(B) @ za)


def test_proximal_routing_by_distance():
    a = lm.Hyperplane(np.array([1.0, 0.0]), 0.0, np.arange(2))
    b = lm.Hyperplane(np.array([0.0, 10.0]), -10.0, np.arange(2))  # y = 1, scaled
    pair = lm.ProximalPair(a, b)
    X = np.array([[0.1, 5.0], [3.0, 1.05], [0.5, 0.5]])
    assert pair.goes_a(X).tolist() == [True, False, True]


def test_hyperplane_validation_and_roundtrip():
    with pytest.raises(lm.InvalidPlane):
        lm.Hyperplane(np.zeros(2), 1.0, np.arange(2))
    with pytest.raises(lm.InvalidPlane):
        lm.Hyperplane(np.array([np.nan, 1.0]), 1.0, np.arange(2))
    p = lm.Hyperplane(np.array([1.0, -2.0]), 0.5, np.array([3, 1]))
    q = lm.Hyperplane.from_dict(p.to_dict())
    X = rng(31).normal(size=(6, 4))
    assert np.array_equal(p.decision(X), q.decision(X))
    assert np.allclose(p.decision(X), X[:, 3] - 2 * X[:, 1] + 0.5)
