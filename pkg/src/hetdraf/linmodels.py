"""Linear split generators and the dense numerical kernels they share.

Every fitter takes a design matrix restricted to the node's feature subspace
and two-group targets encoded as -1/+1, and returns a :class:`Hyperplane`
whose split test is ``w @ x + b <= 0`` (left / negative side, ties left).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None


class LinAlgFailure(ArithmeticError):
    """A linear system or eigenproblem could not be solved."""


class InvalidPlane(ValueError):
    """A fitter produced a degenerate (zero-normal or non-finite) plane."""


class RankDeficient(LinAlgFailure):
    """A moment matrix is rank deficient and the caller asked for no regularization."""


_ZERO_NORM = 1e-12


@dataclass(frozen=True, eq=False)
class Hyperplane:
    w: np.ndarray
    b: float
    feature_map: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        fm = np.asarray(self.feature_map, dtype=np.int64)
        if w.shape != fm.shape:
            raise ValueError("coefficient vector and feature map differ in length")
        if not (np.all(np.isfinite(w)) and np.isfinite(self.b)):
            raise InvalidPlane("non-finite plane coefficients")
        if np.linalg.norm(w) <= _ZERO_NORM:
            raise InvalidPlane("zero normal vector")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "b", float(self.b))
        object.__setattr__(self, "feature_map", fm)

    def decision(self, X: np.ndarray) -> np.ndarray:
        """Signed value ``w @ x + b`` for rows of the full feature matrix."""
        return X[..., self.feature_map] @ self.w + self.b

    def decision_local(self, Xs: np.ndarray) -> np.ndarray:
        """Same, for rows already restricted to ``feature_map``."""
        return Xs @ self.w + self.b

    def normalized(self) -> "Hyperplane":
        s = np.sqrt(self.w @ self.w + self.b * self.b)
        return Hyperplane(self.w / s, self.b / s, self.feature_map)

    def to_dict(self) -> dict:
        return {"w": self.w.tolist(), "b": self.b, "features": self.feature_map.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Hyperplane":
        return cls(np.array(d["w"], dtype=float), float(d["b"]), np.array(d["features"], dtype=np.int64))


@dataclass(frozen=True, eq=False)
class ProximalPair:
    """One proximal plane per hyperclass; a row goes to the nearer plane."""

    plane_a: Hyperplane
    plane_b: Hyperplane

    def distances(self, X: np.ndarray, local: bool = False) -> tuple[np.ndarray, np.ndarray]:
        fa = self.plane_a.decision_local(X) if local else self.plane_a.decision(X)
        fb = self.plane_b.decision_local(X) if local else self.plane_b.decision(X)
        return (np.abs(fa) / np.linalg.norm(self.plane_a.w),
                np.abs(fb) / np.linalg.norm(self.plane_b.w))

    def goes_a(self, X: np.ndarray, local: bool = False) -> np.ndarray:
        da, db = self.distances(X, local)
        return da <= db


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise ValueError("non-finite input")


def _jitter_scale(A: np.ndarray) -> float:
    m = A.shape[0]
    t = float(np.trace(A)) / m
    return t if t > 0 else 1.0


def solve_spd(A: np.ndarray, rhs: np.ndarray, max_tries: int = 8) -> np.ndarray:
    """Solve ``A x = rhs`` for symmetric positive (semi)definite ``A``.

    Cholesky first; if that fails a diagonal jitter starting at
    ``1e-12 * trace(A)/m`` is grown tenfold up to ``max_tries`` times.
    """
    A = np.asarray(A, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    _check_finite(A, rhs)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("A must be square")
    if not np.allclose(A, A.T, rtol=1e-10, atol=1e-12 * (1 + np.abs(A).max())):
        raise ValueError("A must be symmetric")
    eps = 1e-12 * _jitter_scale(A)
    M = A
    for attempt in range(max_tries + 1):
        try:
            c = scipy.linalg.cho_factor(M, check_finite=False)
            x = scipy.linalg.cho_solve(c, rhs, check_finite=False)
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
            x = None
        if x is not None and np.all(np.isfinite(x)):
            return x
        M = A + eps * np.eye(A.shape[0])
        eps *= 10.0
    raise LinAlgFailure("matrix is not positive definite even after jitter")


def _sign_fix(v: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    nz = np.flatnonzero(np.abs(v) > tol * max(1.0, np.abs(v).max()))
    if len(nz) and v[nz[0]] < 0:
        return -v
    return v


def generalized_eig_extreme(G: np.ndarray, H: np.ndarray, which: str = "min") -> tuple[float, np.ndarray]:
    """Extreme eigenpair of the symmetric-definite pencil ``G z = lam H z``.

    Solved by LAPACK's Cholesky-reduced symmetric driver (``sygvd``), which
    has its own bounded QR iteration.  The returned vector has unit length
    and its first nonzero component is positive.
    """
    G = np.asarray(G, dtype=float)
    H = np.asarray(H, dtype=float)
    _check_finite(G, H)
    if G.shape != H.shape or G.shape[0] != G.shape[1]:
        raise ValueError("G and H must be square and of equal size")
    if which not in ("min", "max"):
        raise ValueError("which must be 'min' or 'max'")
    G = 0.5 * (G + G.T)
    H = 0.5 * (H + H.T)
    try:
        vals, vecs = scipy.linalg.eigh(G, H, check_finite=False)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise LinAlgFailure(f"generalized eigenproblem failed: {exc}") from None
    i = 0 if which == "min" else len(vals) - 1
    z = vecs[:, i]
    z = _sign_fix(z / np.linalg.norm(z))
    return float(vals[i]), z


def _augmented_normal(X: np.ndarray, y: np.ndarray, lam: float) -> tuple[np.ndarray, np.ndarray]:
    n, m = X.shape
    A = np.empty((m + 1, m + 1))
    A[:m, :m] = X.T @ X
    s = X.sum(axis=0)
    A[:m, m] = s
    A[m, :m] = s
    A[m, m] = n
    A[:m, :m] += lam * np.eye(m)
    rhs = np.concatenate([X.T @ y, [y.sum()]])
    return A, rhs


def _prepare(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_finite(X, y)
    if X.ndim != 2 or len(y) != X.shape[0]:
        raise ValueError("X must be n x m with one target per row")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise ValueError("both target signs must be present")
    return X, y


def _feature_map(feature_map, m):
    return np.arange(m) if feature_map is None else np.asarray(feature_map, dtype=np.int64)


def fit_ridge(X: np.ndarray, y: np.ndarray, lam: float = 0.1, feature_map=None) -> Hyperplane:
    """Least squares onto +-1 targets with an L2 penalty on ``w`` only."""
    X, y = _prepare(X, y)
    if lam < 0:
        raise ValueError("ridge weight must be non-negative")
    m = X.shape[1]
    A, rhs = _augmented_normal(X, y, lam)
    sol = solve_spd(A, rhs)
    return Hyperplane(sol[:m], sol[m], _feature_map(feature_map, m))


def fit_ols(X: np.ndarray, y: np.ndarray, feature_map=None) -> Hyperplane:
    X = np.asarray(X, dtype=float)
    m = X.shape[1]
    t = float(np.einsum("ij,ij->", X, X)) / m
    return fit_ridge(X, y, 1e-8 * (t if t > 0 else 1.0), feature_map)


def fit_lssvm(X: np.ndarray, y: np.ndarray, C: float = 1.0, feature_map=None) -> Hyperplane:
    """Linear least-squares SVM, primal form: ``1/2|w|^2 + C/2 sum (y - w.x - b)^2``."""
    if not C > 0:
        raise ValueError("C must be positive")
    return fit_ridge(X, y, 1.0 / C, feature_map)


def fit_lda(X: np.ndarray, y: np.ndarray, feature_map=None) -> Hyperplane:
    """Fisher discriminant between the +1 and -1 groups, cut at the mean midpoint."""
    X, y = _prepare(X, y)
    m = X.shape[1]
    P, N = X[y > 0], X[y < 0]
    mp, mn = P.mean(axis=0), N.mean(axis=0)
    diff = mp - mn
    if np.linalg.norm(diff) <= 1e-12 * (1.0 + np.linalg.norm(mp) + np.linalg.norm(mn)):
        raise InvalidPlane("group means coincide")
    Pc, Nc = P - mp, N - mn
    Sw = Pc.T @ Pc + Nc.T @ Nc
    tr = float(np.trace(Sw))
    eps = 1e-6 * tr / m if tr > 0 else 1e-6
    w = solve_spd(Sw + eps * np.eye(m), diff)
    b = -float(w @ (mp + mn)) / 2.0
    return Hyperplane(w, b, _feature_map(feature_map, m))


if numba is not None:
    @numba.njit(cache=True)
    def _svm_subgradient(X, y, C, iters, radius):  # pragma: no cover - compiled
        n, m = X.shape
        w = np.zeros(m)
        b = 0.0
        best_w = w.copy()
        best_b = 0.0
        best_obj = np.inf
        gw = np.zeros(m)
        for t in range(iters + 1):
            hinge = 0.0
            for j in range(m):
                gw[j] = w[j]
            gb = 0.0
            for i in range(n):
                f = b
                for j in range(m):
                    f += w[j] * X[i, j]
                marg = 1.0 - y[i] * f
                if marg > 0.0:
                    hinge += marg
                    for j in range(m):
                        gw[j] -= C * y[i] * X[i, j]
                    gb -= C * y[i]
            ww = 0.0
            for j in range(m):
                ww += w[j] * w[j]
            obj = 0.5 * ww + C * hinge
            if obj < best_obj:
                best_obj = obj
                best_b = b
                for j in range(m):
                    best_w[j] = w[j]
            if t == iters:
                break
            step = 1.0 / (1.0 + t)
            for j in range(m):
                w[j] -= step * gw[j]
            b -= step * gb
            nrm = 0.0
            for j in range(m):
                nrm += w[j] * w[j]
            nrm = np.sqrt(nrm + b * b)
            if nrm > radius:
                s = radius / nrm
                for j in range(m):
                    w[j] *= s
                b *= s
        return best_w, best_b
else:  # pragma: no cover
    _svm_subgradient = None


def _svm_subgradient_numpy(X, y, C, iters, radius):
    n, m = X.shape
    w = np.zeros(m)
    b = 0.0
    best = (np.inf, w.copy(), 0.0)
    for t in range(iters + 1):
        f = X @ w + b
        marg = 1.0 - y * f
        act = marg > 0
        obj = 0.5 * (w @ w) + C * marg[act].sum()
        if obj < best[0]:
            best = (obj, w.copy(), b)
        if t == iters:
            break
        ya = y[act]
        gw = w - C * (ya @ X[act])
        gb = -C * ya.sum()
        step = 1.0 / (1.0 + t)
        w = w - step * gw
        b = b - step * gb
        nrm = np.sqrt(w @ w + b * b)
        if nrm > radius:
            w *= radius / nrm
            b *= radius / nrm
    return best[1], best[2]


def svm_objective(X: np.ndarray, y: np.ndarray, w: np.ndarray, b: float, C: float) -> float:
    return 0.5 * float(w @ w) + C * float(np.maximum(0.0, 1.0 - y * (X @ w + b)).sum())


def fit_svm(X: np.ndarray, y: np.ndarray, C: float = 1.0, iters: int = 500, feature_map=None) -> Hyperplane:
    """Soft-margin linear SVM by full-batch projected subgradient descent.

    Starts from ``w = 0, b = 0`` with step ``1/(1+t)``.  Iterates are projected
    onto a ball known to contain the optimum: ``1/2|w|^2`` cannot exceed the
    objective at zero (``C n``), and the optimal offset is then bounded by
    ``|w| max|x| + 1``.  The iterate with the lowest objective is returned.
    """
    X, y = _prepare(X, y)
    if C < 0:
        raise ValueError("C must be non-negative")
    n, m = X.shape
    wmax = np.sqrt(2.0 * C * n)
    radius = wmax * (1.0 + float(np.sqrt((X * X).sum(axis=1)).max())) + 1.0
    kernel = _svm_subgradient if _svm_subgradient is not None else _svm_subgradient_numpy
    w, b = kernel(np.ascontiguousarray(X), y, float(C), int(iters), float(radius))
    return Hyperplane(np.asarray(w), float(b), _feature_map(feature_map, m))


def _moment(A: np.ndarray) -> np.ndarray:
    Aug = np.hstack([A, np.ones((A.shape[0], 1))])
    return Aug.T @ Aug


def _is_deficient(M: np.ndarray) -> bool:
    return np.linalg.matrix_rank(M, hermitian=True) < M.shape[0]


def _null_basis(M: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(M)
    tol = max(M.shape) * np.finfo(float).eps * max(vals[-1], 1e-300)
    return vecs[:, vals <= tol]


def _plane_from(z: np.ndarray, feature_map) -> Hyperplane:
    z = _sign_fix(z / np.linalg.norm(z))
    return Hyperplane(z[:-1], z[-1], feature_map)


def _proximal_plane(G: np.ndarray, H: np.ndarray, mode: str, delta: float, feature_map) -> Hyperplane:
    """Plane minimizing ``z'Gz / z'Hz`` (near the G group, far from the H group)."""
    if mode == "raw":
        if _is_deficient(H) or _is_deficient(G):
            raise RankDeficient("moment matrix is rank deficient")
        _, z = generalized_eig_extreme(G, H, "min")
    elif mode == "tikhonov":
        I = np.eye(G.shape[0])
        try:
            _, z = generalized_eig_extreme(G, H + delta * I, "min")
        except LinAlgFailure:
            # the pencil only needs H definite; G is shifted as a last resort
            _, z = generalized_eig_extreme(G + delta * I, H + delta * I, "min")
    elif mode == "nullspace":
        if _is_deficient(G):
            # the ratio reaches 0 on null(G); pick the direction there that is farthest from H's group
            Nb = _null_basis(G)
            if Nb.shape[1] == 1:
                z = Nb[:, 0]
            else:
                _, u = np.linalg.eigh(Nb.T @ H @ Nb)
                z = Nb @ u[:, -1]
        elif _is_deficient(H):
            # G is definite: minimizing the ratio is maximizing its reciprocal
            _, z = generalized_eig_extreme(H, G, "max")
        else:
            _, z = generalized_eig_extreme(G, H, "min")
    else:
        raise ValueError(f"unknown regularization mode {mode!r}")
    return _plane_from(z, feature_map)


def fit_mpsvm(X_pos: np.ndarray, X_neg: np.ndarray, mode: str = "tikhonov", delta: float = 0.01,
              feature_map=None) -> ProximalPair:
    """Multisurface proximal SVM: one plane per group via a generalized eigenproblem.

    ``mode`` is ``"tikhonov"`` (add ``delta * I``), ``"nullspace"`` or ``"raw"``
    (raise :class:`RankDeficient` instead of regularizing).
    """
    A = np.asarray(X_pos, dtype=float)
    B = np.asarray(X_neg, dtype=float)
    _check_finite(A, B)
    if len(A) == 0 or len(B) == 0:
        raise ValueError("both groups must be non-empty")
    if A.shape[1] != B.shape[1]:
        raise ValueError("groups differ in dimension")
    if np.array_equal(np.unique(A, axis=0), np.unique(B, axis=0)):
        raise ValueError("groups are identical point sets")
    fm = _feature_map(feature_map, A.shape[1])
    G, H = _moment(A), _moment(B)
    pa = _proximal_plane(G, H, mode, delta, fm)
    pb = _proximal_plane(H, G, mode, delta, fm)
    return ProximalPair(pa, pb)


def rayleigh_quotient(z: np.ndarray, G: np.ndarray, H: np.ndarray) -> float:
    return float(z @ G @ z) / float(z @ H @ z)


CLASSIFIERS = ("ridge", "ols", "svm", "lda", "mpsvm", "lssvm")
