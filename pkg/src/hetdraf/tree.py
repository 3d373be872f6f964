"""Single decision trees for every split family.

A tree is grown from a set of row indices into a shared, read-only
:class:`~hetdraf.data.Dataset`.  Split search may run on a node-level
bootstrap sample, but the node's original rows are always what is routed to
the children.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
import scipy.linalg

from . import linmodels as lm
from .data import Dataset, IndexSet, as_index_array, derive_seed, make_rng
from .partition import candidate_partitions, bhattacharyya_partition, GAParams

SPLIT_FAMILIES = ("axis", "mpsvm", "rotation", "heterogeneous")
REGULARIZATIONS = ("raw", "tikhonov", "nullspace")
ROTATIONS = ("none", "pca", "lda")

_TIE = 1e-12


# --------------------------------------------------------------------------- rules

@dataclass(frozen=True, eq=False)
class AxisSplit:
    feature: int
    threshold: float

    def goes_left(self, X: np.ndarray) -> np.ndarray:
        return X[:, self.feature] <= self.threshold

    def to_dict(self) -> dict:
        return {"type": "axis", "feature": int(self.feature), "threshold": float(self.threshold)}


@dataclass(frozen=True, eq=False)
class ObliqueSplit:
    plane: lm.Hyperplane
    classifier: str = ""

    def goes_left(self, X: np.ndarray) -> np.ndarray:
        return self.plane.decision(X) <= 0.0

    def to_dict(self) -> dict:
        return {"type": "oblique", "classifier": self.classifier, "plane": self.plane.to_dict()}


@dataclass(frozen=True, eq=False)
class ProximalSplit:
    pair: lm.ProximalPair

    def goes_left(self, X: np.ndarray) -> np.ndarray:
        return self.pair.goes_a(X)

    def to_dict(self) -> dict:
        return {"type": "proximal", "plane_a": self.pair.plane_a.to_dict(), "plane_b": self.pair.plane_b.to_dict()}


@dataclass(frozen=True, eq=False)
class RotatedSplit:
    """Axis test on coordinate ``inner.feature`` of ``X[:, features] @ basis``."""

    basis: np.ndarray
    features: np.ndarray
    inner: AxisSplit

    def goes_left(self, X: np.ndarray) -> np.ndarray:
        z = X[:, self.features] @ self.basis[:, self.inner.feature]
        return z <= self.inner.threshold

    def to_dict(self) -> dict:
        return {"type": "rotated", "basis": self.basis.tolist(), "features": self.features.tolist(),
                "inner": self.inner.to_dict()}


SplitRule = Union[AxisSplit, ObliqueSplit, ProximalSplit, RotatedSplit]


def rule_from_dict(d: dict) -> SplitRule:
    t = d["type"]
    if t == "axis":
        return AxisSplit(int(d["feature"]), float(d["threshold"]))
    if t == "oblique":
        return ObliqueSplit(lm.Hyperplane.from_dict(d["plane"]), d.get("classifier", ""))
    if t == "proximal":
        return ProximalSplit(lm.ProximalPair(lm.Hyperplane.from_dict(d["plane_a"]),
                                             lm.Hyperplane.from_dict(d["plane_b"])))
    if t == "rotated":
        inner = rule_from_dict(d["inner"])
        return RotatedSplit(np.array(d["basis"], dtype=float), np.array(d["features"], dtype=np.int64), inner)
    raise ValueError(f"unknown split type {t!r}")


# --------------------------------------------------------------------------- nodes

@dataclass(eq=False)
class Leaf:
    counts: np.ndarray

    @property
    def majority(self) -> int:
        return int(np.argmax(self.counts))

    def to_dict(self) -> dict:
        return {"leaf": self.counts.tolist()}


@dataclass(eq=False)
class Internal:
    rule: SplitRule
    left: "TreeNode" = None
    right: "TreeNode" = None

    def to_dict(self) -> dict:
        return {"rule": self.rule.to_dict(), "left": self.left.to_dict(), "right": self.right.to_dict()}


TreeNode = Union[Leaf, Internal]


def node_from_dict(d: dict) -> TreeNode:
    if "leaf" in d:
        return Leaf(np.array(d["leaf"], dtype=np.int64))
    return Internal(rule_from_dict(d["rule"]), node_from_dict(d["left"]), node_from_dict(d["right"]))


def iter_nodes(tree: TreeNode):
    stack = [tree]
    while stack:
        node = stack.pop()
        yield node
        if isinstance(node, Internal):
            stack.append(node.right)
            stack.append(node.left)


def node_count(tree: TreeNode) -> int:
    return sum(1 for _ in iter_nodes(tree))


def tree_depth(tree: TreeNode) -> int:
    best = 0
    stack = [(tree, 0)]
    while stack:
        node, d = stack.pop()
        best = max(best, d)
        if isinstance(node, Internal):
            stack.append((node.left, d + 1))
            stack.append((node.right, d + 1))
    return best


# --------------------------------------------------------------------------- config

@dataclass(frozen=True)
class GrowthConfig:
    split: str = "axis"
    minleaf: int = 1
    mtry: int | None = None  # None: floor(sqrt(f)), at least 1
    node_bootstrap: bool = False
    bootstrap_threshold: float = 0.1
    classifiers: tuple[str, ...] = lm.CLASSIFIERS
    top_m: int | None = None  # None: number of classes at the node
    regularization: str = "tikhonov"
    delta: float = 0.01
    rotation: str = "none"
    ridge_lambda: float = 0.1
    svm_c: float = 1.0
    svm_iters: int = 500
    lssvm_c: float = 1.0

    def __post_init__(self):
        if self.split not in SPLIT_FAMILIES:
            raise ValueError(f"unknown split family {self.split!r}")
        if self.regularization not in REGULARIZATIONS:
            raise ValueError(f"unknown regularization {self.regularization!r}")
        if self.rotation not in ROTATIONS:
            raise ValueError(f"unknown rotation {self.rotation!r}")
        if (self.split == "rotation") != (self.rotation != "none"):
            raise ValueError("rotation kind must be set exactly for the rotation split family")
        if not 0 < self.bootstrap_threshold <= 1:
            raise ValueError("bootstrap_threshold must be in (0, 1]")
        if self.minleaf < 1:
            raise ValueError("minleaf must be at least 1")
        if self.mtry is not None and self.mtry < 1:
            raise ValueError("mtry must be at least 1")
        unknown = set(self.classifiers) - set(lm.CLASSIFIERS)
        if unknown or not self.classifiers:
            raise ValueError(f"bad classifier set {self.classifiers!r}")
        if self.top_m is not None and self.top_m < 1:
            raise ValueError("top_m must be at least 1")

    def resolve_mtry(self, f: int) -> int:
        if self.mtry is None:
            return max(1, int(math.isqrt(f)))
        if self.mtry > f:
            raise ValueError(f"mtry={self.mtry} exceeds feature count {f}")
        return self.mtry

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["classifiers"] = list(self.classifiers)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GrowthConfig":
        d = dict(d)
        d["classifiers"] = tuple(d["classifiers"])
        return cls(**d)


# --------------------------------------------------------------------------- impurity

def gini(counts) -> float:
    c = np.asarray(counts, dtype=float)
    n = c.sum()
    if n <= 0:
        raise ValueError("gini of an empty node")
    p = c / n
    return float(1.0 - p @ p)


def _split_impurity(left: np.ndarray, y: np.ndarray, K: int) -> float:
    n = len(y)
    nl = int(left.sum())
    nr = n - nl
    if nl == 0 or nr == 0:
        return math.inf
    cl = np.bincount(y[left], minlength=K).astype(float)
    cr = np.bincount(y, minlength=K).astype(float) - cl
    return float((n - (cl @ cl) / nl - (cr @ cr) / nr) / n)


def weighted_child_gini(rule: SplitRule, X: np.ndarray, y: np.ndarray, n_classes: int | None = None) -> float:
    """Size-weighted Gini of the two children; ``inf`` when a child is empty."""
    y = np.asarray(y)
    if len(y) == 0:
        raise ValueError("no rows")
    K = int(n_classes) if n_classes is not None else int(y.max()) + 1
    return _split_impurity(rule.goes_left(X), y, K)


# --------------------------------------------------------------------------- axis search

def _best_threshold(Z: np.ndarray, y: np.ndarray, K: int) -> tuple[int, float, float] | None:
    """Best (column, threshold, impurity) over midpoints of consecutive distinct values."""
    n, m = Z.shape
    onehot = np.zeros((n, K))
    best_imp = math.inf
    per_col = []
    for j in range(m):
        order = np.argsort(Z[:, j], kind="stable")
        zs = Z[order, j]
        onehot[:] = 0.0
        onehot[np.arange(n), y[order]] = 1.0
        cum = np.cumsum(onehot, axis=0)[:-1]
        pos = np.flatnonzero(zs[:-1] < zs[1:])
        if len(pos) == 0:
            per_col.append(None)
            continue
        cl = cum[pos]
        cr = cum[-1] + onehot[-1] - cl if n > 1 else cl
        nl = (pos + 1).astype(float)
        nr = n - nl
        imp = (n - (cl * cl).sum(axis=1) / nl - (cr * cr).sum(axis=1) / nr) / n
        per_col.append((pos, imp, zs))
        best_imp = min(best_imp, float(imp.min()))
    if not math.isfinite(best_imp):
        return None
    for j, entry in enumerate(per_col):
        if entry is None:
            continue
        pos, imp, zs = entry
        hit = np.flatnonzero(imp <= best_imp + _TIE)
        if len(hit):
            i = pos[hit[0]]
            a, b = zs[i], zs[i + 1]
            thr = 0.5 * (a + b)
            if not a <= thr < b:
                thr = a
            return j, float(thr), float(imp[hit[0]])
    return None  # pragma: no cover


def best_axis_split(X: np.ndarray, y: np.ndarray, features=None, n_classes: int | None = None
                    ) -> tuple[AxisSplit | None, float]:
    """Exhaustive CART search; ``(None, inf)`` when every candidate feature is constant.

    Ties go to the lower feature index, then the lower threshold.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    features = np.arange(X.shape[1]) if features is None else np.sort(np.asarray(features, dtype=np.int64))
    K = int(n_classes) if n_classes is not None else int(y.max()) + 1
    found = _best_threshold(X[:, features], y, K)
    if found is None:
        return None, math.inf
    j, thr, imp = found
    return AxisSplit(int(features[j]), thr), imp


# --------------------------------------------------------------------------- rotation

def _orthonormal_completion(V: np.ndarray, m: int) -> np.ndarray:
    if V.shape[1] >= m:
        return V
    comp = scipy.linalg.null_space(V.T)
    comp = np.column_stack([lm._sign_fix(c) for c in comp.T]) if comp.size else comp
    return np.column_stack([V, comp])


def rotation_basis(X: np.ndarray, kind: str, y: np.ndarray | None = None) -> np.ndarray:
    """Node rotation matrix (columns = directions, unit norm, strongest first).

    ``pca``: eigenvectors of the node covariance.  ``lda``: generalized
    eigenvectors of between- vs. regularized within-class scatter, completed
    to ``m`` columns with an orthonormal basis of their complement.  A
    degenerate scatter gives the identity.
    """
    X = np.asarray(X, dtype=float)
    n, m = X.shape
    if n < 2:
        raise ValueError("need at least two rows")
    I = np.eye(m)
    if kind == "pca":
        Xc = X - X.mean(axis=0)
        S = Xc.T @ Xc / n
        if np.trace(S) <= 1e-12:
            return I
        vals, vecs = np.linalg.eigh(S)
        order = np.argsort(-vals, kind="stable")
        return np.column_stack([lm._sign_fix(vecs[:, i]) for i in order])
    if kind == "lda":
        if y is None:
            raise ValueError("LDA rotation needs labels")
        y = np.asarray(y)
        classes = np.unique(y)
        if len(classes) < 2:
            raise ValueError("LDA rotation needs at least two classes")
        mu = X.mean(axis=0)
        Sw = np.zeros((m, m))
        Sb = np.zeros((m, m))
        for c in classes:
            Xk = X[y == c]
            mk = Xk.mean(axis=0)
            Xc = Xk - mk
            Sw += Xc.T @ Xc
            d = mk - mu
            Sb += len(Xk) * np.outer(d, d)
        if np.trace(Sb) <= 1e-12:
            return I
        tr = float(np.trace(Sw))
        eps = 1e-6 * tr / m if tr > 0 else 1e-6
        vals, vecs = scipy.linalg.eigh(Sb, Sw + eps * I)
        order = np.argsort(-vals, kind="stable")
        keep = [i for i in order if vals[i] > 1e-10 * max(vals.max(), 1e-300)]
        V = np.column_stack([lm._sign_fix(vecs[:, i] / np.linalg.norm(vecs[:, i])) for i in keep])
        return _orthonormal_completion(V, m)
    raise ValueError(f"unknown rotation kind {kind!r}")


# --------------------------------------------------------------------------- split dispatch

@dataclass
class CandidateLog:
    """Every (classifier, partition) fit evaluated at a heterogeneous node."""

    entries: list = field(default_factory=list)

    def add(self, classifier: str, partition, impurity: float):
        self.entries.append((classifier, partition, impurity))


def _fit_rule(name: str, Xs: np.ndarray, t: np.ndarray, features: np.ndarray, cfg: GrowthConfig) -> SplitRule:
    if name == "ridge":
        return ObliqueSplit(lm.fit_ridge(Xs, t, cfg.ridge_lambda, features), name)
    if name == "ols":
        return ObliqueSplit(lm.fit_ols(Xs, t, features), name)
    if name == "svm":
        return ObliqueSplit(lm.fit_svm(Xs, t, cfg.svm_c, cfg.svm_iters, features), name)
    if name == "lda":
        return ObliqueSplit(lm.fit_lda(Xs, t, features), name)
    if name == "lssvm":
        return ObliqueSplit(lm.fit_lssvm(Xs, t, cfg.lssvm_c, features), name)
    if name == "mpsvm":
        return ProximalSplit(lm.fit_mpsvm(Xs[t > 0], Xs[t < 0], "tikhonov", cfg.delta, features))
    raise ValueError(name)


def _local_goes_left(rule: SplitRule, Xs: np.ndarray) -> np.ndarray:
    """Routing on rows already restricted to the rule's feature subset."""
    if isinstance(rule, ObliqueSplit):
        return rule.plane.decision_local(Xs) <= 0.0
    if isinstance(rule, ProximalSplit):
        return rule.pair.goes_a(Xs, local=True)
    raise TypeError(type(rule))


_FIT_ERRORS = (lm.LinAlgFailure, lm.InvalidPlane, ValueError, np.linalg.LinAlgError, scipy.linalg.LinAlgError)


def best_split_for_variant(X: np.ndarray, y: np.ndarray, config: GrowthConfig, rng: np.random.Generator,
                           n_classes: int, log: CandidateLog | None = None,
                           features: np.ndarray | None = None) -> tuple[SplitRule | None, float]:
    """Best split of the evaluation rows ``X, y`` for the configured family.

    Draws the random feature subset from ``rng`` unless ``features`` is given.
    Returns ``(None, inf)`` when no candidate yields two non-empty children.
    """
    f = X.shape[1]
    if features is None:
        features = np.sort(rng.choice(f, size=config.resolve_mtry(f), replace=False))
    features = np.asarray(features, dtype=np.int64)
    Xs = X[:, features]
    K = n_classes

    if config.split == "axis":
        return best_axis_split(X, y, features, K)

    if config.split == "rotation":
        V = rotation_basis(Xs, config.rotation, y)
        found = _best_threshold(Xs @ V, y, K)
        if found is None:
            return None, math.inf
        j, thr, imp = found
        return RotatedSplit(V, features, AxisSplit(j, thr)), imp

    if config.split == "mpsvm":
        bp = bhattacharyya_partition(Xs, y)
        t = bp.targets(y)
        try:
            pair = lm.fit_mpsvm(Xs[t > 0], Xs[t < 0], config.regularization, config.delta, features)
        except _FIT_ERRORS:
            # axis-parallel regularization: fall back to a CART split
            return best_axis_split(X, y, features, K)
        rule = ProximalSplit(pair)
        imp = _split_impurity(pair.goes_a(Xs, local=True), y, K)
        if not math.isfinite(imp):
            return best_axis_split(X, y, features, K)
        return rule, imp

    # heterogeneous
    parts = candidate_partitions(Xs, y, config.top_m, GAParams(), rng)
    best_key, best = (math.inf, 0, 0), (None, math.inf)
    for rank, p in enumerate(parts):
        t = p.targets(y)
        for ci, name in enumerate(config.classifiers):
            try:
                rule = _fit_rule(name, Xs, t, features, config)
                imp = _split_impurity(_local_goes_left(rule, Xs), y, K)
            except _FIT_ERRORS:
                rule, imp = None, math.inf
            if log is not None:
                log.add(name, p, imp)
            key = (round(imp, 12) if math.isfinite(imp) else math.inf, ci, rank)
            if rule is not None and math.isfinite(imp) and key < best_key:
                best_key, best = key, (rule, imp)
    return best


# --------------------------------------------------------------------------- growth

@dataclass
class NodeRecord:
    rows: np.ndarray
    eval_rows: np.ndarray
    bootstrapped: bool
    left_rows: np.ndarray | None = None
    right_rows: np.ndarray | None = None
    impurity: float = math.inf
    parent_gini: float = math.nan
    single_class_resample: bool = False


@dataclass
class GrowthTrace:
    """Optional per-node instrumentation for :func:`grow_tree`."""

    nodes: list = field(default_factory=list)

    @property
    def bootstrap_count(self) -> int:
        return sum(r.bootstrapped for r in self.nodes)


def grow_tree(data: Dataset, root_rows: IndexSet | np.ndarray, config: GrowthConfig, seed: int,
              trace: GrowthTrace | None = None) -> TreeNode:
    """Grow one tree from ``root_rows`` of ``data``.

    Stops at pure nodes, nodes with at most ``minleaf`` rows, or when no split
    lowers the Gini impurity of the evaluation rows.
    """
    rows0 = as_index_array(root_rows)
    if len(rows0) == 0:
        raise ValueError("cannot grow a tree on zero rows")
    X, Y, K = data.features, data.labels, data.class_count
    N = data.n_rows
    boot_min = config.bootstrap_threshold * N

    root = None
    stack = [(rows0, int(seed), None, "")]
    while stack:
        rows, nseed, parent, side = stack.pop()
        node, children = _grow_node(X, Y, K, rows, nseed, config, boot_min, trace)
        if parent is None:
            root = node
        else:
            setattr(parent, side, node)
        if children is not None:
            # right pushed first so the left subtree is grown first
            stack.append((children[1], derive_seed(nseed, 2), node, "right"))
            stack.append((children[0], derive_seed(nseed, 1), node, "left"))
    return root


def _grow_node(X, Y, K, rows, nseed, config, boot_min, trace):
    y = Y[rows]
    counts = np.bincount(y, minlength=K)
    if np.count_nonzero(counts) <= 1 or len(rows) <= config.minleaf:
        if trace is not None:
            trace.nodes.append(NodeRecord(rows, rows, False))
        return Leaf(counts), None

    rng = make_rng(nseed)
    eval_rows, boot, single = rows, False, False
    if config.node_bootstrap and len(rows) > boot_min:
        sample = rows[rng.integers(0, len(rows), size=len(rows))]
        # a single-class resample has no split to offer; search the node rows instead
        if len(np.unique(Y[sample])) > 1:
            eval_rows, boot = sample, True
        else:
            single = True
    ye = Y[eval_rows]
    rule, imp = best_split_for_variant(X[eval_rows], ye, config, rng, K)
    parent = gini(np.bincount(ye, minlength=K))
    rec = NodeRecord(rows, eval_rows, boot, impurity=imp, parent_gini=parent, single_class_resample=single)
    left = None
    if rule is not None and imp < parent - _TIE:
        left = rule.goes_left(X[rows])
        if left.all() or not left.any():
            left = None
    if left is None:
        if trace is not None:
            trace.nodes.append(rec)
        return Leaf(counts), None
    rec.left_rows, rec.right_rows = rows[left], rows[~left]
    if trace is not None:
        trace.nodes.append(rec)
    return Internal(rule), (rows[left], rows[~left])


# --------------------------------------------------------------------------- prediction

def predict_tree(tree: TreeNode, x: np.ndarray) -> tuple[int, np.ndarray]:
    """Leaf majority class and leaf class counts for one sample."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite input")
    row = x[None, :]
    node = tree
    while isinstance(node, Internal):
        node = node.left if node.rule.goes_left(row)[0] else node.right
    return node.majority, node.counts


def predict_tree_batch(tree: TreeNode, X: np.ndarray) -> np.ndarray:
    """Leaf majority class for every row of ``X``."""
    out = np.empty(len(X), dtype=np.int64)
    stack = [(tree, np.arange(len(X)))]
    while stack:
        node, idx = stack.pop()
        if len(idx) == 0:
            continue
        if isinstance(node, Leaf):
            out[idx] = node.majority
            continue
        left = node.rule.goes_left(X[idx])
        stack.append((node.left, idx[left]))
        stack.append((node.right, idx[~left]))
    return out
