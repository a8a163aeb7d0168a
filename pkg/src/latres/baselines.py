"""Classical baselines over map-derived feature vectors: decision tree,
random forest, Gaussian naive Bayes and multinomial logistic regression,
all self-contained.

Features are the top-50 values of the d=1 output map at the propagated
corner locations, sorted descending (padded with the minimum when fewer
than 50 locations survive).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, ShapeError
from .models import OutputMap

FEATURE_LEN = 50


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray   # (50,) nonincreasing
    source_id: str
    label: int

    def __post_init__(self):
        v = self.values
        if v.shape != (FEATURE_LEN,):
            raise ShapeError("FeatureVector", f"expected ({FEATURE_LEN},), got {v.shape}")
        if np.any(np.diff(v) > 0):
            raise ShapeError("FeatureVector", "values must be nonincreasing")


def extract_features(m: OutputMap, locations, source_id: str = "", label: int = 0) -> FeatureVector:
    """Top-50 map values at the corner locations, sorted descending."""
    if m.d != 1:
        raise ShapeError("extract_features", f"needs a d=1 map, got d={m.d}")
    if len(locations) == 0:
        raise DataError("extract_features: empty location set")
    vals = np.array([m.data[0, 0, x, y] for x, y in locations], dtype=np.float64)
    vals = np.sort(vals)[::-1]
    if vals.size >= FEATURE_LEN:
        vals = vals[:FEATURE_LEN]
    else:
        pad = np.full(FEATURE_LEN - vals.size, vals.min())
        vals = np.concatenate([vals, pad])
    return FeatureVector(values=vals, source_id=source_id, label=label)


# ---------------------------------------------------------------------------
# decision tree (CART, Gini)
# ---------------------------------------------------------------------------

def _gini_best_split(x_col: np.ndarray, counts_sorted: np.ndarray, n_classes: int):
    """Best threshold of one feature given rows pre-sorted by that feature.

    counts_sorted: (n, n_classes) one-hot rows in sort order.
    Returns (weighted_impurity, threshold) or None if the feature is constant.
    """
    n = x_col.shape[0]
    cum = np.cumsum(counts_sorted, axis=0)               # left counts after row i
    total = cum[-1]
    boundaries = np.nonzero(x_col[:-1] < x_col[1:])[0]   # split between i and i+1
    if boundaries.size == 0:
        return None
    nl = (boundaries + 1).astype(np.float64)
    nr = n - nl
    left = cum[boundaries].astype(np.float64)
    right = total.astype(np.float64) - left
    gini_l = 1.0 - ((left / nl[:, None]) ** 2).sum(axis=1)
    gini_r = 1.0 - ((right / nr[:, None]) ** 2).sum(axis=1)
    weighted = (nl * gini_l + nr * gini_r) / n
    j = int(np.argmin(weighted))
    b = boundaries[j]
    thr = 0.5 * (x_col[b] + x_col[b + 1])
    return float(weighted[j]), float(thr)


@dataclass
class _Node:
    klass: int = 0
    feature: int = -1
    threshold: float = 0.0
    left: "_Node | None" = None
    right: "_Node | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None


class DecisionTree:
    """CART with Gini impurity. Splits while the node is impure and some
    split improves impurity; nodes smaller than ``min_split`` become leaves.
    ``max_features`` (if set) samples that many candidate features per split
    (random-forest mode)."""

    def __init__(self, min_split: int = 2, max_features: int | None = None, seed: int = 0):
        self.min_split = min_split
        self.max_features = max_features
        self.seed = seed
        self.root: _Node | None = None
        self.n_classes = 0

    def fit(self, X: np.ndarray, y: np.ndarray, n_classes: int | None = None) -> "DecisionTree":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        if X.ndim != 2 or y.shape != (X.shape[0],):
            raise ShapeError("DecisionTree.fit", f"X {X.shape} / y {y.shape} mismatch")
        if y.min() < 1:
            raise DataError("labels must be >= 1")
        self.n_classes = int(y.max()) if n_classes is None else n_classes
        rng = np.random.default_rng(self.seed)
        onehot = np.zeros((y.shape[0], self.n_classes), dtype=np.int64)
        onehot[np.arange(y.shape[0]), y - 1] = 1
        self.root = self._grow(X, y, onehot, rng)
        return self

    def _majority(self, y: np.ndarray) -> int:
        counts = np.bincount(y, minlength=self.n_classes + 1)
        return int(np.argmax(counts[1:])) + 1  # argmax picks the lowest class on ties

    def _grow(self, X, y, onehot, rng) -> _Node:
        node = _Node(klass=self._majority(y))
        n = y.shape[0]
        if n < self.min_split or np.all(y == y[0]):
            return node
        counts = onehot.sum(axis=0).astype(np.float64)
        parent_gini = 1.0 - ((counts / n) ** 2).sum()
        if parent_gini <= 0.0:
            return node

        n_feat = X.shape[1]
        if self.max_features is not None and self.max_features < n_feat:
            feat_idx = np.sort(rng.choice(n_feat, size=self.max_features, replace=False))
        else:
            feat_idx = np.arange(n_feat)

        best = None  # (weighted_impurity, feature, threshold)
        for f in feat_idx:
            order = np.argsort(X[:, f], kind="stable")
            res = _gini_best_split(X[order, f], onehot[order], self.n_classes)
            if res is None:
                continue
            weighted, thr = res
            if best is None or weighted < best[0] - 1e-15:
                best = (weighted, int(f), thr)
        if best is None or best[0] >= parent_gini - 1e-12:
            return node
        _, f, thr = best
        mask = X[:, f] <= thr
        node.feature = f
        node.threshold = thr
        node.left = self._grow(X[mask], y[mask], onehot[mask], rng)
        node.right = self._grow(X[~mask], y[~mask], onehot[~mask], rng)
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        if self.root is None:
            raise DataError("DecisionTree: predict before fit")
        X = np.asarray(X, dtype=np.float64)
        out = np.empty(X.shape[0], dtype=np.int64)
        for i, row in enumerate(X):
            node = self.root
            while not node.is_leaf:
                node = node.left if row[node.feature] <= node.threshold else node.right
            out[i] = node.klass
        return out


# ---------------------------------------------------------------------------
# random forest
# ---------------------------------------------------------------------------

class RandomForest:
    """Bagged CART trees; int(sqrt(n_features)) candidate features per split;
    majority vote with ties broken toward the lower class."""

    def __init__(self, n_trees: int = 300, seed: int = 0, max_features: int | None = None):
        self.n_trees = n_trees
        self.seed = seed
        self.max_features = max_features
        self.trees: list[DecisionTree] = []
        self.n_classes = 0

    def fit(self, X: np.ndarray, y: np.ndarray) -> "RandomForest":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        self.n_classes = int(y.max())
        n = X.shape[0]
        mf = self.max_features or max(1, int(np.sqrt(X.shape[1])))
        self.trees = []
        for t in range(self.n_trees):
            rng = np.random.default_rng([self.seed, t])
            boot = rng.integers(0, n, size=n)
            tree = DecisionTree(max_features=mf, seed=int(rng.integers(0, 2**31)))
            tree.fit(X[boot], y[boot], n_classes=self.n_classes)
            self.trees.append(tree)
        return self

    def predict(self, X: np.ndarray) -> np.ndarray:
        if not self.trees:
            raise DataError("RandomForest: predict before fit")
        votes = np.stack([t.predict(X) for t in self.trees])  # (trees, n)
        out = np.empty(votes.shape[1], dtype=np.int64)
        for i in range(votes.shape[1]):
            counts = np.bincount(votes[:, i], minlength=self.n_classes + 1)
            out[i] = int(np.argmax(counts[1:])) + 1
        return out


# ---------------------------------------------------------------------------
# Gaussian naive Bayes
# ---------------------------------------------------------------------------

class GaussianNB:
    """Per-class per-feature Gaussian likelihoods with empirical priors;
    variances floored at 1e-9."""

    VAR_FLOOR = 1e-9

    def __init__(self):
        self.classes_: np.ndarray | None = None
        self.priors_ = None
        self.means_ = None
        self.vars_ = None

    def fit(self, X: np.ndarray, y: np.ndarray) -> "GaussianNB":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        self.classes_ = np.unique(y)
        k = self.classes_.size
        d = X.shape[1]
        self.priors_ = np.empty(k)
        self.means_ = np.empty((k, d))
        self.vars_ = np.empty((k, d))
        for i, c in enumerate(self.classes_):
            rows = X[y == c]
            self.priors_[i] = rows.shape[0] / X.shape[0]
            self.means_[i] = rows.mean(axis=0)
            self.vars_[i] = np.maximum(rows.var(axis=0), self.VAR_FLOOR)
        return self

    def _log_posterior(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        lp = np.log(self.priors_)[None, :].repeat(X.shape[0], axis=0)
        for i in range(self.classes_.size):
            diff = X - self.means_[i]
            lp[:, i] += -0.5 * (np.log(2.0 * np.pi * self.vars_[i]) + diff * diff / self.vars_[i]).sum(axis=1)
        return lp

    def predict(self, X: np.ndarray) -> np.ndarray:
        if self.classes_ is None:
            raise DataError("GaussianNB: predict before fit")
        lp = self._log_posterior(X)
        return self.classes_[np.argmax(lp, axis=1)]


# ---------------------------------------------------------------------------
# multinomial logistic regression
# ---------------------------------------------------------------------------

def _softmax_rows(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def logreg_loss_grad(W: np.ndarray, b: np.ndarray, X: np.ndarray, onehot: np.ndarray,
                     l2: float):
    """Mean cross-entropy + l2/2 * ||W||^2 and its gradients (bias excluded
    from the penalty)."""
    n = X.shape[0]
    probs = _softmax_rows(X @ W + b)
    eps = 1e-300
    loss = -np.log(np.maximum((probs * onehot).sum(axis=1), eps)).mean() + 0.5 * l2 * (W * W).sum()
    delta = (probs - onehot) / n
    gw = X.T @ delta + l2 * W
    gb = delta.sum(axis=0)
    return loss, gw, gb


class LogisticRegressionMulti:
    """Softmax regression on standardized features, full-batch gradient
    descent with a Lipschitz-derived step size; returns the best iterate and
    sets ``converged`` accordingly."""

    def __init__(self, l2: float = 1e-4, tol: float = 1e-5, max_iter: int = 10_000):
        self.l2 = l2
        self.tol = tol
        self.max_iter = max_iter
        self.converged = False
        self.classes_ = None
        self.W = None
        self.b = None
        self._mu = None
        self._sd = None

    def _standardize(self, X: np.ndarray) -> np.ndarray:
        return (X - self._mu) / self._sd

    def fit(self, X: np.ndarray, y: np.ndarray) -> "LogisticRegressionMulti":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        self._mu = X.mean(axis=0)
        sd = X.std(axis=0)
        self._sd = np.where(sd < 1e-12, 1.0, sd)
        Xs = self._standardize(X)
        self.classes_ = np.unique(y)
        k = self.classes_.size
        n, d = Xs.shape
        onehot = np.zeros((n, k))
        onehot[np.arange(n), np.searchsorted(self.classes_, y)] = 1.0

        # 1/4 * sigma_max(X)^2 / n bounds the softmax-CE Hessian; adding the
        # ridge term gives a safe 1/L step.
        smax = np.linalg.svd(Xs, compute_uv=False)[0] if min(n, d) else 1.0
        lipschitz = 0.25 * smax * smax / n + self.l2
        lr = 1.0 / lipschitz

        W = np.zeros((d, k))
        b = np.zeros(k)
        best = (np.inf, W.copy(), b.copy())
        self.converged = False
        for _ in range(self.max_iter):
            loss, gw, gb = logreg_loss_grad(W, b, Xs, onehot, self.l2)
            gnorm = float(np.sqrt((gw * gw).sum() + (gb * gb).sum()))
            if gnorm < best[0]:
                best = (gnorm, W.copy(), b.copy())
            if gnorm < self.tol:
                self.converged = True
                break
            W -= lr * gw
            b -= lr * gb
        else:
            loss, gw, gb = logreg_loss_grad(W, b, Xs, onehot, self.l2)
            gnorm = float(np.sqrt((gw * gw).sum() + (gb * gb).sum()))
            if gnorm < best[0]:
                best = (gnorm, W.copy(), b.copy())
        _, self.W, self.b = best
        return self

    def predict(self, X: np.ndarray) -> np.ndarray:
        if self.W is None:
            raise DataError("LogisticRegressionMulti: predict before fit")
        Xs = self._standardize(np.asarray(X, dtype=np.float64))
        scores = Xs @ self.W + self.b
        return self.classes_[np.argmax(scores, axis=1)]


# ---------------------------------------------------------------------------
# functional aliases
# ---------------------------------------------------------------------------

def train_tree(X, y, seed: int = 0) -> DecisionTree:
    return DecisionTree(seed=seed).fit(X, y)


def train_forest(X, y, n_trees: int = 300, seed: int = 0) -> RandomForest:
    return RandomForest(n_trees=n_trees, seed=seed).fit(X, y)


def train_nb(X, y) -> GaussianNB:
    return GaussianNB().fit(X, y)


def train_logreg(X, y, l2: float = 1e-4) -> LogisticRegressionMulti:
    return LogisticRegressionMulti(l2=l2).fit(X, y)
