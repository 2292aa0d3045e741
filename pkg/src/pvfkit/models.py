"""Interpretable candidate models, SMOTE balancing and candidate-pool builders.

All estimators follow the scikit-learn protocol (``fit``/``predict``,
``get_params``/``set_params``), so they can be cloned and dropped into
pipelines.
"""

from __future__ import annotations

import itertools
import json

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted, check_X_y

__all__ = [
    "GiniTreeClassifier",
    "PairLogisticRegression",
    "SMOTEBalancer",
    "from_text",
    "logistic_gradient",
    "logistic_objective",
    "logistic_pair_pool",
    "smote_balance",
    "train_logistic",
    "train_tree",
    "tree_subsample_pool",
]


def _check_binary(y):
    y = np.asarray(y)
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0/1")
    return y.astype(int)


def _design(X):
    return np.column_stack([np.ones(len(X)), X])


def logistic_objective(w, X, y, C=1.0):
    """L2-penalised logistic loss; ``w[0]`` is the unpenalised intercept."""
    z = _design(X) @ w
    # log(1 + exp(z)) - y z, written to stay finite for large |z|
    loss = np.sum(np.maximum(z, 0) + np.log1p(np.exp(-np.abs(z))) - y * z)
    return loss + 0.5 / C * np.dot(w[1:], w[1:])


def logistic_gradient(w, X, y, C=1.0):
    A = _design(X)
    g = A.T @ (expit(A @ w) - y)
    g[1:] += w[1:] / C
    return g


def _newton(X, y, C, tol, max_iter):
    A = _design(X)
    w = np.zeros(A.shape[1])
    reg = np.full(A.shape[1], 1.0 / C)
    reg[0] = 0.0
    obj = logistic_objective(w, X, y, C)
    for it in range(max_iter):
        g = logistic_gradient(w, X, y, C)
        if np.max(np.abs(g)) <= tol:
            return w, True, it
        mu = expit(A @ w)
        H = (A * (mu * (1 - mu))[:, None]).T @ A + np.diag(reg)
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(H, g, rcond=None)[0]
        t = 1.0
        while t > 1e-10:
            w_new = w - t * step
            obj_new = logistic_objective(w_new, X, y, C)
            if obj_new <= obj:
                break
            t *= 0.5
        else:
            return w, False, it
        w, obj = w_new, obj_new
    g = logistic_gradient(w, X, y, C)
    return w, bool(np.max(np.abs(g)) <= tol), max_iter


class PairLogisticRegression(ClassifierMixin, BaseEstimator):
    """L2-regularised logistic regression restricted to two feature columns.

    Parameters
    ----------
    features : tuple of int
        Column indices the model reads; other columns are ignored.
    C : float, default=1.0
        Inverse regularisation strength (intercept is not penalised).
    tol : float, default=1e-6
        Max-norm tolerance on the gradient.
    max_iter : int, default=200
        Newton iteration cap. Hitting it is not an error; the best iterate
        is kept and ``converged_`` is False.
    threshold : float, default=0.5
    """

    def __init__(self, features=(0, 1), C=1.0, tol=1e-6, max_iter=200, threshold=0.5):
        self.features = features
        self.C = C
        self.tol = tol
        self.max_iter = max_iter
        self.threshold = threshold

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        y = _check_binary(y)
        if len(np.unique(y)) < 2:
            raise ValueError("training data contains a single class")
        cols = list(self.features)
        w, ok, it = _newton(X[:, cols], y.astype(float), self.C, self.tol, self.max_iter)
        self.intercept_ = float(w[0])
        self.coef_ = w[1:].copy()
        self.converged_ = ok
        self.n_iter_ = it
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = X.shape[1]
        return self

    @property
    def descriptor(self):
        return "logit(" + ",".join(f"x{i + 1}" for i in self.features) + ")"

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = np.asarray(X, dtype=float)
        return X[:, list(self.features)] @ self.coef_ + self.intercept_

    def predict_proba(self, X):
        p = expit(self.decision_function(X))
        return np.column_stack([1 - p, p])

    def predict(self, X):
        z = self.decision_function(X)
        if self.threshold == 0.5:
            return (z >= 0).astype(int)
        return (expit(z) >= self.threshold).astype(int)

    def to_text(self):
        check_is_fitted(self, "coef_")
        return json.dumps({
            "model": "logistic",
            "descriptor": self.descriptor,
            "features": list(self.features),
            "intercept": self.intercept_,
            "coef": self.coef_.tolist(),
            "threshold": self.threshold,
            "converged": self.converged_,
        })


def train_logistic(X, y, pair, **kw) -> PairLogisticRegression:
    return PairLogisticRegression(features=tuple(pair), **kw).fit(X, y)


class GiniTreeClassifier(ClassifierMixin, BaseEstimator):
    """Depth-limited binary decision tree grown greedily on Gini impurity.

    Thresholds sit at midpoints of adjacent distinct values; ``x <= t`` goes
    left. Equal-gain candidates are resolved by lowest feature index, then
    lowest threshold. A node splits whenever it is impure, has at least
    ``min_samples_split`` rows and some feature is non-constant, even when
    the best gain is zero (so XOR-type structure can be learned).
    """

    def __init__(self, max_depth=4, min_samples_split=2):
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        y = _check_binary(y)
        self.n_features_in_ = X.shape[1]
        self.classes_ = np.array([0, 1])
        self.feature_, self.threshold_ = [], []
        self.left_, self.right_, self.value_ = [], [], []
        self._grow(X, y, 0)
        self.feature_ = np.array(self.feature_, dtype=int)
        self.threshold_ = np.array(self.threshold_, dtype=float)
        self.left_ = np.array(self.left_, dtype=int)
        self.right_ = np.array(self.right_, dtype=int)
        self.value_ = np.array(self.value_, dtype=int)
        return self

    @property
    def descriptor(self):
        check_is_fitted(self, "feature_")
        return f"tree(depth={self.depth_},leaves={int((self.feature_ < 0).sum())})"

    def _new_node(self, value):
        self.feature_.append(-1)
        self.threshold_.append(np.nan)
        self.left_.append(-1)
        self.right_.append(-1)
        self.value_.append(value)
        return len(self.feature_) - 1

    def _grow(self, X, y, depth):
        n = len(y)
        pos = int(y.sum())
        node = self._new_node(int(2 * pos > n))
        if depth >= self.max_depth or n < self.min_samples_split or pos in (0, n):
            return node
        split = _best_split(X, y)
        if split is None:
            return node
        j, thr = split
        mask = X[:, j] <= thr
        self.feature_[node] = j
        self.threshold_[node] = thr
        self.left_[node] = self._grow(X[mask], y[mask], depth + 1)
        self.right_[node] = self._grow(X[~mask], y[~mask], depth + 1)
        return node

    @property
    def depth_(self):
        check_is_fitted(self, "value_")

        def d(i):
            if self.feature_[i] < 0:
                return 0
            return 1 + max(d(self.left_[i]), d(self.right_[i]))

        return d(0)

    def predict(self, X):
        check_is_fitted(self, "value_")
        X = np.asarray(X, dtype=float)
        node = np.zeros(len(X), dtype=int)
        for _ in range(self.max_depth + 1):
            f = self.feature_[node]
            internal = f >= 0
            if not internal.any():
                break
            idx = np.nonzero(internal)[0]
            go_left = X[idx, f[idx]] <= self.threshold_[node[idx]]
            node[idx] = np.where(go_left, self.left_[node[idx]], self.right_[node[idx]])
        return self.value_[node]

    def to_text(self):
        check_is_fitted(self, "value_")
        nodes = [
            [int(f), None if f < 0 else float(t), int(l), int(r), int(v)]
            for f, t, l, r, v in zip(self.feature_, self.threshold_, self.left_,
                                     self.right_, self.value_)
        ]
        return json.dumps({"model": "tree", "max_depth": self.max_depth,
                           "n_features": self.n_features_in_, "nodes": nodes})


def _best_split(X, y, atol=1e-12):
    n, p = X.shape
    order = np.argsort(X, axis=0, kind="stable")
    Xs = np.take_along_axis(X, order, axis=0)
    ys = y[order]
    left_n = np.arange(1, n)[:, None].astype(float)
    right_n = n - left_n
    left_pos = np.cumsum(ys, axis=0)[:-1].astype(float)
    right_pos = y.sum() - left_pos
    child = 2.0 * (
        left_pos * (left_n - left_pos) / left_n + right_pos * (right_n - right_pos) / right_n
    ) / n
    valid = Xs[1:] > Xs[:-1]
    if not valid.any():
        return None
    parent = 2.0 * y.sum() * (n - y.sum()) / n / n
    gain = np.where(valid, parent - child, -np.inf)
    # feature-major scan: first hit is lowest feature, then lowest threshold
    flat = gain.T.ravel()
    best = int(np.argmax(flat >= flat.max() - atol))
    j, i = divmod(best, n - 1)
    lo, hi = Xs[i, j], Xs[i + 1, j]
    thr = (lo + hi) / 2.0
    if not lo <= thr < hi:
        thr = lo
    return j, float(thr)


def train_tree(X, y, max_depth=4) -> GiniTreeClassifier:
    return GiniTreeClassifier(max_depth=max_depth).fit(X, y)


def from_text(text):
    """Rebuild a fitted model from :meth:`to_text` output."""
    d = json.loads(text)
    if d["model"] == "logistic":
        m = PairLogisticRegression(features=tuple(d["features"]), threshold=d["threshold"])
        m.intercept_ = d["intercept"]
        m.coef_ = np.array(d["coef"])
        m.converged_ = d["converged"]
        m.classes_ = np.array([0, 1])
        return m
    if d["model"] == "tree":
        m = GiniTreeClassifier(max_depth=d["max_depth"])
        nodes = d["nodes"]
        m.feature_ = np.array([r[0] for r in nodes], dtype=int)
        m.threshold_ = np.array([np.nan if r[1] is None else r[1] for r in nodes])
        m.left_ = np.array([r[2] for r in nodes], dtype=int)
        m.right_ = np.array([r[3] for r in nodes], dtype=int)
        m.value_ = np.array([r[4] for r in nodes], dtype=int)
        m.n_features_in_ = d["n_features"]
        m.classes_ = np.array([0, 1])
        return m
    raise ValueError(f"unknown model type {d['model']!r}")


class SMOTEBalancer(BaseEstimator):
    """Oversample the minority class to parity.

    Synthetic points are ``x + u * (x_nn - x)`` with ``u ~ U(0, 1)`` and
    ``x_nn`` one of the ``min(k_neighbors, n_minority - 1)`` nearest minority
    neighbours of a uniformly drawn minority point ``x``. A lone minority
    sample is duplicated instead.
    """

    def __init__(self, k_neighbors=5, random_state=None):
        self.k_neighbors = k_neighbors
        self.random_state = random_state

    def fit_resample(self, X, y):
        X, y = check_X_y(X, y)
        y = _check_binary(y)
        counts = np.bincount(y, minlength=2)
        if counts[0] == counts[1]:
            return X.copy(), y.copy()
        minority = int(np.argmin(counts))
        n_min = int(counts[minority])
        if n_min == 0:
            raise ValueError("minority class is empty; nothing to oversample")
        need = int(counts[1 - minority] - n_min)
        Xm = X[y == minority]
        rng = np.random.default_rng(self.random_state)
        if n_min < 2:
            synth = np.repeat(Xm, need, axis=0)
        else:
            kk = min(self.k_neighbors, n_min - 1)
            d2 = ((Xm[:, None, :] - Xm[None, :, :]) ** 2).sum(axis=-1)
            np.fill_diagonal(d2, np.inf)
            nn = np.argsort(d2, axis=1, kind="stable")[:, :kk]
            base = rng.integers(n_min, size=need)
            nb = nn[base, rng.integers(kk, size=need)]
            u = rng.random(need)[:, None]
            synth = Xm[base] + u * (Xm[nb] - Xm[base])
        Xo = np.vstack([X, synth])
        yo = np.concatenate([y, np.full(need, minority)])
        return Xo, yo


def smote_balance(X, y, k_neighbors=5, seed=None):
    return SMOTEBalancer(k_neighbors=k_neighbors, random_state=seed).fit_resample(X, y)


def logistic_pair_pool(X, y, n_features=None, seed=None, balance=True, **kw):
    """One pair-logistic candidate per unordered feature pair, lexicographic order.

    Every candidate is fitted on the same (SMOTE-balanced) training data.
    """
    X, y = check_X_y(X, y)
    if n_features is None:
        n_features = X.shape[1]
    if balance:
        X, y = smote_balance(X, y, seed=seed)
    pairs = itertools.combinations(range(n_features), 2)
    return [train_logistic(X, y, pair, **kw) for pair in pairs]


def tree_subsample_pool(X, y, n_candidates=100, frac=0.7, max_depth=4, seed=0):
    """Trees fitted on independent uniform subsamples (without replacement)."""
    X, y = check_X_y(X, y)
    n = len(y)
    size = max(1, int(round(frac * n)))
    base = seed if isinstance(seed, (list, tuple)) else [seed]
    pool = []
    for i in range(n_candidates):
        rng = np.random.default_rng(np.random.SeedSequence(list(base), spawn_key=(i,)))
        idx = np.sort(rng.choice(n, size=size, replace=False))
        pool.append(train_tree(X[idx], y[idx], max_depth=max_depth))
    return pool

