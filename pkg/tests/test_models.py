import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from sklearn.base import clone

from pvfkit.data import SyntheticSpec, gen_synthetic, stratified_split
from pvfkit.metrics import MetricSpec, evaluate
from pvfkit.models import (
    GiniTreeClassifier,
    PairLogisticRegression,
    SMOTEBalancer,
    from_text,
    logistic_gradient,
    logistic_objective,
    logistic_pair_pool,
    smote_balance,
    train_logistic,
    train_tree,
    tree_subsample_pool,
)

# logistic ------------------------------------------------------------------


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    h = 1e-5
    for _ in range(10):
        X = rng.normal(size=(30, 2))
        y = (rng.random(30) < 0.4).astype(int)
        w = rng.normal(size=3)
        g = logistic_gradient(w, X, y, 1.0)
        fd = np.empty(3)
        for i in range(3):
            e = np.zeros(3)
            e[i] = h
            fd[i] = (logistic_objective(w + e, X, y, 1.0)
                     - logistic_objective(w - e, X, y, 1.0)) / (2 * h)
        assert np.max(np.abs(g - fd)) <= 1e-4


def test_fitted_weights_are_stationary():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(80, 3))
    y = (X[:, 0] - X[:, 2] + rng.normal(size=80) > 0).astype(int)
    m = train_logistic(X, y, (0, 2))
    assert m.converged_
    w = np.r_[m.intercept_, m.coef_]
    assert np.max(np.abs(logistic_gradient(w, X[:, [0, 2]], y, 1.0))) <= 1e-6


def test_separable_pair_fits_perfectly():
    x = np.r_[np.linspace(-3, -1, 20), np.linspace(1, 3, 20)]
    X = np.c_[x, 0.5 * x]
    y = np.r_[np.zeros(20, int), np.ones(20, int)]
    m = train_logistic(X, y, (0, 1))
    assert evaluate(m, X, y, MetricSpec("accuracy")) == 1.0


def test_label_shuffled_is_chance():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(400, 2))
    y = rng.integers(0, 2, 400)
    m = train_logistic(X[:200], y[:200], (0, 1))
    assert abs(evaluate(m, X[200:], y[200:], MetricSpec("accuracy")) - 0.5) <= 0.1


def test_single_class_rejected():
    with pytest.raises(ValueError):
        train_logistic(np.zeros((4, 2)), np.zeros(4), (0, 1))


def test_scaling_pair_barely_moves_boundary():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(200, 2))
    y = (X[:, 0] + X[:, 1] + 0.5 * rng.normal(size=200) > 0.3).astype(int)
    g = np.stack(np.meshgrid(np.linspace(-3, 3, 60), np.linspace(-3, 3, 60)), -1).reshape(-1, 2)
    a = train_logistic(X, y, (0, 1)).predict(g)
    b = train_logistic(3.0 * X, y, (0, 1)).predict(3.0 * g)
    assert np.mean(a != b) <= 0.01


def test_logistic_estimator_api():
    m = PairLogisticRegression(features=(1, 3), C=0.5)
    assert m.get_params()["C"] == 0.5
    assert clone(m).features == (1, 3)
    X = np.random.default_rng(0).normal(size=(30, 4))
    y = (X[:, 1] > 0).astype(int)
    m.fit(X, y)
    p = m.predict_proba(X)
    assert p.shape == (30, 2) and np.allclose(p.sum(axis=1), 1)
    assert m.descriptor == "logit(x2,x4)"
    r = from_text(m.to_text())
    assert np.array_equal(r.predict(X), m.predict(X))


# tree ----------------------------------------------------------------------


def test_pure_input_single_leaf():
    t = train_tree(np.random.default_rng(0).normal(size=(10, 2)), np.ones(10, int))
    assert len(t.feature_) == 1 and t.depth_ == 0
    assert t.predict(np.zeros((3, 2))).tolist() == [1, 1, 1]


def _all_depth2_trees_fit_xor(X, y):
    # brute force: any depth-2 axis-aligned tree reaching accuracy 1?
    thr = [0.5]
    for f0, f1, f2 in itertools.product(range(2), repeat=3):
        for labels in itertools.product((0, 1), repeat=4):
            left = X[:, f0] <= thr[0]
            leaf = np.where(left, (X[:, f1] > thr[0]).astype(int),
                            2 + (X[:, f2] > thr[0]).astype(int))
            if np.array_equal(np.array(labels)[leaf], y):
                return True
    return False


def test_xor_depth_two():
    X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    y = np.array([0, 1, 1, 0])
    assert _all_depth2_trees_fit_xor(X, y)
    t = train_tree(X, y)
    assert t.depth_ == 2
    assert np.array_equal(t.predict(X), y)


@given(st.integers(0, 2**20), st.integers(1, 6))
def test_depth_bound(seed, depth):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(60, 3))
    y = rng.integers(0, 2, 60)
    t = GiniTreeClassifier(max_depth=depth).fit(X, y)
    assert t.depth_ <= depth
    internal = t.feature_ >= 0
    assert np.all(t.feature_[internal] < 3)
    assert np.all(np.isfinite(t.threshold_[internal]))


def test_default_depth_is_four():
    rng = np.random.default_rng(5)
    t = train_tree(rng.normal(size=(300, 4)), rng.integers(0, 2, 300))
    assert t.depth_ <= 4


def test_monotone_transform_invariance():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(120, 3))
    y = (X[:, 0] * X[:, 1] + 0.3 * rng.normal(size=120) > 0).astype(int)
    Xt = rng.normal(size=(200, 3))
    a = train_tree(X, y).predict(Xt)
    f = np.exp
    X2, Xt2 = X.copy(), Xt.copy()
    X2[:, 1], Xt2[:, 1] = f(X[:, 1]), f(Xt[:, 1])
    b = train_tree(X2, y).predict(Xt2)
    # midpoints move under a nonlinear map, so only points between the two
    # neighbouring training values could change side
    assert np.mean(a != b) <= 0.05
    X3, Xt3 = X.copy(), Xt.copy()
    X3[:, 1], Xt3[:, 1] = 2 * X[:, 1] + 1, 2 * Xt[:, 1] + 1
    assert np.array_equal(train_tree(X3, y).predict(Xt3), a)


def test_tree_tie_break_lowest_feature():
    X = np.array([[0.0, 0.0], [1.0, 1.0]])
    t = train_tree(X, np.array([0, 1]))
    assert t.feature_[0] == 0 and t.threshold_[0] == 0.5


def test_tree_text_round_trip():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(50, 3))
    y = rng.integers(0, 2, 50)
    t = train_tree(X, y)
    r = from_text(t.to_text())
    assert np.array_equal(r.predict(X), t.predict(X))
    assert t.descriptor.startswith("tree(depth=")


# SMOTE ---------------------------------------------------------------------


def test_smote_balanced_unchanged():
    X = np.arange(8, dtype=float).reshape(4, 2)
    y = np.array([0, 1, 0, 1])
    Xo, yo = smote_balance(X, y, seed=0)
    assert np.array_equal(Xo, X) and np.array_equal(yo, y)


def test_smote_single_minority_duplicated():
    X = np.arange(16, dtype=float).reshape(8, 2)
    y = np.array([0] * 7 + [1])
    Xo, yo = smote_balance(X, y, seed=0)
    assert (yo == 1).sum() == 7
    assert np.all(Xo[yo == 1] == X[7])


def test_smote_on_segment():
    X = np.array([[0.0, 0.0], [1.0, 1.0]] + [[5.0, -5.0]] * 10)
    y = np.array([1, 1] + [0] * 10)
    Xo, yo = smote_balance(X, y, seed=3)
    s = Xo[12:]
    assert len(s) == 8
    assert np.allclose(s[:, 0], s[:, 1])
    assert np.all((s >= 0) & (s <= 1))


@given(st.integers(1, 30), st.integers(1, 30), st.integers(0, 1000))
def test_smote_exact_balance(a, b, seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(a + b, 3))
    y = np.r_[np.zeros(a, int), np.ones(b, int)]
    Xo, yo = SMOTEBalancer(random_state=seed).fit_resample(X, y)
    assert (yo == 0).sum() == (yo == 1).sum() == max(a, b)
    assert np.array_equal(Xo[: a + b], X)


def test_smote_empty_minority():
    with pytest.raises(ValueError):
        smote_balance(np.zeros((3, 2)), np.zeros(3, int))


# pools ---------------------------------------------------------------------


def test_pair_pool():
    ds = gen_synthetic(SyntheticSpec(50, 2.0, seed=1))
    pool = logistic_pair_pool(ds.X, ds.y, seed=0)
    assert len(pool) == 10
    assert [m.features for m in pool] == list(itertools.combinations(range(5), 2))
    assert pool[0].descriptor == "logit(x1,x2)"
    Xb, yb = smote_balance(ds.X, ds.y, seed=0)
    for m in pool:
        ref = train_logistic(Xb, yb, m.features)
        assert np.array_equal(ref.coef_, m.coef_)


def test_tree_pool():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(100, 4))
    y = (X[:, 0] + rng.normal(size=100) > 0.5).astype(int)
    pool = tree_subsample_pool(X, y, 100, 0.7, seed=3)
    assert len(pool) == 100
    assert len({t.to_text() for t in pool}) >= 2
    assert [t.to_text() for t in pool[:5]] == [
        t.to_text() for t in tree_subsample_pool(X, y, 5, 0.7, seed=3)
    ]


def test_tree_pool_single_row():
    pool = tree_subsample_pool(np.array([[1.0]]), np.array([1]), 1, 1.0)
    assert pool[0].predict(np.array([[0.0]])).tolist() == [1]


def test_high_separation_f1_golden():
    f1s = []
    for seed in range(100):
        ds = gen_synthetic(SyntheticSpec(100, 2.9, seed=seed))
        tr, va = stratified_split(ds, 0.7, seed=seed)
        Xb, yb = smote_balance(tr.X, tr.y, seed=seed)
        f1s.append(evaluate(train_logistic(Xb, yb, (0, 1)), va.X, va.y, MetricSpec("f1")))
    assert np.median(f1s) >= 0.8
