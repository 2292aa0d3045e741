import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from pvfkit.metrics import MetricSpec, evaluate
from pvfkit.perturbation import (
    FeatureSchema,
    Nominal,
    Numeric,
    Ordinal,
    PerturbationConfig,
    ValidationPerturber,
    build_perturbed_set,
    perturb_features,
    perturb_nominal,
    perturb_numeric,
    perturb_ordinal,
)

ALPHA = 0.001
N = 100_000


def chi2_ok(observed, probs):
    observed = np.asarray(observed, float)
    expected = np.asarray(probs) * observed.sum()
    return stats.chisquare(observed, expected).pvalue > ALPHA


def test_numeric_zero_sigma_exact():
    assert perturb_numeric(1.3, 0.0, np.random.default_rng(0)) == 1.3


def test_numeric_moments():
    rng = np.random.default_rng(0)
    xs = np.array([perturb_numeric(0.0, 0.1, rng) for _ in range(N)])
    assert abs(xs.mean()) <= 0.001
    assert xs.var(ddof=1) == pytest.approx(0.01, rel=0.1)


def test_nominal_rules():
    rng = np.random.default_rng(1)
    assert all(perturb_nominal("a", 0.0, "abc", rng) == "a" for _ in range(100))
    assert all(perturb_nominal(0, 1.0, [0, 1], rng) == 1 for _ in range(100))
    with pytest.raises(ValueError):
        perturb_nominal("z", 0.1, "abc", rng)


def test_nominal_frequencies():
    rng = np.random.default_rng(2)
    draws = [perturb_nominal("a", 0.1, "abc", rng) for _ in range(N)]
    cnt = [draws.count(c) for c in "abc"]
    assert chi2_ok(cnt, [0.9, 0.05, 0.05])
    for c in cnt[1:]:
        assert abs(c / N - 0.05) <= 0.003


def test_ordinal_identity_and_uniform_limit():
    rng = np.random.default_rng(3)
    assert perturb_ordinal(2, 0.0, 0.5, [1, 2, 3], rng) == 2
    draws = [perturb_ordinal(1, 0.3, 0.0, [1, 2, 3, 4], rng) for _ in range(N)]
    cnt = [draws.count(v) for v in (1, 2, 3, 4)]
    assert chi2_ok(cnt, [0.7, 0.1, 0.1, 0.1])


def test_ordinal_decay_frequencies():
    rng = np.random.default_rng(4)
    draws = [perturb_ordinal(1, 0.1, 0.1, [1, 2, 3], rng) for _ in range(N)]
    z = math.exp(-0.1) + math.exp(-0.2)
    probs = [0.9, 0.1 * math.exp(-0.1) / z, 0.1 * math.exp(-0.2) / z]
    assert chi2_ok([draws.count(v) for v in (1, 2, 3)], probs)


def test_single_level_categorical_rejected_when_perturbed():
    schema = FeatureSchema([Nominal((0.0,))])
    X = np.zeros((3, 1))
    assert np.array_equal(perturb_features(X, schema, PerturbationConfig(xi=0.0, k=2), 0),
                          np.zeros((6, 1)))
    with pytest.raises(ValueError):
        perturb_features(X, schema, PerturbationConfig(xi=0.1), 0)
    with pytest.raises(ValueError):
        perturb_nominal(0.0, 0.1, [0.0], np.random.default_rng(0))


def _mixed_schema():
    return FeatureSchema([Numeric(), Nominal((0.0, 1.0, 2.0)), Ordinal((1.0, 2.0, 3.0, 4.0))],
                         ["x", "c", "o"])


def test_vectorised_categorical_frequencies():
    X = np.array([[0.0, 0.0, 1.0]])
    cfg = PerturbationConfig(sigma=0.1, xi=0.2, lam=0.5, k=N, n_sets=1, seed=5)
    out = perturb_features(X, _mixed_schema(), cfg, 0)
    nom = np.bincount(out[:, 1].astype(int), minlength=3)
    assert chi2_ok(nom, [0.8, 0.1, 0.1])
    w = np.exp(-0.5 * np.array([1.0, 2.0, 3.0]))
    ordp = [0.8, *(0.2 * w / w.sum())]
    assert chi2_ok(np.bincount(out[:, 2].astype(int) - 1, minlength=4), ordp)
    assert abs(out[:, 0].mean()) < 4 * 0.1 / math.sqrt(N)


def test_identity_perturbation_repeats_rows():
    X = np.arange(12, dtype=float).reshape(4, 3)
    y = np.array([0, 1, 0, 1])
    cfg = PerturbationConfig(sigma=0.0, xi=0.0, k=3, n_sets=1)
    Xp, yp = build_perturbed_set(X, y, FeatureSchema.numeric(3), cfg, 0)
    assert np.array_equal(Xp, np.repeat(X, 3, axis=0))
    assert np.array_equal(yp, np.repeat(y, 3))


def test_size_and_label_preservation():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(100, 5))
    y = (rng.random(100) < 0.2).astype(int)
    Xp, yp = build_perturbed_set(X, y, FeatureSchema.numeric(5), PerturbationConfig(k=7), 3)
    assert Xp.shape == (700, 5)
    assert yp.sum() == 7 * y.sum()
    assert yp.mean() == y.mean()


def test_features_outside_set_untouched():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(20, 4))
    cfg = PerturbationConfig(sigma=0.5, perturb_features=(1, 3), k=2)
    out = perturb_features(X, FeatureSchema.numeric(4), cfg, 0)
    rep = np.repeat(X, 2, axis=0)
    assert np.array_equal(out[:, [0, 2]], rep[:, [0, 2]])
    assert not np.array_equal(out[:, [1, 3]], rep[:, [1, 3]])


def test_same_seed_and_index_reproduce_bytes():
    X = np.random.default_rng(2).normal(size=(15, 3))
    cfg = PerturbationConfig(sigma=0.3, k=4, seed=11)
    s = FeatureSchema.numeric(3)
    a = perturb_features(X, s, cfg, 2)
    assert a.tobytes() == perturb_features(X, s, cfg, 2).tobytes()
    assert a.tobytes() != perturb_features(X, s, cfg, 3).tobytes()


def test_distinct_sets_uncorrelated():
    X = np.zeros((1, 1))
    cfg = PerturbationConfig(sigma=1.0, k=20_000, seed=0)
    s = FeatureSchema.numeric(1)
    a = perturb_features(X, s, cfg, 0)[:, 0]
    b = perturb_features(X, s, cfg, 1)[:, 0]
    r = np.corrcoef(a, b)[0, 1]
    assert abs(r) < 3.3 / math.sqrt(len(a))


def test_schema_mismatch():
    with pytest.raises(ValueError):
        build_perturbed_set(np.zeros((3, 2)), [0, 1, 0], FeatureSchema.numeric(3),
                            PerturbationConfig(), 0)
    bad = np.array([[0.0, 5.0, 1.0]])
    with pytest.raises(ValueError):
        build_perturbed_set(bad, [1], _mixed_schema(), PerturbationConfig(), 0)


class Thresh:
    def __init__(self, t):
        self.t = t

    def predict(self, X):
        return (X[:, 0] > self.t).astype(int)


@given(st.integers(1, 6), st.integers(0, 2**16), st.sampled_from(["f1", "accuracy", "ie:0.3"]))
def test_zero_controls_preserve_metrics(k, seed, metric):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(30, 2))
    y = (rng.random(30) < 0.3).astype(int)
    y[0] = 1
    spec = MetricSpec.parse(metric)
    cfg = PerturbationConfig(sigma=0.0, xi=0.0, k=k, seed=seed)
    Xp, yp = build_perturbed_set(X, y, FeatureSchema.numeric(2), cfg, 0)
    f = Thresh(rng.normal())
    assert evaluate(f, Xp, yp, spec) == evaluate(f, X, y, spec)


def test_config_round_trip():
    cfg = PerturbationConfig(sigma=0.2, xi=0.05, lam=0.3, perturb_features=(0, 2), k=5,
                             n_sets=40, seed=9)
    d = cfg.to_dict()
    assert set(d) == {"sigma", "xi", "lambda", "perturb_features", "k", "m_sets", "seed"}
    assert PerturbationConfig.from_dict(d) == cfg


@pytest.mark.parametrize("kw", [dict(sigma=-1), dict(xi=1.5), dict(lam=-0.1), dict(k=0),
                                dict(n_sets=0)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        PerturbationConfig(**kw)


def test_schema_dict_round_trip():
    s = _mixed_schema()
    assert FeatureSchema.from_dict(s.to_dict()) == s


def test_transformer_wrapper():
    X = np.random.default_rng(0).normal(size=(10, 2))
    t = ValidationPerturber(sigma=0.1, k=3, seed=4).fit(X)
    out = t.transform(X, set_index=1)
    cfg = PerturbationConfig(sigma=0.1, k=3, seed=4)
    assert np.array_equal(out, perturb_features(X, FeatureSchema.numeric(2), cfg, 1))
    assert t.get_params()["sigma"] == 0.1
