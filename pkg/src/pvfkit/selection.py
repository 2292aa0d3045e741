"""Perturbation-based model selection and the single-split baseline.

Every candidate is scored on ``M`` perturbed copies of the validation set,
the ``M`` scores are collapsed by an aggregator (by default the 25th
percentile), and the candidate with the largest aggregate wins. The
perturbed sets are built once and shared by all candidates, so candidate
comparisons are paired.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, MetaEstimatorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .metrics import MetricSpec, confusion_arrays, score_counts
from .perturbation import FeatureSchema, PerturbationConfig, perturb_features

__all__ = [
    "Aggregator",
    "PVFSelector",
    "SelectionResult",
    "TraditionalSelector",
    "aggregate",
    "perturbed_scores",
    "pvf_select",
    "select_best",
    "traditional_scores",
    "traditional_select",
]

TIE_TOL = 1e-12


@dataclass(frozen=True)
class Aggregator:
    kind: str = "quantile"
    q: float = 0.25

    def __post_init__(self):
        if self.kind not in ("quantile", "mean", "median"):
            raise ValueError(f"unknown aggregator {self.kind!r}")
        if self.kind == "quantile" and not 0.0 <= self.q <= 1.0:
            raise ValueError(f"quantile level must lie in [0, 1], got {self.q}")

    @classmethod
    def parse(cls, text):
        t = str(text).strip().lower()
        if t in ("mean", "median"):
            return cls(t)
        for prefix in ("quantile:", "q"):
            if t.startswith(prefix):
                return cls("quantile", float(t[len(prefix):]))
        raise ValueError(f"cannot parse aggregator {text!r}")

    def __str__(self):
        return f"q{self.q:g}" if self.kind == "quantile" else self.kind


def aggregate(scores, agg: Aggregator = Aggregator(), axis=-1):
    """Collapse score vectors; quantiles interpolate linearly between order statistics."""
    s = np.asarray(scores, dtype=float)
    if s.size == 0 or s.shape[axis] == 0:
        raise ValueError("cannot aggregate an empty score vector")
    if agg.kind == "mean":
        return s.mean(axis=axis)
    if agg.kind == "median":
        return np.median(s, axis=axis)
    return np.quantile(s, agg.q, axis=axis, method="linear")


def select_best(values):
    """Index of the largest value (lowest index among near-ties) and a tie flag."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("no candidates")
    winners = v >= v.max() - TIE_TOL
    return int(np.argmax(winners)), bool(winners.sum() >= 2)


@dataclass
class SelectionResult:
    chosen_index: int
    scores: np.ndarray  # (n_candidates, n_sets)
    aggregated: np.ndarray  # (n_candidates,)
    tie: bool
    descriptors: list = field(default_factory=list)

    def __eq__(self, other):
        return (
            isinstance(other, SelectionResult)
            and self.chosen_index == other.chosen_index
            and self.tie == other.tie
            and np.array_equal(self.scores, other.scores)
            and np.array_equal(self.aggregated, other.aggregated)
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        m = self.scores.shape[1]
        w.writerow(["id", "descriptor", *[f"score_{i + 1}" for i in range(m)],
                    "aggregate", "chosen"])
        for i, row in enumerate(self.scores):
            desc = self.descriptors[i] if i < len(self.descriptors) else ""
            w.writerow([i, desc, *map(repr, row.tolist()), repr(float(self.aggregated[i])),
                        int(i == self.chosen_index)])
        return buf.getvalue()


def _predict_pool(candidates, X):
    return np.stack([np.asarray(c.predict(X)).astype(bool) for c in candidates])


def _descriptors(candidates):
    return [getattr(c, "descriptor", type(c).__name__) for c in candidates]


def _as_specs(metrics):
    if isinstance(metrics, (MetricSpec, str)):
        metrics = [metrics]
    return [m if isinstance(m, MetricSpec) else MetricSpec.parse(m) for m in metrics]


def traditional_scores(candidates, X_val, y_val, metrics):
    """Unperturbed validation scores, ``{spec: (n_candidates,)}``."""
    specs = _as_specs(metrics)
    pred = _predict_pool(candidates, X_val)
    counts = confusion_arrays(pred, np.asarray(y_val))
    return {s: score_counts(s, *counts) for s in specs}


def perturbed_scores(candidates, X_val, y_val, metrics, cfg: PerturbationConfig,
                     schema: FeatureSchema | None = None):
    """Scores on ``cfg.n_sets`` shared perturbed sets, ``{spec: (n_candidates, n_sets)}``.

    Set ``m`` is built once from ``(cfg.seed, m)`` and every candidate is
    evaluated on that same set.
    """
    specs = _as_specs(metrics)
    X_val = np.asarray(X_val, dtype=float)
    y_val = np.asarray(y_val)
    if len(y_val) == 0:
        raise ValueError("empty validation set")
    if schema is None:
        schema = FeatureSchema.numeric(X_val.shape[1])
    schema.validate(X_val)
    rows = len(y_val) * cfg.k
    big = np.vstack([perturb_features(X_val, schema, cfg, m) for m in range(cfg.n_sets)])
    pred = _predict_pool(candidates, big).reshape(len(candidates), cfg.n_sets, rows)
    counts = confusion_arrays(pred, np.repeat(y_val, cfg.k))
    return {s: score_counts(s, *counts) for s in specs}


def _check_pool(candidates):
    if len(candidates) == 0:
        raise ValueError("no candidates")


def pvf_select(candidates, X_val, y_val, metric, cfg: PerturbationConfig,
               aggregator: Aggregator = Aggregator(), schema=None) -> SelectionResult:
    """Pick the candidate with the best aggregated score over perturbed sets."""
    _check_pool(candidates)
    spec = _as_specs(metric)[0]
    scores = perturbed_scores(candidates, X_val, y_val, [spec], cfg, schema)[spec]
    agg = aggregate(scores, aggregator, axis=1)
    idx, tie = select_best(agg)
    return SelectionResult(idx, scores, agg, tie, _descriptors(candidates))


def traditional_select(candidates, X_val, y_val, metric) -> SelectionResult:
    """Pick the candidate with the best score on the unperturbed validation set."""
    _check_pool(candidates)
    spec = _as_specs(metric)[0]
    s = traditional_scores(candidates, X_val, y_val, [spec])[spec]
    idx, tie = select_best(s)
    return SelectionResult(idx, s[:, None], s.copy(), tie, _descriptors(candidates))


class _SelectorBase(MetaEstimatorMixin, BaseEstimator):
    def _finish(self, result):
        self.result_ = result
        self.best_index_ = result.chosen_index
        self.best_estimator_ = self.candidates[result.chosen_index]
        self.scores_ = result.scores
        self.aggregated_ = result.aggregated
        self.tie_ = result.tie
        return self

    def predict(self, X):
        check_is_fitted(self, "best_estimator_")
        return self.best_estimator_.predict(X)


class TraditionalSelector(_SelectorBase):
    """Select among pre-fitted ``candidates`` by score on a held-out set.

    ``fit(X_val, y_val)`` performs the selection; ``predict`` delegates to the
    chosen candidate.
    """

    def __init__(self, candidates=(), metric="f1"):
        self.candidates = candidates
        self.metric = metric

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        return self._finish(traditional_select(list(self.candidates), X, y, self.metric))


class PVFSelector(_SelectorBase):
    """Select among pre-fitted ``candidates`` by aggregated perturbed-set score.

    Parameters
    ----------
    candidates : sequence of fitted classifiers
    metric : str or MetricSpec, default="f1"
        ``"f1"``, ``"accuracy"`` or ``"ie:<gamma>"``.
    sigma, xi, lam : float
        Perturbation strengths (numeric noise sd, categorical change
        probability, ordinal decay).
    perturb_features : tuple of int or None
    k : int, default=7
        Replicas per validation row.
    n_sets : int, default=100
    aggregator : str or Aggregator, default="q0.25"
    schema : FeatureSchema or None
    seed : int, default=0
    """

    def __init__(self, candidates=(), metric="f1", sigma=0.1, xi=0.1, lam=0.1,
                 perturb_features=None, k=7, n_sets=100, aggregator="q0.25",
                 schema=None, seed=0):
        self.candidates = candidates
        self.metric = metric
        self.sigma = sigma
        self.xi = xi
        self.lam = lam
        self.perturb_features = perturb_features
        self.k = k
        self.n_sets = n_sets
        self.aggregator = aggregator
        self.schema = schema
        self.seed = seed

    def fit(self, X, y):
        X = check_array(X)
        y = np.asarray(y)
        cfg = PerturbationConfig(sigma=self.sigma, xi=self.xi, lam=self.lam,
                                 perturb_features=self.perturb_features, k=self.k,
                                 n_sets=self.n_sets, seed=self.seed)
        agg = self.aggregator
        if not isinstance(agg, Aggregator):
            agg = Aggregator.parse(agg)
        return self._finish(
            pvf_select(list(self.candidates), X, y, self.metric, cfg, agg, self.schema)
        )
