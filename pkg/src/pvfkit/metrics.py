"""Confusion-count metrics and Intervention Efficiency.

Intervention Efficiency (IE) compares the expected number of positives a
classifier-guided intervention reaches against uniform random intervention
under the same capacity ``gamma`` (fraction of the population that can be
treated). Two independent implementations are provided:

* :func:`ie_ratio` works from precision, recall and prevalence.
* :func:`ie_counting` works from raw confusion counts and evaluates the
  two-stage expectation in exact rational arithmetic.

Every metric here is a function of :class:`ConfusionCounts` only, which is
what makes them invariant under exact replication of a dataset.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

__all__ = [
    "ConfusionCounts",
    "IEInputs",
    "MetricSpec",
    "NoPositivesError",
    "accuracy",
    "confusion",
    "confusion_arrays",
    "evaluate",
    "f1",
    "ie_counting",
    "ie_ratio",
    "precision",
    "recall",
    "score_counts",
]


class NoPositivesError(ValueError):
    """IE is undefined on an evaluation set without positives."""


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        for name in ("tp", "fp", "tn", "fn"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise ValueError(f"{name} must be a non-negative integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        if self.n < 1:
            raise ValueError("confusion counts are empty")

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def positives(self) -> int:
        return self.tp + self.fn

    @property
    def flagged(self) -> int:
        return self.tp + self.fp

    @property
    def prevalence(self) -> float:
        return self.positives / self.n

    @property
    def flagged_fraction(self) -> float:
        return self.flagged / self.n

    def as_tuple(self):
        return self.tp, self.fp, self.tn, self.fn


def _as_binary(v, name):
    a = np.asarray(v)
    if a.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if a.size and not np.isin(a, (0, 1)).all():
        raise ValueError(f"{name} must contain only 0/1 values")
    return a.astype(bool)


def confusion(predictions, labels) -> ConfusionCounts:
    """Tally a binary confusion matrix."""
    pred = _as_binary(predictions, "predictions")
    lab = _as_binary(labels, "labels")
    if pred.shape != lab.shape:
        raise ValueError(
            f"length mismatch: {pred.shape[0]} predictions vs {lab.shape[0]} labels"
        )
    if pred.size == 0:
        raise ValueError("empty input")
    tp = int(np.count_nonzero(pred & lab))
    fp = int(np.count_nonzero(pred & ~lab))
    fn = int(np.count_nonzero(~pred & lab))
    tn = pred.size - tp - fp - fn
    return ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn)


def confusion_arrays(predictions, labels):
    """Vectorised confusion counts over the last axis.

    ``predictions`` may carry leading batch axes, e.g. ``(n_models, n_sets,
    n_rows)``; ``labels`` broadcasts against it. Returns integer arrays
    ``(tp, fp, tn, fn)`` with the batch shape.
    """
    pred = np.asarray(predictions, dtype=bool)
    lab = np.asarray(labels, dtype=bool)
    tp = np.count_nonzero(pred & lab, axis=-1)
    fp = np.count_nonzero(pred & ~lab, axis=-1)
    fn = np.count_nonzero(~pred & lab, axis=-1)
    tn = pred.shape[-1] - tp - fp - fn
    return tp, fp, tn, fn


def _safe_div(num, den):
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    out = np.zeros(np.broadcast(num, den).shape)
    np.divide(num, den, out=out, where=den > 0)
    return out


def precision(counts: ConfusionCounts) -> float:
    return float(_safe_div(counts.tp, counts.tp + counts.fp))


def recall(counts: ConfusionCounts) -> float:
    return float(_safe_div(counts.tp, counts.tp + counts.fn))


def f1(counts: ConfusionCounts) -> float:
    return float(_f1_arrays(counts.tp, counts.fp, counts.fn))


def accuracy(counts: ConfusionCounts) -> float:
    return (counts.tp + counts.tn) / counts.n


def _f1_arrays(tp, fp, fn):
    # 2tp / (2tp + fp + fn) is the harmonic mean written over integers, so
    # k-fold replicated counts give bit-identical scores.
    tp = np.asarray(tp)
    return _safe_div(2 * tp, 2 * tp + np.asarray(fp) + np.asarray(fn))


@dataclass(frozen=True)
class IEInputs:
    """Ratio-form inputs to Intervention Efficiency.

    ``flagged`` is the fraction of the set the model flags. It equals
    ``prevalence * recall / precision`` whenever precision is positive and is
    required when precision is zero, where that expression is 0/0.
    """

    precision: float
    recall: float
    prevalence: float
    gamma: float
    flagged: float | None = None

    def __post_init__(self):
        _check_gamma(self.gamma)
        for name in ("precision", "recall", "prevalence"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.prevalence == 0:
            raise NoPositivesError("no positives in evaluation set")
        if self.flagged is None and self.precision == 0 and self.recall > 0:
            raise ValueError("recall > 0 is impossible with zero precision")

    @classmethod
    def from_counts(cls, counts: ConfusionCounts, gamma: float) -> "IEInputs":
        return cls(
            precision=precision(counts),
            recall=recall(counts),
            prevalence=counts.prevalence,
            gamma=gamma,
            flagged=counts.flagged_fraction,
        )

    @property
    def s(self) -> float:
        """Fraction of the population treated on the model's say-so."""
        if self.flagged is not None:
            return min(self.gamma, self.flagged)
        if self.precision == 0:
            # without a flagged fraction, zero precision is read as "flags nobody"
            return 0.0
        return min(self.gamma, self.prevalence * self.recall / self.precision)


def _check_gamma(gamma):
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"capacity gamma must lie in (0, 1], got {gamma}")


def _ie_ratio_arrays(p, pi, s, gamma):
    p = np.asarray(p, dtype=float)
    pi = np.asarray(pi, dtype=float)
    s = np.asarray(s, dtype=float)
    scarce = s >= gamma
    with np.errstate(divide="ignore", invalid="ignore"):
        residual = np.where(s < 1.0, (pi - s * p) / (1.0 - s), 0.0)
        ample = (s * p + (gamma - s) * residual) / (gamma * pi)
        out = np.where(scarce, p / pi, ample)
    # a model whose precision equals the base rate is uniform intervention
    return np.where(p == pi, 1.0, out)


def ie_ratio(inputs: IEInputs) -> float:
    """Closed-form Intervention Efficiency.

    With ``s = min(gamma, flagged fraction)``::

        IE = (s*p + (gamma - s) * (pi - s*p) / (1 - s)) / (gamma * pi)

    When ``s == gamma`` the budget is exhausted on flagged cases and the
    expression reduces to ``p / pi``, which is evaluated directly.
    """
    return float(
        _ie_ratio_arrays(inputs.precision, inputs.prevalence, inputs.s, inputs.gamma)
    )


def ie_counting(counts: ConfusionCounts, gamma: float) -> float:
    """Intervention Efficiency from the counting form of the two-stage policy.

    The budget ``c = gamma * n`` is fractional (expected-value semantics) and
    everything is evaluated with :class:`fractions.Fraction`, so the only
    rounding is the final conversion to float.
    """
    _check_gamma(gamma)
    alpha = counts.positives
    beta = counts.n
    if alpha == 0:
        raise NoPositivesError("no positives in evaluation set")
    flagged = counts.flagged
    if flagged == 0:
        return 1.0
    c = Fraction(gamma) * beta
    c1 = min(c, Fraction(flagged))
    p = Fraction(counts.tp, flagged)
    captured = c1 * p
    if c1 < beta:
        captured += (c - c1) * (alpha - c1 * p) / (beta - c1)
    uniform = c * Fraction(alpha, beta)
    return float(captured / uniform)


def score_counts(spec: "MetricSpec", tp, fp, tn, fn):
    """Vectorised metric over (possibly batched) confusion counts."""
    tp = np.asarray(tp)
    fp = np.asarray(fp)
    tn = np.asarray(tn)
    fn = np.asarray(fn)
    n = tp + fp + tn + fn
    if np.any(n < 1):
        raise ValueError("empty evaluation set")
    if spec.kind == "f1":
        return _f1_arrays(tp, fp, fn)
    if spec.kind == "accuracy":
        return (tp + tn) / n
    pos = tp + fn
    if np.any(pos == 0):
        raise NoPositivesError("no positives in evaluation set")
    p = _safe_div(tp, tp + fp)
    pi = pos / n
    s = np.minimum(spec.gamma, (tp + fp) / n)
    return _ie_ratio_arrays(p, pi, s, spec.gamma)


_IE_RE = re.compile(r"^ie[:(]\s*([0-9.eE+-]+)\s*\)?$")


@dataclass(frozen=True)
class MetricSpec:
    """Choice of evaluation metric: ``ie`` (with capacity), ``f1``, ``accuracy``.

    Round-trips through the strings ``"ie:0.3"``, ``"f1"``, ``"accuracy"``.
    """

    kind: str
    gamma: float | None = None

    def __post_init__(self):
        if self.kind not in ("ie", "f1", "accuracy"):
            raise ValueError(f"unknown metric kind {self.kind!r}")
        if self.kind == "ie":
            if self.gamma is None:
                raise ValueError("IE needs a capacity gamma")
            _check_gamma(self.gamma)
            object.__setattr__(self, "gamma", float(self.gamma))
        elif self.gamma is not None:
            raise ValueError(f"{self.kind} takes no capacity")

    @classmethod
    def ie(cls, gamma):
        return cls("ie", gamma)

    @classmethod
    def parse(cls, text: str) -> "MetricSpec":
        t = text.strip().lower()
        if t in ("f1", "accuracy"):
            return cls(t)
        if t == "acc":
            return cls("accuracy")
        m = _IE_RE.match(t)
        if m is None:
            raise ValueError(f"cannot parse metric {text!r}")
        return cls("ie", float(m.group(1)))

    def __str__(self):
        if self.kind == "ie":
            return f"ie:{self.gamma:g}"
        return self.kind

    def from_counts(self, counts: ConfusionCounts) -> float:
        return float(score_counts(self, *counts.as_tuple()))


def evaluate(model, X, y, spec: MetricSpec) -> float:
    """Score ``model.predict(X)`` against ``y`` under ``spec``."""
    y = np.asarray(y)
    if y.size == 0:
        raise ValueError("empty evaluation set")
    counts = confusion(np.asarray(model.predict(X)).astype(int), y)
    return spec.from_counts(counts)
