"""Typed feature perturbation and construction of perturbed validation sets."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

__all__ = [
    "FeatureSchema",
    "Nominal",
    "Numeric",
    "Ordinal",
    "PerturbationConfig",
    "ValidationPerturber",
    "build_perturbed_set",
    "ordinal_move_probabilities",
    "perturb_features",
    "perturb_nominal",
    "perturb_numeric",
    "perturb_ordinal",
    "set_rng",
]


@dataclass(frozen=True)
class Numeric:
    kind = "numeric"


@dataclass(frozen=True)
class Nominal:
    categories: tuple
    kind = "nominal"

    def __post_init__(self):
        cats = tuple(self.categories)
        if len(set(cats)) != len(cats):
            raise ValueError("duplicate nominal categories")
        object.__setattr__(self, "categories", cats)


def _rank_distance(i, j):
    return abs(i - j)


@dataclass(frozen=True)
class Ordinal:
    """Ordered levels; ``distance`` acts on level ranks."""

    levels: tuple
    distance: Callable[[int, int], float] = field(default=_rank_distance, compare=False)
    kind = "ordinal"

    def __post_init__(self):
        lv = tuple(self.levels)
        if len(set(lv)) != len(lv):
            raise ValueError("duplicate ordinal levels")
        object.__setattr__(self, "levels", lv)


class FeatureSchema:
    """Per-column feature kinds."""

    def __init__(self, columns: Sequence, names: Sequence[str] | None = None):
        self.columns = tuple(columns)
        if names is None:
            names = [f"x{i + 1}" for i in range(len(self.columns))]
        self.names = tuple(names)
        if len(self.names) != len(self.columns):
            raise ValueError("schema names and columns differ in length")

    @classmethod
    def numeric(cls, n_features, names=None):
        return cls([Numeric()] * n_features, names)

    def __len__(self):
        return len(self.columns)

    def __eq__(self, other):
        return (
            isinstance(other, FeatureSchema)
            and self.columns == other.columns
            and self.names == other.names
        )

    def __repr__(self):
        kinds = ",".join(c.kind[0] for c in self.columns)
        return f"FeatureSchema({kinds})"

    @property
    def numeric_mask(self):
        return np.array([c.kind == "numeric" for c in self.columns], dtype=bool)

    def select(self, idx):
        return FeatureSchema([self.columns[i] for i in idx], [self.names[i] for i in idx])

    def validate(self, X):
        X = np.asarray(X)
        if X.ndim != 2 or X.shape[1] != len(self.columns):
            raise ValueError(
                f"schema has {len(self.columns)} columns, data has shape {X.shape}"
            )
        for j, col in enumerate(self.columns):
            if col.kind == "numeric":
                continue
            allowed = col.categories if col.kind == "nominal" else col.levels
            bad = ~np.isin(X[:, j], np.asarray(allowed, dtype=float))
            if bad.any():
                raise ValueError(
                    f"column {self.names[j]!r} has values outside its declared set: "
                    f"{np.unique(X[bad, j])[:5]}"
                )

    def to_dict(self):
        out = []
        for name, col in zip(self.names, self.columns):
            d = {"name": name, "kind": col.kind}
            if col.kind == "nominal":
                d["categories"] = list(col.categories)
            elif col.kind == "ordinal":
                d["levels"] = list(col.levels)
            out.append(d)
        return out

    @classmethod
    def from_dict(cls, items):
        cols, names = [], []
        for d in items:
            kind = d.get("kind", "numeric")
            if kind == "numeric":
                cols.append(Numeric())
            elif kind == "nominal":
                cols.append(Nominal(tuple(d["categories"])))
            elif kind == "ordinal":
                cols.append(Ordinal(tuple(d["levels"])))
            else:
                raise ValueError(f"unknown feature kind {kind!r}")
            names.append(d["name"])
        return cls(cols, names)


@dataclass(frozen=True)
class PerturbationConfig:
    """Perturbation controls.

    ``perturb_features=None`` perturbs every column. ``k`` replicas per
    validation row, ``n_sets`` perturbed sets.
    """

    sigma: float = 0.1
    xi: float = 0.1
    lam: float = 0.1
    perturb_features: tuple | None = None
    k: int = 7
    n_sets: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if not 0.0 <= self.xi <= 1.0:
            raise ValueError("xi must lie in [0, 1]")
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if int(self.k) != self.k or self.k < 1:
            raise ValueError("k must be a positive integer")
        if int(self.n_sets) != self.n_sets or self.n_sets < 1:
            raise ValueError("n_sets must be a positive integer")
        if self.perturb_features is not None:
            pf = tuple(int(i) for i in self.perturb_features)
            if len(pf) == 0:
                raise ValueError("perturb_features must be nonempty (or None for all)")
            object.__setattr__(self, "perturb_features", pf)

    def to_dict(self):
        return {
            "sigma": self.sigma,
            "xi": self.xi,
            "lambda": self.lam,
            "perturb_features": None if self.perturb_features is None else list(self.perturb_features),
            "k": self.k,
            "m_sets": self.n_sets,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d):
        known = {"sigma", "xi", "lambda", "perturb_features", "k", "m_sets", "seed"}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown perturbation keys: {sorted(extra)}")
        pf = d.get("perturb_features")
        if pf in ("all", None):
            pf = None
        return cls(
            sigma=float(d.get("sigma", 0.1)),
            xi=float(d.get("xi", 0.1)),
            lam=float(d.get("lambda", 0.1)),
            perturb_features=pf,
            k=int(d.get("k", 7)),
            n_sets=int(d.get("m_sets", 100)),
            seed=int(d.get("seed", 0)),
        )


def perturb_numeric(x, sigma, rng):
    """``x + eps`` with ``eps ~ Normal(0, sigma**2)``."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0:
        return x
    return x + rng.normal(0.0, sigma)


def perturb_nominal(x, xi, categories, rng):
    """Keep ``x`` with probability ``1 - xi``, else move uniformly to another category."""
    cats = list(categories)
    if x not in cats:
        raise ValueError(f"{x!r} is not one of the categories")
    if xi == 0:
        return x
    if len(cats) < 2:
        raise ValueError("nominal perturbation needs at least two categories")
    if rng.random() >= xi:
        return x
    others = [c for c in cats if c != x]
    return others[rng.integers(len(others))]


def ordinal_move_probabilities(levels, lam, distance=_rank_distance):
    """Row-stochastic matrix of destination probabilities given a move.

    Entry ``[i, j]`` is proportional to ``exp(-lam * d(i, j))`` for ``j != i``
    and zero on the diagonal.
    """
    L = len(levels)
    if L < 2:
        raise ValueError("ordinal perturbation needs at least two levels")
    d = np.array([[distance(i, j) for j in range(L)] for i in range(L)], dtype=float)
    w = np.exp(-lam * d)
    np.fill_diagonal(w, 0.0)
    return w / w.sum(axis=1, keepdims=True)


def perturb_ordinal(x, xi, lam, levels, rng, distance=_rank_distance):
    """Keep ``x`` with probability ``1 - xi``, else move with exponential decay in distance."""
    lv = list(levels)
    if x not in lv:
        raise ValueError(f"{x!r} is not one of the levels")
    if xi == 0:
        return x
    probs = ordinal_move_probabilities(lv, lam, distance)
    if rng.random() >= xi:
        return x
    i = lv.index(x)
    return lv[rng.choice(len(lv), p=probs[i])]


def set_rng(seed, m):
    """Generator for perturbed set ``m``; streams for distinct ``m`` are independent."""
    entropy = seed if isinstance(seed, (list, tuple)) else [seed]
    return np.random.default_rng(np.random.SeedSequence(list(entropy), spawn_key=(m,)))


def _codes(values, allowed):
    allowed = np.asarray(allowed, dtype=float)
    order = np.argsort(allowed)
    pos = np.searchsorted(allowed[order], values)
    return order[pos]


def perturb_features(X, schema: FeatureSchema, cfg: PerturbationConfig, m: int):
    """Perturbed, ``k``-fold replicated copy of the feature matrix.

    Output rows ``i*k .. i*k + k - 1`` are independent perturbations of row
    ``i``. Random draws are taken in a fixed order that does not depend on
    ``sigma``, ``xi`` or ``lam``, so sets built with the same ``(seed, m)``
    but different strengths share their underlying noise.
    """
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    if len(schema) != p:
        raise ValueError(f"schema has {len(schema)} columns, data has {p}")
    cols = range(p) if cfg.perturb_features is None else cfg.perturb_features
    for j in cols:
        if not 0 <= j < p:
            raise ValueError(f"perturbed feature index {j} out of range")
    rng = set_rng(cfg.seed, m)
    out = np.repeat(X, cfg.k, axis=0)
    rows = out.shape[0]
    for j in cols:
        col = schema.columns[j]
        if col.kind == "numeric":
            z = rng.standard_normal(rows)
            if cfg.sigma > 0:
                out[:, j] += cfg.sigma * z
            continue
        allowed = col.categories if col.kind == "nominal" else col.levels
        L = len(allowed)
        u = rng.random(rows)
        v = rng.random(rows)
        if cfg.xi == 0:
            continue
        if L < 2:
            raise ValueError(f"column {schema.names[j]!r} has a single category")
        move = u < cfg.xi
        codes = _codes(out[:, j], allowed)
        if col.kind == "nominal":
            offset = 1 + np.minimum((v * (L - 1)).astype(int), L - 2)
            new = (codes + offset) % L
        else:
            cum = np.cumsum(ordinal_move_probabilities(allowed, cfg.lam, col.distance), axis=1)
            new = (v[:, None] >= cum[codes]).sum(axis=1)
            new = np.minimum(new, L - 1)
        vals = np.asarray(allowed, dtype=float)
        out[:, j] = np.where(move, vals[new], out[:, j])
    return out


def build_perturbed_set(X, y, schema: FeatureSchema, cfg: PerturbationConfig, m: int):
    """Perturbed validation set ``m``: features perturbed, labels tiled ``k`` times."""
    y = np.asarray(y)
    if len(y) == 0:
        raise ValueError("empty validation set")
    if len(y) != len(X):
        raise ValueError("features and labels differ in length")
    schema.validate(X)
    return perturb_features(X, schema, cfg, m), np.repeat(y, cfg.k)


class ValidationPerturber(TransformerMixin, BaseEstimator):
    """Transformer producing replicated, perturbed copies of a validation set.

    Parameters
    ----------
    schema : FeatureSchema or None
        Column kinds; ``None`` treats every column as numeric.
    sigma, xi, lam : float
        Numeric noise scale, categorical change probability, ordinal decay.
    perturb_features : tuple of int or None
        Columns to perturb (all when ``None``).
    k : int
        Replicas per row.
    seed : int
        Master seed; set ``m`` draws from ``(seed, m)``.
    """

    def __init__(self, schema=None, sigma=0.1, xi=0.1, lam=0.1,
                 perturb_features=None, k=7, seed=0):
        self.schema = schema
        self.sigma = sigma
        self.xi = xi
        self.lam = lam
        self.perturb_features = perturb_features
        self.k = k
        self.seed = seed

    def _config(self):
        return PerturbationConfig(
            sigma=self.sigma, xi=self.xi, lam=self.lam,
            perturb_features=self.perturb_features, k=self.k, n_sets=1, seed=self.seed,
        )

    def fit(self, X, y=None):
        X = check_array(X)
        self.schema_ = self.schema or FeatureSchema.numeric(X.shape[1])
        self.schema_.validate(X)
        self.config_ = self._config()
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X, set_index=0):
        check_is_fitted(self, "config_")
        X = check_array(X)
        self.schema_.validate(X)
        return perturb_features(X, self.schema_, self.config_, set_index)
