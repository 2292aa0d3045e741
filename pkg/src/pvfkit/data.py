"""Datasets: synthetic generation, CSV ingestion, imputation, scaling, splitting."""

from __future__ import annotations

import csv
import io
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from sklearn.model_selection import StratifiedKFold
from sklearn.preprocessing import StandardScaler

from .perturbation import FeatureSchema, Nominal, Numeric

__all__ = [
    "Dataset",
    "Partition",
    "RawTable",
    "SyntheticSpec",
    "drop_and_impute",
    "gen_synthetic",
    "ingest_csv",
    "partition_subsets",
    "standard_scale",
    "stratified_folds",
    "stratified_split",
]

log = logging.getLogger(__name__)

MISSING_TOKENS = frozenset({"?", ""})


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    schema: FeatureSchema = None
    provenance: str = ""

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y).astype(int)
        if self.X.ndim != 2 or len(self.X) != len(self.y):
            raise ValueError(f"bad shapes X{self.X.shape} y{self.y.shape}")
        if not np.isin(self.y, (0, 1)).all():
            raise ValueError("labels must be 0/1")
        if np.isnan(self.X).any():
            raise ValueError("dataset contains missing values")
        if self.schema is None:
            self.schema = FeatureSchema.numeric(self.X.shape[1])
        if len(self.schema) != self.X.shape[1]:
            raise ValueError("schema arity does not match the feature matrix")

    def __len__(self):
        return len(self.y)

    @property
    def n_positive(self):
        return int(self.y.sum())

    def take(self, idx, tag=None):
        idx = np.asarray(idx, dtype=int)
        return Dataset(self.X[idx], self.y[idx], self.schema, tag or self.provenance)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([*self.schema.names, "label"])
        for row, label in zip(self.X.tolist(), self.y.tolist()):
            w.writerow([*map(repr, row), label])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text, schema=None, provenance="csv"):
        rows = list(csv.reader(io.StringIO(text)))
        header, body = rows[0], rows[1:]
        if header[-1] != "label":
            raise ValueError("last column must be 'label'")
        X = np.array([[float(v) for v in r[:-1]] for r in body], dtype=float).reshape(
            len(body), len(header) - 1
        )
        y = np.array([int(r[-1]) for r in body], dtype=int)
        if schema is None:
            schema = FeatureSchema.numeric(X.shape[1], header[:-1])
        return cls(X, y, schema, provenance)


@dataclass(frozen=True)
class SyntheticSpec:
    n: int = 50
    mu: float = 1.0
    seed: object = 0

    def __post_init__(self):
        if self.n < 10:
            raise ValueError("synthetic datasets need n >= 10")
        if self.mu < 0:
            raise ValueError("separation mu must be >= 0")


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, (list, tuple)):
        return np.random.default_rng(np.random.SeedSequence(list(seed)))
    return np.random.default_rng(seed)


def gen_synthetic(spec: SyntheticSpec) -> Dataset:
    """80/20 two-cluster data with three irrelevant features.

    Negatives have ``(x1, x2) ~ N((0, 0), I)``, positives ``N((mu, mu), I)``;
    ``x3..x5 ~ N(0, 1)`` regardless of class.
    """
    rng = _rng(spec.seed)
    n_neg = int(round(0.8 * spec.n))
    n_pos = spec.n - n_neg
    X = rng.standard_normal((spec.n, 5))
    X[n_neg:, :2] += spec.mu
    y = np.r_[np.zeros(n_neg, int), np.ones(n_pos, int)]
    perm = rng.permutation(spec.n)
    return Dataset(X[perm], y[perm], FeatureSchema.numeric(5),
                   f"synthetic(n={spec.n},mu={spec.mu:g})")


def stratified_split(ds: Dataset, train_frac=0.7, seed=0):
    """Per-class proportional train/validation split.

    Each class contributes ``round(train_frac * n_class)`` rows to training
    (round-half-even), clipped so a class with at least two members lands
    on both sides. A singleton class goes to training with a warning.
    """
    if not 0.0 < train_frac <= 1.0:
        raise ValueError("train_frac must lie in (0, 1]")
    rng = _rng(seed)
    train_idx, val_idx = [], []
    for cls in (0, 1):
        idx = np.flatnonzero(ds.y == cls)
        if len(idx) == 0:
            continue
        idx = rng.permutation(idx)
        n_tr = int(round(train_frac * len(idx)))
        if len(idx) >= 2 and train_frac < 1.0:
            n_tr = min(max(n_tr, 1), len(idx) - 1)
        elif len(idx) == 1:
            warnings.warn(f"class {cls} has a single member; it goes to training",
                          stacklevel=2)
            n_tr = 1
        train_idx.append(idx[:n_tr])
        val_idx.append(idx[n_tr:])
    tr = np.sort(np.concatenate(train_idx))
    va = np.sort(np.concatenate(val_idx))
    if len(va) == 0:
        raise ValueError("validation split is empty")
    return ds.take(tr, ds.provenance + ":train"), ds.take(va, ds.provenance + ":val")


def stratified_folds(ds: Dataset, n_folds=5, seed=0):
    """``(train, val)`` pairs from stratified K-fold; each row validates once."""
    rs = int(np.random.SeedSequence(_entropy(seed)).generate_state(1)[0])
    skf = StratifiedKFold(n_splits=n_folds, shuffle=True, random_state=rs)
    return [
        (ds.take(tr, ds.provenance + f":fold{i}:train"), ds.take(va, ds.provenance + f":fold{i}:val"))
        for i, (tr, va) in enumerate(skf.split(ds.X, ds.y))
    ]


def _entropy(seed):
    return list(seed) if isinstance(seed, (list, tuple)) else [int(seed)]


@dataclass
class RawTable:
    columns: list
    values: np.ndarray  # float, NaN marks missing
    target: np.ndarray
    missing_fraction: dict = field(default_factory=dict)
    source: str = ""


def ingest_csv(path, target_column, missing_tokens=MISSING_TOKENS, positive_label=None,
               drop_columns=()):
    """Read a headed CSV into a numeric table plus binary target.

    Feature cells in ``missing_tokens`` become NaN. The target must be 0/1
    unless ``positive_label`` names the positive class. Rows with a missing
    target are dropped.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        rows = list(reader)
    if target_column not in header:
        raise ValueError(f"{path}: no target column {target_column!r}")
    tj = header.index(target_column)
    skip = {tj, *(header.index(c) for c in drop_columns if c in header)}
    keep = [j for j in range(len(header)) if j not in skip]
    values, target = [], []
    for lineno, row in enumerate(rows, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ValueError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        t = row[tj].strip()
        if t in missing_tokens:
            continue
        if positive_label is not None:
            target.append(int(t == str(positive_label)))
        else:
            try:
                tv = float(t)
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric target {t!r}") from None
            if tv not in (0.0, 1.0):
                raise ValueError(f"{path}:{lineno}: target {t!r} is not 0/1")
            target.append(int(tv))
        vals = []
        for j in keep:
            cell = row[j].strip()
            if cell in missing_tokens:
                vals.append(np.nan)
                continue
            try:
                vals.append(float(cell))
            except ValueError:
                raise ValueError(
                    f"{path}:{lineno}: cannot parse {cell!r} in column {header[j]!r}"
                ) from None
        values.append(vals)
    cols = [header[j] for j in keep]
    V = np.array(values, dtype=float).reshape(len(values), len(cols))
    frac = {c: float(np.isnan(V[:, j]).mean()) if len(V) else 0.0 for j, c in enumerate(cols)}
    return RawTable(cols, V, np.array(target, dtype=int), frac, str(path))


def _binary_columns(V):
    out = []
    for j in range(V.shape[1]):
        obs = V[~np.isnan(V[:, j]), j]
        out.append(obs.size > 0 and np.isin(obs, (0.0, 1.0)).all())
    return out


def drop_and_impute(table: RawTable, drop_threshold=0.5, k=5, categorical="auto",
                    expected_shape=None) -> Dataset:
    """Drop sparse columns and empty rows, then fill gaps from nearest complete cases.

    Columns with missing fraction above ``drop_threshold`` are removed, as
    are rows with every remaining feature missing. Each remaining gap is
    filled from the ``k`` nearest complete rows, measured by Euclidean
    distance on the row's observed columns (standardised, rescaled by
    ``sqrt(p / n_observed)``). Numeric columns take the neighbour mean;
    nominal columns take the neighbour mode (lowest value on ties), so codes
    stay in their declared set. With ``categorical="auto"`` 0/1-valued
    columns are declared nominal.
    """
    V = table.values
    keep_cols = [j for j, c in enumerate(table.columns)
                 if table.missing_fraction[c] <= drop_threshold]
    V = V[:, keep_cols]
    names = [table.columns[j] for j in keep_cols]
    y = table.target
    rows = ~np.isnan(V).all(axis=1) if V.shape[1] else np.ones(len(V), bool)
    V, y = V[rows], y[rows]
    p = V.shape[1]
    if categorical == "auto":
        nominal = _binary_columns(V)
    else:
        nominal = [n in set(categorical or ()) for n in names]
    miss = np.isnan(V)
    if miss.any():
        complete = ~miss.any(axis=1)
        if not complete.any():
            raise ValueError("no complete rows to impute from")
        mu = np.nanmean(V, axis=0)
        sd = np.nanstd(V, axis=0)
        sd[sd == 0] = 1.0
        Z = (V - mu) / sd
        pool = np.flatnonzero(complete)
        kk = min(k, len(pool))
        V = V.copy()
        for i in np.flatnonzero(~complete):
            obs = ~miss[i]
            if obs.any():
                diff = Z[pool][:, obs] - Z[i, obs]
                d = np.sqrt((diff ** 2).sum(axis=1) * (p / obs.sum()))
            else:
                d = np.zeros(len(pool))
            nn = pool[np.argsort(d, kind="stable")[:kk]]
            for j in np.flatnonzero(~obs):
                vals = V[nn, j]
                if nominal[j]:
                    u, cnt = np.unique(vals, return_counts=True)
                    V[i, j] = u[np.argmax(cnt)]
                else:
                    V[i, j] = vals.mean()
    cols = [Nominal((0.0, 1.0)) if nominal[j] else Numeric() for j in range(p)]
    ds = Dataset(V, y, FeatureSchema(cols, names), table.source)
    if expected_shape is not None and ds.X.shape != tuple(expected_shape):
        log.warning("preprocessed shape %s differs from expected %s", ds.X.shape,
                    tuple(expected_shape))
    return ds


def standard_scale(train: Dataset, *others: Dataset):
    """Scale numeric columns with training statistics; categorical columns pass through.

    Zero-variance columns are centred only.
    """
    mask = train.schema.numeric_mask
    scaler = StandardScaler().fit(train.X[:, mask]) if mask.any() else None
    out = []
    for ds in (train, *others):
        X = ds.X.copy()
        if scaler is not None:
            X[:, mask] = scaler.transform(ds.X[:, mask])
        out.append(Dataset(X, ds.y, ds.schema, ds.provenance))
    return out


@dataclass
class Partition:
    subsets: list
    remainder: np.ndarray
    n: int

    def external(self, i):
        """Indices of every row outside subset ``i``."""
        mask = np.ones(self.n, bool)
        mask[self.subsets[i]] = False
        return np.flatnonzero(mask)


def partition_subsets(ds: Dataset, subset_size=100, seed=0) -> Partition:
    """``floor(n / subset_size)`` disjoint, class-proportional subsets.

    Each class is shuffled and the classes are interleaved evenly before the
    sequence is cut into consecutive chunks, so every subset carries close to
    the overall prevalence. Leftover rows form ``remainder``.
    """
    n = len(ds)
    if subset_size < 1 or subset_size > n:
        raise ValueError("subset_size must lie in [1, n]")
    rng = _rng(seed)
    keys = np.empty(n)
    for c in (0, 1):
        idx = rng.permutation(np.flatnonzero(ds.y == c))
        keys[idx] = (np.arange(len(idx)) + 0.5) / max(len(idx), 1)
    perm = np.lexsort((ds.y, keys))
    m = n // subset_size
    subsets = [np.sort(perm[i * subset_size:(i + 1) * subset_size]) for i in range(m)]
    return Partition(subsets, np.sort(perm[m * subset_size:]), n)
