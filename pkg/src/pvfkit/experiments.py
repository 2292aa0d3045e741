"""Synthetic sweep, real-data protocol and sigma-sensitivity summaries.

Every random choice derives from integer seed tuples such as
``(master, n, mu_index, rep)``, so results do not depend on worker count or
scheduling. A synthetic dataset for ``(n, mu, rep)`` is shared across all
sigma and gamma values, and its perturbed sets reuse the same underlying
noise for every sigma, so comparisons across the grid are paired.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy import stats

from .data import (
    Dataset,
    SyntheticSpec,
    gen_synthetic,
    partition_subsets,
    standard_scale,
    stratified_folds,
    stratified_split,
)
from .metrics import MetricSpec, NoPositivesError
from .models import logistic_pair_pool, tree_subsample_pool
from .perturbation import PerturbationConfig
from .selection import (
    Aggregator,
    aggregate,
    perturbed_scores,
    select_best,
    traditional_scores,
)

__all__ = [
    "ConfigResult",
    "RealConfig",
    "SweepConfig",
    "band_of",
    "real_summary",
    "run_real_protocol",
    "run_sweep",
    "run_synthetic_rep",
    "sensitivity_report",
    "sweep_summary",
]

log = logging.getLogger(__name__)

TRACK = "f1acc"
MAX_RETRIES = 10
OUTCOME_TOL = 1e-12


def _grid(start, stop, step):
    n = int(round((stop - start) / step)) + 1
    return tuple(round(start + i * step, 10) for i in range(n))


MU_GRID = _grid(0.1, 2.9, 0.2)
SIGMA_GRID = (1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1)
SIGMA_GRID_EXTENDED = SIGMA_GRID + (0.2, 0.3, 0.4, 0.5)
GAMMA_GRID = (0.1, 0.3, 0.5, 0.7, 0.9)


@dataclass(frozen=True)
class SweepConfig:
    sizes: tuple = (50, 100)
    mus: tuple = MU_GRID
    sigmas: tuple = SIGMA_GRID
    gammas: tuple = GAMMA_GRID
    reps: int = 300
    seed: int = 0
    aggregator: Aggregator = Aggregator("quantile", 0.25)
    k: int = 7
    n_sets: int = 100
    train_frac: float = 0.7
    shuffle_pool: bool = True

    def __post_init__(self):
        for name in ("sizes", "mus", "sigmas", "gammas"):
            if len(getattr(self, name)) == 0:
                raise ValueError(f"{name} grid is empty")
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        for g in self.gammas:
            MetricSpec.ie(g)

    @property
    def tracks(self):
        return [f"ie:{g:g}" for g in self.gammas] + [TRACK]


@dataclass
class ConfigResult:
    n: int
    mu: float
    sigma: float
    metric: str
    reps: int
    c_pvf: int
    c_trad: int
    pvf_only: int
    trad_only: int
    retries: int = 0

    @property
    def d(self):
        return self.c_pvf - self.c_trad

    @property
    def mcnemar_p(self):
        """Two-sided exact McNemar p-value on the discordant repetitions."""
        b = self.pvf_only + self.trad_only
        if b == 0:
            return 1.0
        return float(stats.binomtest(self.pvf_only, b, 0.5).pvalue)

    @property
    def ttest_p(self):
        """Paired t-test on per-repetition correctness indicators."""
        b = self.pvf_only + self.trad_only
        if b == 0 or self.reps < 2:
            return 1.0
        mean = (self.pvf_only - self.trad_only) / self.reps
        var = (b - self.reps * mean * mean) / (self.reps - 1)
        if var <= 0:
            return 0.0
        t = mean / math.sqrt(var / self.reps)
        return float(2 * stats.t.sf(abs(t), self.reps - 1))

    def row(self):
        return {
            "n": self.n, "mu": self.mu, "sigma": self.sigma, "metric": self.metric,
            "reps": self.reps, "c_pvf": self.c_pvf, "c_trad": self.c_trad, "d": self.d,
            "pvf_only": self.pvf_only, "trad_only": self.trad_only,
            "mcnemar_p": self.mcnemar_p, "ttest_p": self.ttest_p, "retries": self.retries,
        }


def track_metric(mu) -> MetricSpec:
    """F1 up to mu = 2.5, accuracy beyond."""
    return MetricSpec("f1") if mu <= 2.5 + 1e-9 else MetricSpec("accuracy")


def _split_with_retry(ds, train_frac, entropy):
    for attempt in range(MAX_RETRIES + 1):
        seed = [*entropy, 1] if attempt == 0 else [*entropy, 1, attempt]
        train, val = stratified_split(ds, train_frac, seed)
        if val.n_positive > 0 and 0 < train.n_positive < len(train):
            return train, val, attempt
    raise NoPositivesError(f"could not obtain a usable split after {MAX_RETRIES} retries")


def _rep_all_sigmas(n, mu, sigmas, gammas, entropy, cfg: SweepConfig):
    """One repetition evaluated at every sigma. Returns ``({(sigma, track): (pvf, trad)}, retries)``."""
    ds = gen_synthetic(SyntheticSpec(n=n, mu=mu, seed=[*entropy, 0]))
    train, val, retries = _split_with_retry(ds, cfg.train_frac, entropy)
    pool = logistic_pair_pool(train.X, train.y, seed=[*entropy, 2])
    truth = 0
    if cfg.shuffle_pool:
        order = np.random.default_rng([*entropy, 3]).permutation(len(pool))
        pool = [pool[i] for i in order]
        truth = int(np.flatnonzero(order == 0)[0])
    specs = {f"ie:{g:g}": MetricSpec.ie(g) for g in gammas}
    specs[TRACK] = track_metric(mu)
    trad = traditional_scores(pool, val.X, val.y, list(specs.values()))
    trad_ok = {t: select_best(trad[s])[0] == truth for t, s in specs.items()}
    out = {}
    for sigma in sigmas:
        pcfg = PerturbationConfig(sigma=sigma, xi=0.0, lam=0.0, k=cfg.k, n_sets=cfg.n_sets,
                                  seed=[*entropy, 4])
        pvf = perturbed_scores(pool, val.X, val.y, list(specs.values()), pcfg, val.schema)
        for t, s in specs.items():
            agg = aggregate(pvf[s], cfg.aggregator, axis=1)
            out[(sigma, t)] = (select_best(agg)[0] == truth, trad_ok[t])
    return out, retries


def run_synthetic_rep(h, rep_seed, metrics=None, cfg: SweepConfig | None = None):
    """One repetition at ``h = (n, mu, sigma)``.

    Returns ``{track: {"pvf_correct": bool, "trad_correct": bool}}`` where
    tracks are ``ie:<gamma>`` and ``f1acc`` (F1 for mu <= 2.5, else
    accuracy). ``metrics`` restricts the IE capacities.
    """
    n, mu, sigma = h
    cfg = cfg or SweepConfig()
    gammas = cfg.gammas if metrics is None else tuple(metrics)
    entropy = rep_seed if isinstance(rep_seed, (list, tuple)) else [int(rep_seed)]
    res, _ = _rep_all_sigmas(n, mu, (sigma,), gammas, list(entropy), cfg)
    return {t: {"pvf_correct": bool(v[0]), "trad_correct": bool(v[1])}
            for (s, t), v in res.items()}


def _sweep_task(args):
    n, mu, rep, cfg = args
    entropy = [cfg.seed, n, int(round(mu * 1000)), rep]
    return _rep_all_sigmas(n, mu, cfg.sigmas, cfg.gammas, entropy, cfg)


def _map(fn, tasks, jobs):
    if jobs <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, tasks, chunksize=max(1, len(tasks) // (jobs * 8))))


def run_sweep(cfg: SweepConfig, jobs=1):
    """All ``(n, mu, sigma)`` configurations x tracks, ``reps`` repetitions each."""
    tasks = [(n, mu, rep, cfg) for n in cfg.sizes for mu in cfg.mus for rep in range(cfg.reps)]
    outcomes = _map(_sweep_task, tasks, jobs)
    tally = defaultdict(lambda: [0, 0, 0, 0])
    retries = defaultdict(int)
    for (n, mu, rep, _), (res, r) in zip(tasks, outcomes):
        retries[(n, mu)] += r
        for (sigma, track), (p, t) in res.items():
            c = tally[(n, mu, sigma, track)]
            c[0] += p
            c[1] += t
            c[2] += p and not t
            c[3] += t and not p
    results = []
    for n in cfg.sizes:
        for mu in cfg.mus:
            for sigma in cfg.sigmas:
                for track in cfg.tracks:
                    c = tally[(n, mu, sigma, track)]
                    results.append(ConfigResult(n, mu, sigma, track, cfg.reps, *c,
                                                retries=retries[(n, mu)]))
    return results


def sweep_summary(results):
    """Percentage of configurations with ``d > 0``, per track."""
    by = defaultdict(list)
    for r in results:
        by[r.metric].append(r.d)
    return {m: 100.0 * sum(d > 0 for d in ds) / len(ds) for m, ds in by.items()}


def band_of(mu):
    if mu <= 0.9 + 1e-9:
        return "low"
    if mu <= 1.9 + 1e-9:
        return "moderate"
    return "high"


def sign_test(results):
    """One-sided sign test over discordant repetitions pooled across ``results``."""
    wins = sum(r.pvf_only for r in results)
    losses = sum(r.trad_only for r in results)
    if wins + losses == 0:
        return wins, losses, 1.0
    p = stats.binomtest(wins, wins + losses, 0.5, alternative="greater").pvalue
    return wins, losses, float(p)


def sensitivity_report(results):
    """Mean ``d`` per ``(n, band, track, sigma)``."""
    groups = defaultdict(list)
    for r in results:
        groups[(r.n, band_of(r.mu), r.metric, r.sigma)].append(r.d)
    rows = []
    for (n, band, metric, sigma), ds in sorted(
        groups.items(), key=lambda kv: (kv[0][0], ["low", "moderate", "high"].index(kv[0][1]),
                                        kv[0][2], kv[0][3])
    ):
        rows.append({"n": n, "band": band, "metric": metric, "sigma": sigma,
                     "configs": len(ds), "mean_d": float(np.mean(ds))})
    return rows


# --- real-data protocol -----------------------------------------------------


@dataclass(frozen=True)
class RealConfig:
    sigmas: tuple = SIGMA_GRID_EXTENDED
    gammas: tuple = GAMMA_GRID
    include_f1: bool = True
    xi: float = 0.1
    lam: float = 0.1
    k: int = 7
    n_sets: int = 100
    aggregator: Aggregator = Aggregator("quantile", 0.25)
    subset_size: int = 100
    n_folds: int = 5
    n_candidates: int = 100
    frac: float = 0.7
    max_depth: int = 4
    seed: int = 0

    @property
    def metrics(self):
        specs = [MetricSpec.ie(g) for g in self.gammas]
        if self.include_f1:
            specs.append(MetricSpec("f1"))
        return specs


def _real_task(args):
    ds, part, i, cfg = args
    sub = ds.take(part.subsets[i], f"subset{i}")
    ext = ds.take(part.external(i), f"external{i}")
    folds = None
    for attempt in range(MAX_RETRIES + 1):
        seed = [cfg.seed, i, 1] if attempt == 0 else [cfg.seed, i, 1, attempt]
        folds = stratified_folds(sub, cfg.n_folds, seed)
        if all(v.n_positive > 0 for _, v in folds):
            break
    else:
        raise NoPositivesError(f"subset {i}: a validation fold has no positives")
    specs = cfg.metrics
    rows = []
    for f, (train, val) in enumerate(folds):
        train_s, val_s, ext_s = standard_scale(train, val, ext)
        pool = tree_subsample_pool(train_s.X, train_s.y, cfg.n_candidates, cfg.frac,
                                   cfg.max_depth, seed=[cfg.seed, i, f, 2])
        trad = traditional_scores(pool, val_s.X, val_s.y, specs)
        external = traditional_scores(pool, ext_s.X, ext_s.y, specs)
        for sigma in cfg.sigmas:
            pcfg = PerturbationConfig(sigma=sigma, xi=cfg.xi, lam=cfg.lam, k=cfg.k,
                                      n_sets=cfg.n_sets, seed=[cfg.seed, i, f, 3])
            pvf = perturbed_scores(pool, val_s.X, val_s.y, specs, pcfg, val_s.schema)
            for s in specs:
                pi = select_best(aggregate(pvf[s], cfg.aggregator, axis=1))[0]
                ti = select_best(trad[s])[0]
                pe, te = float(external[s][pi]), float(external[s][ti])
                if pe > te + OUTCOME_TOL:
                    outcome = "pvf"
                elif te > pe + OUTCOME_TOL:
                    outcome = "trad"
                else:
                    outcome = "tie"
                rows.append({"subset": i, "fold": f, "metric": str(s), "sigma": sigma,
                             "pvf_index": pi, "trad_index": ti, "pvf_external": pe,
                             "trad_external": te, "outcome": outcome})
    return rows


def run_real_protocol(ds: Dataset, cfg: RealConfig = RealConfig(), jobs=1):
    """Per ``(subset, fold, metric, sigma)`` outcome in ``{"pvf", "trad", "tie"}``.

    The data are cut into disjoint subsets; within each subset a stratified
    K-fold gives train/validation pairs. A subsampled-tree pool is fitted on
    each training fold, one tree is chosen by each method, and the two
    choices are compared on everything outside the subset.
    """
    part = partition_subsets(ds, cfg.subset_size, seed=[cfg.seed, 0])
    tasks = [(ds, part, i, cfg) for i in range(len(part.subsets))]
    return [r for rows in _map(_real_task, tasks, jobs) for r in rows]


def real_summary(rows):
    """Win/tie/loss percentages per ``(metric, sigma)``."""
    groups = defaultdict(lambda: {"pvf": 0, "trad": 0, "tie": 0})
    for r in rows:
        groups[(r["metric"], r["sigma"])][r["outcome"]] += 1
    out = []
    for (metric, sigma), c in groups.items():
        total = sum(c.values())
        out.append({"metric": metric, "sigma": sigma, "folds": total,
                    "pvf_pct": 100.0 * c["pvf"] / total, "trad_pct": 100.0 * c["trad"] / total,
                    "tie_pct": 100.0 * c["tie"] / total})
    return out


def rows_to_csv(rows, fields=None) -> str:
    buf = io.StringIO()
    if not rows:
        return ""
    fields = fields or list(rows[0])
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v)
                    for k, v in r.items()})
    return buf.getvalue()


def csv_to_rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def with_overrides(cfg, **kw):
    return replace(cfg, **{k: v for k, v in kw.items() if v is not None})

