"""Monte Carlo simulation of capacity-limited intervention policies.

Used as an independent check on :mod:`pvfkit.metrics`: populations are
explicit integer counts, the policy is simulated by sampling without
replacement, and the captured-positive ratio is compared against the closed
form.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass

import numpy as np

from .metrics import ConfusionCounts, ie_counting

__all__ = [
    "MCEstimate",
    "PopulationSpec",
    "default_grid",
    "expected_policy_capture",
    "grid_report",
    "mc_ie",
    "simulate_policy",
    "simulate_uniform",
]

SHARD_SIZE = 50_000


@dataclass(frozen=True)
class PopulationSpec:
    beta: int  # population size
    alpha: int  # positives
    flagged: int
    tp: int  # positives among flagged
    c: int  # budget

    def __post_init__(self):
        b, a, f, t, c = self.beta, self.alpha, self.flagged, self.tp, self.c
        if min(b, a, f, t, c) < 0:
            raise ValueError(f"negative count in {self}")
        if b < 1 or a > b or f > b or c > b:
            raise ValueError(f"infeasible population {self}")
        if t > min(a, f) or f - t > b - a:
            raise ValueError(f"infeasible flag composition {self}")

    @property
    def gamma(self) -> float:
        return self.c / self.beta

    @property
    def counts(self) -> ConfusionCounts:
        return ConfusionCounts(
            tp=self.tp,
            fp=self.flagged - self.tp,
            fn=self.alpha - self.tp,
            tn=self.beta - self.alpha - self.flagged + self.tp,
        )

    @property
    def regime(self) -> str:
        return "A" if self.c < self.flagged else "B"


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    se: float
    trials: int


def _shard_sizes(trials):
    full, rest = divmod(trials, SHARD_SIZE)
    return [SHARD_SIZE] * full + ([rest] if rest else [])


def _hypergeom(rng, good, bad, draws, size):
    if draws == 0 or good == 0:
        return np.zeros(size, dtype=np.int64)
    if bad == 0:
        return np.full(size, draws, dtype=np.int64)
    return rng.hypergeometric(good, bad, draws, size=size)


def _policy_shard(spec, rng, size, explicit):
    c1 = min(spec.c, spec.flagged)
    rest = spec.c - c1
    if explicit:
        return _policy_explicit(spec, rng, size, c1, rest)
    stage1 = _hypergeom(rng, spec.tp, spec.flagged - spec.tp, c1, size)
    # whatever stage 1 leaves behind stays in the pool alongside the unflagged
    pool_pos = spec.alpha - stage1
    pool_size = spec.beta - c1
    if rest == 0:
        return stage1
    stage2 = np.empty(size, dtype=np.int64)
    for v in np.unique(pool_pos):
        idx = pool_pos == v
        stage2[idx] = _hypergeom(rng, int(v), pool_size - int(v), rest, int(idx.sum()))
    return stage1 + stage2


def _policy_explicit(spec, rng, size, c1, rest):
    # individuals: flagged first (tp positives then fp), then unflagged
    # (remaining positives then negatives)
    fp = spec.flagged - spec.tp
    is_pos = np.concatenate(
        [
            np.ones(spec.tp, bool),
            np.zeros(fp, bool),
            np.ones(spec.alpha - spec.tp, bool),
            np.zeros(spec.beta - spec.alpha - fp, bool),
        ]
    )
    out = np.empty(size, dtype=np.int64)
    flagged_idx = np.arange(spec.flagged)
    for t in range(size):
        chosen = rng.permutation(flagged_idx)[:c1]
        remaining = np.setdiff1d(np.arange(spec.beta), chosen, assume_unique=True)
        extra = rng.permutation(remaining)[:rest]
        out[t] = is_pos[chosen].sum() + is_pos[extra].sum()
    return out


def _run(shard_fn, trials, seed):
    if trials < 1:
        raise ValueError("trials must be >= 1")
    sizes = _shard_sizes(trials)
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = root.spawn(len(sizes))
    total = 0.0
    total_sq = 0.0
    for size, child in zip(sizes, children):
        x = shard_fn(np.random.default_rng(child), size).astype(float)
        total += x.sum()
        total_sq += (x * x).sum()
    mean = total / trials
    if trials > 1:
        var = max(total_sq - trials * mean * mean, 0.0) / (trials - 1)
        se = math.sqrt(var / trials)
    else:
        se = 0.0
    return MCEstimate(mean=mean, se=se, trials=trials)


def simulate_policy(spec: PopulationSpec, trials: int, seed=0, explicit=False) -> MCEstimate:
    """Captured positives under model-guided intervention.

    Each trial treats ``min(c, flagged)`` flagged individuals picked uniformly,
    then spends any remaining budget uniformly without replacement on
    everyone not yet treated. ``explicit=True`` simulates individual
    permutations instead of hypergeometric draws (slow; small populations).
    """
    return _run(lambda rng, size: _policy_shard(spec, rng, size, explicit), trials, seed)


def simulate_uniform(spec: PopulationSpec, trials: int, seed=0) -> MCEstimate:
    """Captured positives when ``c`` individuals are drawn uniformly."""

    def shard(rng, size):
        return _hypergeom(rng, spec.alpha, spec.beta - spec.alpha, spec.c, size)

    return _run(shard, trials, seed)


def expected_policy_capture(spec: PopulationSpec) -> float:
    """Exact expectation of :func:`simulate_policy`, by direct enumeration."""
    c1 = min(spec.c, spec.flagged)
    rest = spec.c - c1
    if spec.flagged == 0:
        return spec.c * spec.alpha / spec.beta
    e1 = c1 * spec.tp / spec.flagged
    if rest == 0:
        return e1
    return e1 + rest * (spec.alpha - e1) / (spec.beta - c1)


def mc_ie(spec: PopulationSpec, trials: int, seed=0) -> MCEstimate:
    """Monte Carlo IE: simulated policy mean over exact uniform expectation."""
    if spec.alpha == 0 or spec.c == 0:
        raise ValueError("IE needs at least one positive and a positive budget")
    est = simulate_policy(spec, trials, seed)
    denom = spec.c * spec.alpha / spec.beta
    return MCEstimate(mean=est.mean / denom, se=est.se / denom, trials=trials)


def default_grid(n_specs=60, seed=0):
    """Feasible specs with integral budgets covering both regimes."""
    rng = np.random.default_rng(seed)
    specs = []
    while len(specs) < n_specs:
        beta = int(rng.choice([20, 50, 100, 200, 500, 1000]))
        alpha = int(rng.integers(1, beta + 1))
        flagged = int(rng.integers(0, beta + 1))
        lo = max(0, flagged - (beta - alpha))
        tp = int(rng.integers(lo, min(alpha, flagged) + 1))
        if len(specs) % 2 == 0 and flagged > 1:
            c = int(rng.integers(1, flagged))  # scarce
        else:
            c = int(rng.integers(max(flagged, 1), beta + 1))
        specs.append(PopulationSpec(beta, alpha, flagged, tp, c))
    return specs


def grid_report(specs, trials, seed=0):
    """One row per spec: closed-form IE, MC IE, SE and ``|delta| / SE``."""
    seeds = np.random.SeedSequence(seed).spawn(len(specs))
    rows = []
    for spec, child in zip(specs, seeds):
        formula = ie_counting(spec.counts, spec.gamma)
        est = mc_ie(spec, trials, child)
        delta = abs(est.mean - formula)
        z = delta / est.se if est.se > 0 else (0.0 if delta < 1e-9 else math.inf)
        rows.append(
            {**asdict(spec), "regime": spec.regime, "ie_formula": formula,
             "ie_mc": float(est.mean), "se": float(est.se), "z": float(z)}
        )
    return rows


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    if rows:
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()
