"""TOML experiment configuration."""

from __future__ import annotations

import os
import sys

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .experiments import RealConfig, SweepConfig, _grid
from .perturbation import PerturbationConfig
from .selection import Aggregator

ENV_VAR = "PVFKIT_CONFIG"

_SWEEP_KEYS = {"sizes", "mus", "mu_range", "sigmas", "gammas", "reps", "seed", "aggregator",
               "train_frac", "shuffle_pool"}
_REAL_KEYS = {"data", "target", "positive_label", "drop_columns", "missing_tokens",
              "drop_threshold", "impute_k", "expected_shape", "categorical", "sigmas",
              "gammas", "include_f1", "xi", "lambda", "subset_size", "n_folds",
              "n_candidates", "frac", "max_depth", "seed", "aggregator"}


class ConfigError(ValueError):
    pass


def load(path=None):
    """Parse a TOML config; falls back to ``$PVFKIT_CONFIG``. Returns ``{}`` if neither."""
    path = path or os.environ.get(ENV_VAR)
    if not path:
        return {}
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path, "rb") as fh:
        try:
            cfg = tomllib.load(fh)
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"{path}: {e}") from None
    cfg["_dir"] = os.path.dirname(os.path.abspath(path))
    return cfg


def _check_keys(section, allowed, name):
    extra = set(section) - allowed
    if extra:
        raise ConfigError(f"unknown keys in [{name}]: {sorted(extra)}")


def _perturbation_section(cfg):
    p = dict(cfg.get("perturbation", {}))
    try:
        return PerturbationConfig.from_dict(p)
    except (ValueError, TypeError) as e:
        raise ConfigError(f"[perturbation]: {e}") from None


def resolve_path(cfg, path):
    if path is None or os.path.isabs(path):
        return path
    return os.path.join(cfg.get("_dir", "."), path)


def sweep_config(cfg, **overrides) -> SweepConfig:
    s = dict(cfg.get("sweep", {}))
    _check_keys(s, _SWEEP_KEYS, "sweep")
    pert = _perturbation_section(cfg)
    kw = {}
    if "mu_range" in s:
        kw["mus"] = _grid(*s.pop("mu_range"))
    for key in ("sizes", "mus", "sigmas", "gammas"):
        if key in s:
            kw[key] = tuple(s[key])
    for key in ("reps", "seed"):
        if key in s:
            kw[key] = int(s[key])
    if "train_frac" in s:
        kw["train_frac"] = float(s["train_frac"])
    if "shuffle_pool" in s:
        kw["shuffle_pool"] = bool(s["shuffle_pool"])
    if "aggregator" in s:
        kw["aggregator"] = Aggregator.parse(s["aggregator"])
    if "perturbation" in cfg:
        kw["k"] = pert.k
        kw["n_sets"] = pert.n_sets
    kw.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return SweepConfig(**kw)
    except (ValueError, TypeError) as e:
        raise ConfigError(f"[sweep]: {e}") from None


def real_config(cfg, **overrides):
    """Returns ``(RealConfig, ingestion options)``."""
    s = dict(cfg.get("real", {}))
    _check_keys(s, _REAL_KEYS, "real")
    kw = {}
    for key in ("sigmas", "gammas"):
        if key in s:
            kw[key] = tuple(s[key])
    for key, cast in (("include_f1", bool), ("xi", float), ("subset_size", int),
                      ("n_folds", int), ("n_candidates", int), ("frac", float),
                      ("max_depth", int), ("seed", int)):
        if key in s:
            kw[key] = cast(s[key])
    if "lambda" in s:
        kw["lam"] = float(s["lambda"])
    if "aggregator" in s:
        kw["aggregator"] = Aggregator.parse(s["aggregator"])
    pert = cfg.get("perturbation", {})
    if "k" in pert:
        kw["k"] = int(pert["k"])
    if "m_sets" in pert:
        kw["n_sets"] = int(pert["m_sets"])
    kw.update({k: v for k, v in overrides.items() if v is not None})
    ingest = {
        "data": resolve_path(cfg, s.get("data")),
        "target": s.get("target"),
        "positive_label": s.get("positive_label"),
        "drop_columns": tuple(s.get("drop_columns", ())),
        "missing_tokens": frozenset(s.get("missing_tokens", ["?", ""])),
        "drop_threshold": float(s.get("drop_threshold", 0.5)),
        "impute_k": int(s.get("impute_k", 5)),
        "expected_shape": s.get("expected_shape"),
        "categorical": s.get("categorical", "auto"),
    }
    try:
        return RealConfig(**kw), ingest
    except (ValueError, TypeError) as e:
        raise ConfigError(f"[real]: {e}") from None


def perturbation_config(cfg, **overrides) -> PerturbationConfig:
    p = dict(cfg.get("perturbation", {}))
    for k, v in overrides.items():
        if v is not None:
            p[k] = v
    try:
        return PerturbationConfig.from_dict(p)
    except (ValueError, TypeError) as e:
        raise ConfigError(f"[perturbation]: {e}") from None
