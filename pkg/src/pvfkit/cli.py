"""Command-line entry point: ``pvfkit <command> [options]``.

Commands
--------
ie      Intervention Efficiency from confusion counts or a predictions file.
oracle  Closed-form IE against a Monte Carlo simulation over a grid of populations.
select  PVF and single-split selection on one dataset with a candidate pool.
synth   Synthetic model-selection sweep.
real    Subset/fold protocol on a real dataset.
report  Rebuild summaries and SVG plots from sweep/real CSVs.

Exit status is 0 on success, 1 on invalid input and 2 on runtime failure.
The default config file is taken from ``$PVFKIT_CONFIG`` when ``--config``
is not given.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
import tempfile
from collections import defaultdict

import numpy as np

from . import __version__
from . import config as cfgmod
from .data import drop_and_impute, ingest_csv, standard_scale, stratified_split
from .experiments import (
    ConfigResult,
    csv_to_rows,
    real_summary,
    rows_to_csv,
    run_real_protocol,
    run_sweep,
    sensitivity_report,
    sign_test,
    sweep_summary,
)
from .metrics import (
    ConfusionCounts,
    IEInputs,
    MetricSpec,
    NoPositivesError,
    confusion,
    ie_counting,
    ie_ratio,
)
from .models import logistic_pair_pool, tree_subsample_pool
from .oracle import default_grid, grid_report
from .oracle import rows_to_csv as oracle_csv
from .selection import Aggregator, pvf_select, traditional_select
from .svg import line_plot, stacked_bar_plot

log = logging.getLogger("pvfkit")

SWEEP_FIELDS = ["n", "mu", "sigma", "metric", "reps", "c_pvf", "c_trad", "d", "pvf_only",
                "trad_only", "mcnemar_p", "ttest_p", "retries"]
REAL_FIELDS = ["subset", "fold", "metric", "sigma", "pvf_index", "trad_index",
               "pvf_external", "trad_external", "outcome"]


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def write_atomic(path, text):
    """Write ``text`` to ``path`` via a temporary file in the same directory."""
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _require_file(path, what):
    if path is None:
        raise UsageError(f"{what} is required")
    if not os.path.isfile(path):
        raise UsageError(f"{what} not found: {path}")
    return path


# --- ie ---------------------------------------------------------------------


def _read_predictions(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        if "prediction" not in fields or "label" not in fields:
            raise UsageError(f"{path}: need 'prediction' and 'label' columns")
        pred, lab = [], []
        for lineno, row in enumerate(reader, start=2):
            try:
                pred.append(int(float(row["prediction"])))
                lab.append(int(float(row["label"])))
            except (TypeError, ValueError):
                raise UsageError(f"{path}:{lineno}: non-numeric prediction or label") from None
    pred, lab = np.array(pred), np.array(lab)
    if not (np.isin(pred, (0, 1)).all() and np.isin(lab, (0, 1)).all()):
        raise UsageError(f"{path}: predictions and labels must be 0/1")
    return confusion(pred, lab)


def cmd_ie(args, cfg):
    if args.predictions:
        counts = _read_predictions(_require_file(args.predictions, "predictions file"))
    else:
        if None in (args.tp, args.fp, args.fn, args.tn):
            raise UsageError("give --tp --fp --fn --tn or --predictions")
        counts = ConfusionCounts(args.tp, args.fp, args.tn, args.fn)
    if counts.positives == 0:
        raise NoPositivesError("no positives: IE is undefined when prevalence is zero")
    if args.form == "ratio":
        value = ie_ratio(IEInputs.from_counts(counts, args.gamma))
    else:
        value = ie_counting(counts, args.gamma)
    print(repr(float(value)))
    return 0


# --- oracle -----------------------------------------------------------------


def cmd_oracle(args, cfg):
    o = cfg.get("oracle", {})
    n_specs = args.specs if args.specs is not None else int(o.get("specs", 60))
    trials = args.trials if args.trials is not None else int(o.get("trials", 100_000))
    seed = args.seed if args.seed is not None else int(o.get("seed", 0))
    if n_specs < 1 or trials < 2:
        raise UsageError("need --specs >= 1 and --trials >= 2")
    rows = grid_report(default_grid(n_specs, seed), trials, seed)
    out = _out_dir(args, cfg)
    path = os.path.join(out, "oracle.csv")
    write_atomic(path, oracle_csv(rows))
    worst = max(r["z"] for r in rows)
    print(f"{len(rows)} specs, {trials} trials each, max |delta|/SE = {worst:.3f} -> {path}")
    return 0


# --- select -----------------------------------------------------------------


def _load_dataset(path, target, positive_label, drop_columns=(), drop_threshold=0.5, k=5,
                  expected_shape=None):
    table = ingest_csv(path, target, positive_label=positive_label, drop_columns=drop_columns)
    return drop_and_impute(table, drop_threshold, k, expected_shape=expected_shape)


def cmd_select(args, cfg):
    s = cfg.get("select", {})
    data = args.data or cfgmod.resolve_path(cfg, s.get("data"))
    _require_file(data, "--data")
    target = args.target or s.get("target", "label")
    positive = args.positive_label if args.positive_label is not None else s.get("positive_label")
    pool_kind = args.pool or s.get("pool", "logistic")
    metric = MetricSpec.parse(args.metric or s.get("metric", "f1"))
    agg = Aggregator.parse(args.aggregator or s.get("aggregator", "q0.25"))
    seed = args.seed if args.seed is not None else int(s.get("seed", 0))
    train_frac = float(s.get("train_frac", 0.7))
    pcfg = cfgmod.perturbation_config(cfg, sigma=args.sigma, xi=args.xi, **{"lambda": args.lam},
                                      k=args.k, m_sets=args.m_sets, seed=seed)
    ds = _load_dataset(data, target, positive)
    train, val = stratified_split(ds, train_frac, seed=[seed, 1])
    if val.n_positive == 0:
        raise NoPositivesError("no positives in the validation split")
    train, val = standard_scale(train, val)
    if pool_kind == "logistic":
        pool = logistic_pair_pool(train.X, train.y, seed=[seed, 2])
    elif pool_kind == "tree":
        pool = tree_subsample_pool(train.X, train.y, int(s.get("n_candidates", 100)),
                                   float(s.get("frac", 0.7)), int(s.get("max_depth", 4)),
                                   seed=[seed, 2])
    else:
        raise UsageError(f"unknown pool {pool_kind!r}")
    pvf = pvf_select(pool, val.X, val.y, metric, pcfg, agg, val.schema)
    trad = traditional_select(pool, val.X, val.y, metric)
    out = _out_dir(args, cfg)
    write_atomic(os.path.join(out, "selection_pvf.csv"), pvf.to_csv())
    write_atomic(os.path.join(out, "selection_trad.csv"), trad.to_csv())
    print(f"pvf:  {pvf.chosen_index} {pvf.descriptors[pvf.chosen_index]}"
          f"{' (tie)' if pvf.tie else ''}")
    print(f"trad: {trad.chosen_index} {trad.descriptors[trad.chosen_index]}"
          f"{' (tie)' if trad.tie else ''}")
    return 0


# --- synth / real / report --------------------------------------------------


def _out_dir(args, cfg):
    return args.out or cfgmod.resolve_path(cfg, cfg.get("output", {}).get("dir")) or "."


def _write_sweep_outputs(results, out):
    write_atomic(os.path.join(out, "sweep.csv"),
                 rows_to_csv([r.row() for r in results], SWEEP_FIELDS))
    sens = sensitivity_report(results)
    write_atomic(os.path.join(out, "sensitivity.csv"), rows_to_csv(sens))
    by = defaultdict(dict)
    for r in sens:
        by[(r["n"], r["band"])].setdefault(r["metric"], ([], []))
        xs, ys = by[(r["n"], r["band"])][r["metric"]]
        xs.append(r["sigma"])
        ys.append(r["mean_d"])
    for (n, band), series in by.items():
        svg = line_plot(series, f"mean d, n={n}, {band} separability", "sigma", "mean d",
                        logx=all(x > 0 for xy in series.values() for x in xy[0]))
        write_atomic(os.path.join(out, f"sensitivity_n{n}_{band}.svg"), svg)
    by_metric = defaultdict(list)
    for r in results:
        by_metric[r.metric].append(r)
    for metric, rs in sweep_summary(results).items():
        w, l_, p = sign_test(by_metric[metric])
        print(f"{metric:>8}: {rs:5.1f}% configs with d>0; sign test {w}/{l_} p={p:.3g}")


def _results_from_csv(text):
    rows = csv_to_rows(text)
    missing = set(SWEEP_FIELDS) - set(rows[0] if rows else SWEEP_FIELDS)
    if missing:
        raise UsageError(f"sweep CSV lacks columns {sorted(missing)}")
    try:
        return [ConfigResult(int(r["n"]), float(r["mu"]), float(r["sigma"]), r["metric"],
                             int(r["reps"]), int(r["c_pvf"]), int(r["c_trad"]),
                             int(r["pvf_only"]), int(r["trad_only"]), int(r["retries"]))
                for r in rows]
    except ValueError as e:
        raise UsageError(f"malformed sweep CSV: {e}") from None


def cmd_synth(args, cfg):
    c = cfgmod.sweep_config(cfg, reps=args.reps, seed=args.seed,
                            sigmas=tuple(args.sigma) if args.sigma else None,
                            gammas=tuple(args.gamma) if args.gamma else None)
    results = run_sweep(c, jobs=args.jobs)
    _write_sweep_outputs(results, _out_dir(args, cfg))
    return 0


def _write_real_outputs(rows, out):
    write_atomic(os.path.join(out, "real.csv"), rows_to_csv(rows, REAL_FIELDS))
    summ = real_summary(rows)
    write_atomic(os.path.join(out, "real_summary.csv"), rows_to_csv(summ))
    by = defaultdict(list)
    for r in summ:
        by[r["metric"]].append(r)
    for metric, rs in by.items():
        cats = [f"{r['sigma']:g}" for r in rs]
        stacks = {k: [r[f"{k}_pct"] for r in rs] for k in ("pvf", "trad", "tie")}
        name = metric.replace(":", "")
        write_atomic(os.path.join(out, f"real_{name}.svg"),
                     stacked_bar_plot(cats, stacks, f"external comparison, {metric}"))
    for r in summ:
        print(f"{r['metric']:>7} sigma={r['sigma']:<7g} pvf {r['pvf_pct']:5.1f}%  "
              f"trad {r['trad_pct']:5.1f}%  tie {r['tie_pct']:5.1f}%")


def cmd_real(args, cfg):
    c, ing = cfgmod.real_config(cfg, seed=args.seed,
                                sigmas=tuple(args.sigma) if args.sigma else None,
                                gammas=tuple(args.gamma) if args.gamma else None)
    data = args.data or ing["data"]
    _require_file(data, "--data")
    target = args.target or ing["target"]
    if not target:
        raise UsageError("--target (or [real] target) is required")
    positive = args.positive_label if args.positive_label is not None else ing["positive_label"]
    table = ingest_csv(data, target, ing["missing_tokens"], positive, ing["drop_columns"])
    ds = drop_and_impute(table, ing["drop_threshold"], ing["impute_k"], ing["categorical"],
                         ing["expected_shape"])
    print(f"dataset: {ds.X.shape[0]} rows x {ds.X.shape[1]} features, "
          f"{ds.n_positive} positive")
    rows = run_real_protocol(ds, c, jobs=args.jobs)
    _write_real_outputs(rows, _out_dir(args, cfg))
    return 0


def cmd_report(args, cfg):
    if not args.sweep and not args.real:
        raise UsageError("give --sweep and/or --real")
    out = _out_dir(args, cfg)
    if args.sweep:
        with open(_require_file(args.sweep, "--sweep")) as fh:
            _write_sweep_outputs(_results_from_csv(fh.read()), out)
    if args.real:
        with open(_require_file(args.real, "--real")) as fh:
            rows = csv_to_rows(fh.read())
        if not rows or set(REAL_FIELDS) - set(rows[0]):
            raise UsageError("real CSV is empty or lacks columns")
        for r in rows:
            r["sigma"] = float(r["sigma"])
            if r["outcome"] not in ("pvf", "trad", "tie"):
                raise UsageError(f"bad outcome {r['outcome']!r}")
        _write_real_outputs(rows, out)
    return 0


# --- parser -----------------------------------------------------------------


def _common(p, seed=True, out=True, jobs=False):
    p.add_argument("--config", help=f"TOML config file (default: ${cfgmod.ENV_VAR})")
    if seed:
        p.add_argument("--seed", type=int, help="master seed")
    if out:
        p.add_argument("--out", help="output directory (default: [output] dir or .)")
    if jobs:
        p.add_argument("--jobs", type=int, default=1,
                       help="worker processes; output does not depend on it (default: 1)")


def build_parser():
    ap = _Parser(prog="pvfkit", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ie", help="compute Intervention Efficiency")
    for name in ("tp", "fp", "fn", "tn"):
        p.add_argument(f"--{name}", type=int, help=f"{name.upper()} count")
    p.add_argument("--predictions", help="CSV with 0/1 columns 'prediction' and 'label'")
    p.add_argument("--gamma", type=float, required=True, help="intervention capacity in (0, 1]")
    p.add_argument("--form", choices=("counting", "ratio"), default="counting",
                   help="exact counting form or floating ratio form (default: counting)")
    _common(p, seed=False, out=False)
    p.set_defaults(func=cmd_ie)

    p = sub.add_parser("oracle", help="Monte Carlo check of the IE formula")
    p.add_argument("--specs", type=int, help="number of population specs (default: 60)")
    p.add_argument("--trials", type=int, help="simulations per spec (default: 100000)")
    _common(p)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("select", help="PVF and traditional selection on one dataset")
    p.add_argument("--data", help="input CSV")
    p.add_argument("--target", help="target column (default: label)")
    p.add_argument("--positive-label", help="value of the target meaning positive")
    p.add_argument("--pool", choices=("logistic", "tree"), help="candidate pool (default: logistic)")
    p.add_argument("--metric", help="f1, accuracy or ie:<gamma> (default: f1)")
    p.add_argument("--aggregator", help="q<level>, mean or median (default: q0.25)")
    p.add_argument("--sigma", type=float, help="numeric noise sd")
    p.add_argument("--xi", type=float, help="categorical change probability")
    p.add_argument("--lambda", dest="lam", type=float, help="ordinal distance decay")
    p.add_argument("--k", type=int, help="replicas per validation row")
    p.add_argument("--m-sets", type=int, help="number of perturbed sets")
    _common(p)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("synth", help="synthetic selection sweep")
    p.add_argument("--reps", type=int, help="repetitions per configuration")
    p.add_argument("--sigma", type=float, action="append", help="sigma grid value (repeatable)")
    p.add_argument("--gamma", type=float, action="append", help="IE gamma value (repeatable)")
    _common(p, jobs=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("real", help="real-data subset/fold protocol")
    p.add_argument("--data", help="input CSV")
    p.add_argument("--target", help="target column")
    p.add_argument("--positive-label", help="value of the target meaning positive")
    p.add_argument("--sigma", type=float, action="append", help="sigma grid value (repeatable)")
    p.add_argument("--gamma", type=float, action="append", help="IE gamma value (repeatable)")
    _common(p, jobs=True)
    p.set_defaults(func=cmd_real)

    p = sub.add_parser("report", help="summaries and SVG plots from result CSVs")
    p.add_argument("--sweep", help="sweep.csv from synth")
    p.add_argument("--real", help="real.csv from real")
    _common(p, seed=False)
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if getattr(args, "jobs", 1) is not None and getattr(args, "jobs", 1) < 1:
            raise UsageError("--jobs must be >= 1")
        cfg = cfgmod.load(args.config)
        return args.func(args, cfg)
    except SystemExit as e:  # --help / --version
        return int(e.code or 0)
    except (UsageError, ValueError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except Exception as e:  # noqa: BLE001
        log.debug("runtime failure", exc_info=True)
        print(f"runtime error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
