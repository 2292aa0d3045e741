import csv
import os
import subprocess
import sys

import pytest

from pvfkit.cli import main

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
FIX = os.path.join(ROOT, "tests", "fixtures")

SWEEP_TOML = """
[sweep]
sizes = [50]
mus = [2.5]
sigmas = [0.1]
gammas = [0.1]
reps = 3

[perturbation]
k = 3
m_sets = 10
"""


def run(*argv):
    return main([str(a) for a in argv])


def test_ie_prints_value(capsys):
    assert run("ie", "--tp", 100, "--fp", 100, "--fn", 100, "--tn", 700, "--gamma", 0.3) == 0
    assert capsys.readouterr().out.strip() == "1.875"


def test_ie_no_positives(capsys):
    assert run("ie", "--tp", 0, "--fp", 0, "--fn", 0, "--tn", 10, "--gamma", 0.5) == 1
    assert "no positives" in capsys.readouterr().err


def test_ie_from_predictions(tmp_path, capsys):
    p = tmp_path / "pred.csv"
    p.write_text("prediction,label\n" + "1,1\n" * 100 + "1,0\n" * 100 + "0,1\n" * 100
                 + "0,0\n" * 700)
    assert run("ie", "--predictions", p, "--gamma", 0.3, "--form", "ratio") == 0
    assert float(capsys.readouterr().out) == pytest.approx(1.875, abs=1e-12)


@pytest.mark.parametrize("argv", [
    ["ie", "--tp", "1", "--gamma", "0.3"],
    ["ie", "--tp", "1", "--fp", "0", "--fn", "0", "--tn", "1", "--gamma", "2"],
    ["ie", "--bogus", "1", "--gamma", "0.3"],
    ["nosuch"],
    ["ie", "--predictions", "/does/not/exist.csv", "--gamma", "0.3"],
    ["synth", "--config", "/does/not/exist.toml"],
])
def test_validation_errors_exit_1(argv):
    assert main(argv) == 1


def test_malformed_config(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("[sweep\nreps = ")
    assert run("synth", "--config", bad) == 1
    bad.write_text("[sweep]\nunknown_key = 3\n")
    assert run("synth", "--config", bad) == 1


def test_help_exits_zero(capsys):
    assert main(["synth", "--help"]) == 0
    out = capsys.readouterr().out
    for flag in ("--config", "--seed", "--reps", "--out", "--jobs", "--sigma", "--gamma"):
        assert flag in out


def test_synth_byte_identical(tmp_path):
    cfg = tmp_path / "sweep.toml"
    cfg.write_text(SWEEP_TOML)
    outs = []
    for i, jobs in enumerate((1, 1, 2)):
        out = tmp_path / f"o{i}"
        assert run("synth", "--config", cfg, "--reps", 1, "--seed", 7, "--out", out,
                   "--jobs", jobs) == 0
        outs.append({f: (out / f).read_bytes() for f in ("sweep.csv", "sensitivity.csv")})
    assert outs[0] == outs[1] == outs[2]
    rows = list(csv.DictReader(open(tmp_path / "o0" / "sweep.csv")))
    assert len(rows) == 2 and {r["metric"] for r in rows} == {"ie:0.1", "f1acc"}
    assert not [f for f in os.listdir(tmp_path / "o0") if f.startswith(".tmp")]


def test_env_var_config(tmp_path, monkeypatch):
    cfg = tmp_path / "sweep.toml"
    cfg.write_text(SWEEP_TOML + '\n[output]\ndir = "envout"\n')
    monkeypatch.setenv("PVFKIT_CONFIG", str(cfg))
    assert run("synth", "--reps", 1) == 0
    assert (tmp_path / "envout" / "sweep.csv").exists()


def test_oracle_csv(tmp_path):
    assert run("oracle", "--specs", 4, "--trials", 2000, "--out", tmp_path) == 0
    rows = list(csv.DictReader(open(tmp_path / "oracle.csv")))
    assert len(rows) == 4
    assert {"beta", "alpha", "flagged", "tp", "c", "ie_formula", "ie_mc", "se", "z"} <= set(rows[0])
    float(rows[0]["ie_mc"])


def test_select(tmp_path, capsys):
    assert run("select", "--data", os.path.join(FIX, "breast_cancer.csv"), "--target",
               "diagnosis", "--positive-label", "M", "--pool", "tree", "--metric", "ie:0.1",
               "--sigma", 0.2, "--m-sets", 5, "--out", tmp_path) == 0
    for name in ("selection_pvf.csv", "selection_trad.csv"):
        rows = list(csv.DictReader(open(tmp_path / name)))
        assert len(rows) == 100
        assert sum(int(r["chosen"]) for r in rows) == 1
    assert "pvf:" in capsys.readouterr().out


def test_real_and_report(tmp_path):
    cfg = tmp_path / "real.toml"
    cfg.write_text(f"""
[real]
data = "{os.path.join(FIX, 'breast_cancer.csv')}"
target = "diagnosis"
positive_label = "M"
sigmas = [0.3]
gammas = [0.1]
include_f1 = false
n_candidates = 6

[perturbation]
m_sets = 4
""")
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("real", "--config", cfg, "--out", a) == 0
    assert run("real", "--config", cfg, "--out", b, "--jobs", 2) == 0
    assert (a / "real.csv").read_bytes() == (b / "real.csv").read_bytes()
    assert (a / "real_ie0.1.svg").exists()
    rep = tmp_path / "rep"
    assert run("report", "--real", a / "real.csv", "--out", rep) == 0
    assert (rep / "real_summary.csv").read_bytes() == (a / "real_summary.csv").read_bytes()


def test_report_from_sweep(tmp_path):
    cfg = tmp_path / "sweep.toml"
    cfg.write_text(SWEEP_TOML)
    out = tmp_path / "s"
    assert run("synth", "--config", cfg, "--out", out) == 0
    rep = tmp_path / "r"
    assert run("report", "--sweep", out / "sweep.csv", "--out", rep) == 0
    assert (rep / "sensitivity.csv").read_bytes() == (out / "sensitivity.csv").read_bytes()
    assert (rep / "sensitivity_n50_high.svg").read_text().startswith("<svg")


def test_report_needs_input():
    assert run("report") == 1


def test_console_script_entry_point():
    r = subprocess.run([sys.executable, "-m", "pvfkit.cli", "ie", "--tp", "100", "--fp", "100",
                        "--fn", "100", "--tn", "700", "--gamma", "0.3"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.strip() == "1.875"


def test_runtime_failure_exit_2(tmp_path, monkeypatch):
    import pvfkit.cli as cli

    def boom(*a, **k):
        raise RuntimeError("worker died")

    monkeypatch.setattr(cli, "run_sweep", boom)
    cfg = tmp_path / "sweep.toml"
    cfg.write_text(SWEEP_TOML)
    assert run("synth", "--config", cfg, "--out", tmp_path) == 2
    assert not (tmp_path / "sweep.csv").exists()
