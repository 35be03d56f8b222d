import json
import shutil
import subprocess

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from perfhom.cli import main
from perfhom.studies import (SCHEMA, StudyConfig, StudyError, default_config_path, dump_config, fit_rate,
                             load_config, read_records, run_config, run_study)

SMALL = """
[study:ki]
kind = kernel_identity
holes = circle:0.25, ellipse:0.3,0.2
etas = 0.1, 0.2
nodes = 64
tol.periodic_residual = 1e-6

[study:det]
kind = determinism
opt.target = ki
opt.workers = 1, 2
"""


# ---------------------------------------------------------------------------
# rate fits


def test_fit_rate_exact_power_law():
    xs = np.array([0.5, 0.25, 0.125, 0.0625])
    f = fit_rate(xs, 3 * xs ** 2)
    assert f.exponent == pytest.approx(2.0, abs=1e-12)
    assert f.coefficient == pytest.approx(3.0, rel=1e-12)
    assert f.r2 == pytest.approx(1.0, abs=1e-12)


def test_fit_rate_log_law():
    etas = np.array([1e-2, 1e-3, 1e-4, 1e-5])
    f = fit_rate(etas, 0.7 / np.abs(np.log(etas)), "log")
    assert f.exponent == pytest.approx(1.0, abs=1e-10)
    assert f.coefficient == pytest.approx(0.7, rel=1e-10)


def test_fit_rate_with_noise():
    rng = np.random.default_rng(7)
    xs = np.geomspace(1e-3, 1e-1, 12)
    ys = xs ** 0.5 * np.exp(rng.normal(0, 0.02, xs.size))
    assert fit_rate(xs, ys).exponent == pytest.approx(0.5, abs=0.05)


@given(st.floats(-3, 3), st.floats(0.1, 10))
@settings(max_examples=30, deadline=None)
def test_fit_rate_recovers_any_power(p, c):
    xs = np.geomspace(0.01, 0.5, 6)
    f = fit_rate(xs, c * xs ** p)
    assert f.exponent == pytest.approx(p, abs=1e-9)


@pytest.mark.parametrize("xs,ys,law", [([1, 2], [1, 2], "power"), ([1, 2, 3], [1, -2, 3], "power"),
                                        ([0.1, 1.0, 0.5], [1, 2, 3], "log"), ([1, 2, 3], [1, 2, 3], "exp")])
def test_fit_rate_rejects(xs, ys, law):
    with pytest.raises(ValueError):
        fit_rate(xs, ys, law)


# ---------------------------------------------------------------------------
# configs


def test_default_config_roundtrip():
    cfgs = load_config(default_config_path())
    assert [c.kind for c in cfgs] == ["kernel_identity", "jump_relations", "capacity", "cell_limit",
                                      "oracle_structure", "rates", "determinism"]
    assert load_config(dump_config(cfgs)) == cfgs
    jr = cfgs[1]
    assert jr.holes == ("circle:0.25", "ellipse:0.3,0.2")


@pytest.mark.parametrize("text,match", [
    ("[study:a]\nkind = rates\nregimes = super\neta_law.super = fixed:0.25\n", "epsilon list is empty"),
    ("[study:a]\nkind = kernel_identity\n", "eta list is empty"),
    ("[study:a]\nkind = nonsense\n", "unknown study kind"),
    ("[study:a]\nkind = kernel_identity\netas = 0.1\ncolour = red\n", "unknown key"),
    ("[study:a]\nkind = rates\nepsilons = 0.25\nregimes = super\n", "no eta_law"),
    ("[study:a]\nkind = capacity\nscales = 0.5, 2\n", "scale 1"),
    ("[other]\nkind = rates\n", "unexpected section"),
])
def test_config_rejections(text, match):
    with pytest.raises(StudyError, match=match):
        load_config(text)


def test_config_tolerance_and_option_lookup():
    cfg = StudyConfig("x", "kernel_identity", etas=(0.1,), tolerances={"a": 1e-3}, options={"grid": "64"})
    assert cfg.tol("a", 1.0) == 1e-3 and cfg.tol("b", 2.0) == 2.0
    assert cfg.opt("grid", 0) == 64 and cfg.opt("other", "z") == "z"


# ---------------------------------------------------------------------------
# runs


def test_small_study_writes_records_and_sidecar(tmp_path):
    res = run_config(SMALL, ["ki"], output=str(tmp_path))[0]
    assert res.passed
    rows = read_records(tmp_path / "ki.csv")
    assert len(rows) == 4 and all(r["status"] == "ok" for r in rows)
    assert rows[2]["hole"] == "ellipse:0.3,0.2" and rows[2]["eta"] == 0.1
    assert (tmp_path / "ki.csv").read_text().splitlines()[0] == SCHEMA
    side = json.loads((tmp_path / "ki.json").read_text())
    assert side["passed"] and len(side["wall_times"]) == 4
    assert "time" not in (tmp_path / "ki.csv").read_text().lower().split("# ")[0]


def test_failed_point_is_recorded_and_fails_the_study(tmp_path):
    cfg = load_config("[study:bad]\nkind = kernel_identity\nholes = circle:0.25\netas = 0.1, 3.0\nnodes = 64\n")[0]
    res = run_study(StudyConfig(**{**cfg.__dict__, "output": str(tmp_path)}))
    assert [r.status for r in res.records] == ["ok", "error"]
    assert not res.passed
    assert read_records(tmp_path / "bad.csv")[1]["message"].startswith("ValueError")


def test_records_identical_across_worker_counts(tmp_path):
    res = run_config(SMALL, ["det"], output=str(tmp_path))[0]
    assert res.passed
    assert all(r.values["max_difference"] == 0.0 and r.values["rows"] == 4 for r in res.records)


def test_unknown_study_name():
    with pytest.raises(StudyError):
        run_config(SMALL, ["nope"])


def test_read_records_rejects_foreign_csv(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        read_records(p)


# ---------------------------------------------------------------------------
# command line


def test_cli_kernel_basis(capsys):
    assert main(["kernel-basis", "--hole", "circle:0.25", "--nodes", "128"]) == 0
    out = capsys.readouterr().out
    assert "A_T = [ 1.736162" in out and "PASS" in out


def test_cli_cell(capsys):
    assert main(["cell", "--eta", "0.1", "--nodes", "128"]) == 0
    assert "M (classical)" in capsys.readouterr().out


def test_cli_errors_exit_with_status_two(capsys):
    assert main(["cell", "--eta", "0.5"]) == 2
    assert "error" in capsys.readouterr().err


def test_cli_study(tmp_path, capsys):
    cfg = tmp_path / "s.cfg"
    cfg.write_text(SMALL)
    assert main(["study", "--config", str(cfg), "--name", "ki", "--output", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "ki.csv").exists()
    assert "== ki (kernel_identity)" in capsys.readouterr().out


def test_cli_oracle_with_export(tmp_path, capsys):
    out = tmp_path / "u.grid"
    rc = main(["oracle", "--epsilon", "0.25", "--eta", "0.25", "--grid", "256", "--export", str(out)])
    assert rc == 0 and out.exists()
    assert "oscillating-test identity" in capsys.readouterr().out


@pytest.mark.skipif(shutil.which("perfhom") is None, reason="console script not installed")
def test_console_script_help():
    r = subprocess.run(["perfhom", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "kernel-basis" in r.stdout
