import csv
import json

import pytest

from firkprec.cli import eval_fraction, main


def test_eval_fraction():
    assert eval_fraction("1/16") == 0.0625
    assert eval_fraction(" 0.5 ") == 0.5


def test_tableau_text(capsys):
    assert main(["tableau", "--stages", "2"]) == 0
    out = capsys.readouterr().out
    assert "Gauss-Legendre, s = 2" in out and "FAIL" not in out


def test_tableau_csv(capsys):
    main(["tableau", "--stages", "3", "--format", "csv"])
    rows = list(csv.DictReader(capsys.readouterr().out.splitlines()))
    assert sum(r["kind"] == "a" for r in rows) == 9
    c = [float(r["value"]) for r in rows if r["kind"] == "c"]
    assert abs(c[1] - 0.5) < 1e-15


def test_plan_json(tmp_path):
    out = tmp_path / "plan.json"
    assert main(["plan", "--stages", "3", "--precond", "BCSD", "--reverse-order", "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    assert data["name"] == "BCSD-R"
    assert set(data["core"]) == {"re", "im"}


def test_plan_csv(capsys):
    main(["plan", "--stages", "2", "--precond", "BRSD", "--format", "csv"])
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "matrix,i,j,re,im" and len(lines) == 1 + 4 + 4
    for line in lines[1:]:
        float(line.split(",")[3])


def test_solve_with_config_and_manifest(tmp_path):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text("n: 5\nstages: 2\ndt: 1/8\nsteps: 2\nprecond: BRSD\n")
    out, man = tmp_path / "steps.csv", tmp_path / "man.json"
    assert main(["solve", "--config", str(cfg), "--steps", "3", "--out", str(out),
                 "--manifest", str(man)]) == 0
    rows = list(csv.DictReader(out.read_text().splitlines()))
    assert len(rows) == 3 and rows[0]["converged"] == "True"
    m = json.loads(man.read_text())
    assert m["config"]["dt"] == 0.125 and m["config"]["steps"] == 3


def test_sweep_writes_timing_sidecar(tmp_path):
    out = tmp_path / "sweep.csv"
    assert main(["sweep", "--n", "5", "--stages", "2", "--steps", "2", "--preconds", "BRSD,BD",
                 "--dts", "1/8", "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 3
    assert (tmp_path / "sweep.csv.timings.csv").exists()


def test_converge(tmp_path, capsys):
    assert main(["converge", "--stages", "2", "--rtol", "1e-12", "--ladder", "5:1/4,11:1/8",
                 "--final-time", "0.5"]) == 0
    rows = list(csv.DictReader(capsys.readouterr().out.splitlines()))
    assert len(rows) == 2


def test_bad_config_reports_error(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"grid": 5}))
    assert main(["solve", "--config", str(cfg)]) == 1
    assert "unknown config keys" in capsys.readouterr().err


def test_unknown_subcommand():
    with pytest.raises(SystemExit):
        main(["nope"])
