import json
import subprocess
import sys

import numpy as np
import pytest

from koopgram.cli import run


@pytest.fixture
def work(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def load(path):
    return json.loads(path.read_text())


def test_simulate_rows(work):
    assert run(["simulate", "--system", "example1", "--x0", "0.3,0.3", "--T", "25",
                "--out", "traj.csv", "--quiet"]) == 0
    lines = (work / "traj.csv").read_text().splitlines()
    assert len(lines) == 27  # header plus 26 rows
    assert lines[0] == "t,x1,x2,y1,y2"


def test_simulate_negative_x0_and_config(work):
    assert run(["simulate", "--system", "example3", "--x0", "-0.2", "0.1", "--T", "5",
                "--out", "a.csv"]) == 0
    cfg = {"system": "example3", "x0": [-0.2, 0.1], "horizon": 5,
           "input": {"kind": "sin_ramp", "mu": 0.01}}
    (work / "cfg.json").write_text(json.dumps(cfg))
    assert run(["simulate", "--config", "cfg.json", "--out", "b.csv"]) == 0
    assert (work / "a.csv").read_bytes() == (work / "b.csv").read_bytes()


def test_pipeline_round_trip(work):
    for i, x0 in enumerate(["0.3,0.3", "-0.2,0.1", "0.1,-0.4"]):
        assert run(["simulate", "--system", "example3", "--x0", x0, "--T", "40",
                    "--out", f"t{i}.csv", "--quiet"]) == 0
    assert run(["fit", "--traj", "t0.csv", "t1.csv", "t2.csv",
                "--dict", '{"kind":"example1"}', "--input-dict", '{"kind":"sin_augmented"}',
                "--system", "example3", "--out", "model.json", "--seed", "4", "--quiet"]) == 0
    model = load(work / "model.json")
    assert model["meta"]["seed"] == 4
    assert np.array(model["K_x"]).shape == (12, 12)
    assert np.array(model["K_u"]).shape == (12, 2)
    for kind, out in (("obs", "xo.json"), ("ctrl", "xc.json")):
        assert run(["gramians", "--model", "model.json", "--kind", kind, "--horizon", "20",
                    "--out", out, "--seed", "4"]) == 0
        assert load(work / out)["seed"] == 4
    assert run(["gramians", "--model", "model.json", "--kind", "obs", "--horizon", "3",
                "--project", "state", "--normalize", "--out", "xp.json"]) == 0
    xp = load(work / "xp.json")
    assert xp["normalized"] and np.max(np.abs(xp["matrix"])) == 1.0
    assert run(["balance", "--model", "model.json", "--xc", "xc.json", "--xo", "xo.json",
                "--out", "bal.json", "--quiet"]) == 0
    bal = load(work / "bal.json")
    assert len(bal["hsv"]) == 12
    assert run(["reduce", "--bal", "bal.json", "--order", "2", "--out", "red.json"]) == 0
    red = load(work / "red.json")
    assert red["order"] == 2 and red["bound_lower"] <= red["bound_upper"]
    assert red["advisory_only"]
    assert (work / "red.json").read_text().endswith("\n")


def test_fit_without_system_regresses_outputs(work):
    run(["simulate", "--system", "example1", "--x0", "0.3,0.3", "--T", "30", "--out", "t.csv"])
    assert run(["fit", "--traj", "t.csv", "--dict",
                '{"kind":"monomial","max_degree":2}', "--out", "m.json"]) == 0
    W = np.array(load(work / "m.json")["W_h"])
    np.testing.assert_allclose(W, [[0, 0, 1, 0, 0], [0, 0, 0, 0, 1]], atol=1e-8)


def test_reduce_order_zero_is_usage_error(work, capsys):
    (work / "bal.json").write_text("{}")
    assert run(["reduce", "--bal", "bal.json", "--order", "0", "--out", "r.json"]) == 2
    assert "order" in capsys.readouterr().err


def test_missing_input_file(work, capsys):
    assert run(["reduce", "--bal", "nope.json", "--order", "2", "--out", "r.json"]) == 2
    assert "nope.json" in capsys.readouterr().err
    assert not (work / "r.json").exists()


def test_missing_output_directory(work):
    (work / "bal.json").write_text("{}")
    assert run(["reduce", "--bal", "bal.json", "--order", "1", "--out", "no/dir/r.json"]) == 2


def test_malformed_json_reports_position(work, capsys):
    (work / "bad.json").write_text('{\n  "type": \n}')
    assert run(["reduce", "--bal", "bad.json", "--order", "1", "--out", "r.json"]) == 2
    assert "line 3, column 1" in capsys.readouterr().err


def test_malformed_csv_reports_line(work, capsys):
    (work / "t.csv").write_text("t,x1,y1\n0,1.0,1.0\n1,zz,2.0\n")
    assert run(["fit", "--traj", "t.csv", "--dict", '{"kind":"monomial","max_degree":2}',
                "--out", "m.json"]) == 2
    assert "line 3" in capsys.readouterr().err


def test_unknown_flag_and_command():
    assert run(["simulate", "--bogus"]) == 2
    assert run(["frobnicate"]) == 2


def test_computational_error_exit_one(work, capsys):
    model = {"type": "koopman-model", "K_x": [[1.0, 0.0], [0.0, 0.5]], "K_u": [[1.0], [1.0]],
             "W_h": [[1.0, 0.0]]}
    (work / "m.json").write_text(json.dumps(model))
    assert run(["gramians", "--model", "m.json", "--kind", "obs", "--horizon", "inf",
                "--out", "g.json"]) == 1
    err = capsys.readouterr().err
    assert "spectral radius" in err and "finite horizon" in err


def test_reduce_order_too_large(work, capsys):
    model = {"type": "koopman-model", "K_x": [[0.5]], "K_u": [[1.0]], "W_h": [[1.0]]}
    (work / "m.json").write_text(json.dumps(model))
    run(["gramians", "--model", "m.json", "--kind", "obs", "--horizon", "inf", "--out", "o.json"])
    run(["gramians", "--model", "m.json", "--kind", "ctrl", "--horizon", "inf", "--out", "c.json"])
    assert run(["balance", "--model", "m.json", "--xc", "c.json", "--xo", "o.json",
                "--out", "b.json"]) == 0
    assert load(work / "b.json")["hsv"] == pytest.approx([4 / 3])
    assert run(["reduce", "--bal", "b.json", "--order", "3", "--out", "r.json"]) == 1
    assert "order must be in [1, 1]" in capsys.readouterr().err


def test_balance_rejects_swapped_gramians(work):
    model = {"type": "koopman-model", "K_x": [[0.5]], "K_u": [[1.0]], "W_h": [[1.0]]}
    (work / "m.json").write_text(json.dumps(model))
    run(["gramians", "--model", "m.json", "--kind", "obs", "--horizon", "5", "--out", "o.json"])
    assert run(["balance", "--model", "m.json", "--xc", "o.json", "--xo", "o.json",
                "--out", "b.json"]) == 2


def test_demo_example2(work):
    assert run(["demo", "--example", "2", "--out", "report.json", "--quiet"]) == 0
    rep = load(work / "report.json")
    chk = rep["checks"]["example2.linear_equivalence_maxdiff"]
    assert chk["passed"] and chk["value"] <= 1e-10
    assert chk["threshold"] == 1e-10 and chk["provenance"] == "oracle"
    assert rep["seed"] == 0 and rep["thresholds_version"]


def test_demo_threshold_override(work):
    assert run(["demo", "--example", "2", "--out", "r.json", "--quiet",
                "--threshold", "example2.linear_equivalence_maxdiff=1e-30"]) == 0
    chk = load(work / "r.json")["checks"]["example2.linear_equivalence_maxdiff"]
    assert chk["threshold"] == 1e-30 and not chk["passed"]
    assert run(["demo", "--example", "2", "--out", "r.json", "--threshold", "nope=1"]) == 2


def test_demo_csv_artifacts(work):
    (work / "csv").mkdir()
    assert run(["demo", "--example", "1", "--out", "r.json", "--csv-dir", "csv", "--quiet"]) == 0
    text = (work / "csv" / "example1_prediction.csv").read_text()
    assert text.startswith("t,") and text.endswith("\n")


def test_json_logs(work, capsys):
    assert run(["--json-logs", "demo", "--example", "2", "--out", "r.json"]) == 0
    first = capsys.readouterr().err.splitlines()[0]
    assert json.loads(first)["level"] == "INFO"


def test_module_entry_point(tmp_path):
    out = tmp_path / "t.csv"
    proc = subprocess.run([sys.executable, "-m", "koopgram", "simulate", "--system", "example1",
                           "--x0", "0.1,0.1", "--T", "3", "--out", str(out)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert len(out.read_text().splitlines()) == 5
