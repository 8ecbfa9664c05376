import csv
import hashlib
import io
import json
import subprocess
import sys

import pytest

from nbsc.cli import fmt, main, table1_rows
from nbsc.de import DeConfig


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_coeffs_json(capsys):
    code, out, _ = run(capsys, "coeffs", "--m", "2", "--format", "json")
    assert code == 0
    data = json.loads(out)
    assert data["V"][1][1][0] == pytest.approx(2 / 3)
    assert data["oracle"] == {"checked": True, "mismatches": 0}


def test_coeffs_binary_csv(capsys):
    code, out, _ = run(capsys, "coeffs", "--m", "1")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 8
    r = next(r for r in rows if (r["i"], r["j"], r["k"]) == ("1", "1", "1"))
    assert float(r["V"]) == 1.0 and float(r["C"]) == 1.0


def test_coeffs_oracle_cap(capsys):
    code, _, err = run(capsys, "coeffs", "--m", "5")
    assert code == 2 and "--skip-oracle" in err
    code, out, _ = run(capsys, "coeffs", "--m", "5", "--skip-oracle", "--format", "json")
    assert code == 0 and json.loads(out)["oracle"] == {"checked": False}


def test_argument_errors(capsys):
    assert run(capsys, "threshold", "--dv", "3", "--dc", "3", "--m", "1")[0] == 2
    assert run(capsys, "threshold", "--dv", "3")[0] == 2
    assert run(capsys, "bogus")[0] == 2
    assert run(capsys, "potential", "--dv", "3", "--dc", "6", "--m", "1")[0] == 2
    code, _, err = run(capsys, "potential-threshold", "--dv", "3", "--dc", "6", "--m", "8")
    assert code == 2 and "--allow-slow" in err


def test_threshold_csv_and_determinism(capsys):
    args = ("threshold", "--dv", "3", "--dc", "6", "--m", "1", "--tol", "1e-4")
    code, out1, _ = run(capsys, *args)
    _, out2, _ = run(capsys, *args)
    assert code == 0 and out1 == out2
    row = next(csv.DictReader(io.StringIO(out1)))
    assert float(row["eps_bp"]) == pytest.approx(0.4294, abs=2e-4)


def test_nonconvergence_exit_code(capsys):
    code, out, err = run(capsys, "de-run", "--dv", "3", "--dc", "6", "--m", "2", "--eps", "0.45",
                         "--max-iters", "3")
    assert code == 4 and "did not converge" in err
    assert out.splitlines()[0] == "iteration,x_1,x_2"
    assert len(out.splitlines()) == 5


def test_coupled_profile_export(capsys):
    code, out, _ = run(capsys, "de-run", "--dv", "3", "--dc", "6", "--m", "2", "--eps", "0.45",
                       "--L", "8", "--w", "3", "--profile-every", "10")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert list(rows[0]) == ["iteration", "position", "max_tail", "x_1", "x_2"]
    assert {int(r["position"]) for r in rows} == set(range(1, 11))


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# defaults\ndv = 3\ndc = 6\nm = 1\ntol = 1e-3\n")
    code, out, _ = run(capsys, "threshold", "--config", str(cfg))
    assert code == 0
    assert next(csv.DictReader(io.StringIO(out)))["dc"] == "6"
    code, out, _ = run(capsys, "threshold", "--config", str(cfg), "--dc", "9")
    assert next(csv.DictReader(io.StringIO(out)))["dc"] == "9"
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour = blue\n")
    assert run(capsys, "threshold", "--config", str(bad))[0] == 2


def test_manifest(tmp_path, capsys):
    out = tmp_path / "t.json"
    argv = ["potential-threshold", "--dv", "3", "--dc", "6", "--m", "1", "--format", "json",
            "--tol", "1e-4", "--out", str(out), "--seed", "7"]
    assert run(capsys, *argv)[0] == 0
    first = out.read_bytes()
    manifest = json.loads((tmp_path / "t.json.manifest.json").read_text())
    assert manifest["output_sha256"] == hashlib.sha256(first).hexdigest()
    assert manifest["seed"] == 7 and manifest["command"] == "potential-threshold"
    assert manifest["tolerances"]["bisect_tol"] == 1e-4
    data = json.loads(first)
    assert data["eps_star"] == pytest.approx(0.48815, abs=1e-3)
    assert data["D"] == [[1.0]]
    assert run(capsys, *argv)[0] == 0
    assert out.read_bytes() == first


def test_potential_sweep_reports_inf(capsys):
    code, out, _ = run(capsys, "potential", "--dv", "3", "--dc", "6", "--m", "1",
                       "--eps", "0.40,0.47", "--tol", "1e-4")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [r["eps"] for r in rows] == ["0.4", "0.47"]
    assert rows[0]["delta_E"] == "inf"
    assert float(rows[1]["delta_E"]) > 0


def test_potential_json_schema(capsys):
    code, out, _ = run(capsys, "potential", "--dv", "3", "--dc", "6", "--m", "2",
                       "--eps", "0.46:0.48:0.01", "--format", "json", "--tol", "1e-3")
    assert code == 0
    data = json.loads(out)
    assert len(data["reports"]) == 3
    assert set(data["reports"][0]) >= {"eps", "fixed_points", "U_values", "delta_E", "eps_star",
                                       "eps_bp"}


def test_k_bound(capsys):
    code, out, _ = run(capsys, "k-bound", "--dv", "3", "--dc", "6", "--m", "1", "--eps", "0.47",
                       "--format", "json")
    assert code == 0
    rep = json.loads(out)
    assert rep["K"] >= 0 and rep["w_min"] > 0 and "entrywise" in rep["norm"]
    code, _, _ = run(capsys, "k-bound", "--dv", "3", "--dc", "6", "--m", "1", "--eps", "0.495")
    assert code == 2


def test_table1_timeout_cells():
    header, rows = table1_rows([(3, 6)], [1], 100, 3, DeConfig(bisect_tol=1e-3), timeout=0.0)
    assert header == ["ensemble", "dv", "dc", "rate", "eps_bp_m1", "eps_map_ref", "shannon_gap_m1"]
    assert rows[0][4] == "TIMEOUT" and rows[0][6] == "TIMEOUT"


def test_table1_small(capsys):
    code, out, _ = run(capsys, "table1", "--ensembles", "3,6", "--m-list", "1", "--L", "30",
                       "--tol", "1e-3")
    assert code == 0
    row = next(csv.DictReader(io.StringIO(out)))
    assert row["ensemble"] == "(3,6)"
    eps = float(row["eps_bp_m1"])
    assert 0.4294 < eps < 0.5
    assert float(row["shannon_gap_m1"]) == pytest.approx(0.5 - eps, abs=1e-9)


def test_fmt():
    assert fmt(1 / 3) == "0.3333333333"
    assert fmt(float("inf")) == "inf"
    assert fmt(3) == "3" and fmt("TIMEOUT") == "TIMEOUT"


def test_console_entry_point():
    r = subprocess.run([sys.executable, "-m", "nbsc.cli", "coeffs", "--m", "1", "--format", "json"],
                       capture_output=True, text=True)
    assert r.returncode == 0
    assert json.loads(r.stdout)["m"] == 1
