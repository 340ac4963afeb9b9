"""Command-line verbs, exit codes and output determinism."""
from __future__ import annotations

import json
import math
import subprocess
import sys

import pytest
import yaml

from chartrecon.cli import main
from chartrecon.reconstruct import load_table

BASE = {
    "family": {"tag": "interval", "eps": 0.1},
    "operator": "integration",
    "N": 8,
    "truth": [0.33, 0.71],
    "pairs": 200,
    "deficit_count": 50,
    "constants": {"C": 1.0, "L_FK": 1.0, "rho_basin": 0.3},
}


def write_config(tmp_path, name="cfg.yaml", **over):
    data = json.loads(json.dumps(BASE))
    for key, value in over.items():
        if isinstance(value, dict) and isinstance(data.get(key), dict):
            data[key].update(value)
        else:
            data[key] = value
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data))
    return str(path)


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


# -- symmdiff -------------------------------------------------------------------------


def test_symmdiff_identical_balls(capsys):
    code, out, _ = run(["symmdiff", "--c1", "0,0", "--r1", "1", "--c2", "0,0", "--r2", "1", "--samples", "1000"], capsys)
    head, row = out.strip().splitlines()
    rec = dict(zip(head.split(","), row.split(",")))
    assert code == 0 and float(rec["exact"]) == 0.0


def test_symmdiff_disjoint_disks(capsys):
    code, out, _ = run(["symmdiff", "--c1=-2,0", "--r1", "1", "--c2", "2,0", "--r2", "1",
                        "--samples", "100000", "--format", "json"], capsys)
    rec = json.loads(out)
    assert code == 0 and rec["exact"] == pytest.approx(2 * math.pi, rel=1e-15)
    assert abs(rec["mc"] - rec["exact"]) <= 4 * rec["stderr"]


def test_symmdiff_certificate(capsys):
    code, out, _ = run(["symmdiff", "--c1", "0.1,0.2", "--r1", "0.8", "--c2=-0.1,0.3", "--r2", "1.1",
                        "--A", "1", "--rho", "0.5", "--R", "1.5", "--samples", "1000", "--format", "json"], capsys)
    rec = json.loads(out)
    assert code == 0 and rec["bound_pass"] is True and rec["bound_lower"] <= rec["exact"] <= rec["bound_upper"]


def test_symmdiff_simplex(capsys):
    code, out, _ = run(["symmdiff", "--shape", "simplex", "--v1", "0.25,0.25,0.35,0.7,0.7,0.3",
                        "--v2", "0.26,0.24,0.36,0.71,0.69,0.31", "--samples", "20000", "--format", "json"], capsys)
    rec = json.loads(out)
    assert code == 0 and rec["exact"] <= rec["lipschitz_bound"]


def test_symmdiff_missing_arguments(capsys):
    code, _, err = run(["symmdiff", "--c1", "0,0"], capsys)
    assert code == 2 and "needs" in err


def test_symmdiff_inadmissible_certificate(capsys):
    code, _, _ = run(["symmdiff", "--c1", "0,0", "--r1", "3", "--c2", "0,0", "--r2", "1",
                      "--A", "1", "--rho", "0.5", "--R", "1.5", "--samples", "100"], capsys)
    assert code == 2


# -- argument and config errors -------------------------------------------------------------


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["frobnicate"],
        ["stability", "--seed", "-3"],
        ["stability", "--seed", str(2 ** 64)],
        ["stability", "--workers", "0"],
        ["stability", "--format", "xml"],
        ["counterexample", "--k", "a,b"],
    ],
)
def test_bad_arguments_exit_2(argv, capsys):
    with pytest.raises(SystemExit) as info:
        main(argv)
    assert info.value.code == 2


def test_bad_config_exit_2(tmp_path, capsys):
    path = tmp_path / "bad.yaml"
    path.write_text("family: {tag: interval, bogus: 1}\n")
    code, _, err = run(["stability", "--config", str(path)], capsys)
    assert code == 2 and "unknown keys" in err
    code, _, _ = run(["stability", "--config", str(tmp_path / "missing.yaml")], capsys)
    assert code == 2


def test_counterexample_domain_errors(capsys):
    assert run(["counterexample", "--which", "sin", "--k", "0"], capsys)[0] == 2
    assert run(["counterexample", "--which", "weight", "--t", "1.5"], capsys)[0] == 2
    assert run(["counterexample", "--which", "weight", "--alpha", "2"], capsys)[0] == 2


# -- counterexample -------------------------------------------------------------------


def test_counterexample_table(capsys, tmp_path):
    code, out, _ = run(["counterexample", "--out", str(tmp_path)], capsys)
    lines = out.strip().splitlines()
    assert code == 0 and lines[0] == "example,param,alpha,value,reference"
    sin = [ln.split(",") for ln in lines[1:] if ln.startswith("sin")]
    assert float(sin[0][3]) == pytest.approx(1 / math.pi, rel=1e-14)
    weight = [ln.split(",") for ln in lines[1:] if ln.startswith("weight") and ln.split(",")[2] == "1"]
    values = [float(r[3]) for r in weight]
    assert values == sorted(values, reverse=True)
    assert all(float(r[3]) <= float(r[4]) for r in weight)
    assert (tmp_path / "counterexample.csv").read_text() == out


# -- stability and find-n --------------------------------------------------------------


def test_stability_identity(tmp_path, capsys):
    cfg = write_config(tmp_path, operator="identity", alpha=1.0)
    code, out, _ = run(["stability", "--config", cfg, "--out", str(tmp_path / "o")], capsys)
    doc = json.loads((tmp_path / "o" / "stability.json").read_text())
    assert code == 0 and doc["unprojected"]["C_hat"] == pytest.approx(1.0, abs=1e-10)
    assert doc["config"]["pairs"] == 200


def test_stability_csv(tmp_path, capsys):
    cfg = write_config(tmp_path)
    code, _, _ = run(["stability", "--config", cfg, "--out", str(tmp_path), "--format", "csv"], capsys)
    rows = (tmp_path / "stability.csv").read_text().splitlines()
    assert code == 0 and rows[0] == "key,value"
    assert any(r.startswith("unprojected.C_hat,") for r in rows)


def test_find_n(tmp_path, capsys):
    cfg = write_config(tmp_path, delta=0.05, deficit_count=200)
    code, out, _ = run(["find-n", "--config", cfg, "--out", str(tmp_path)], capsys)
    doc = json.loads((tmp_path / "find_n.json").read_text())
    assert code == 0 and doc["N_star"] == 64 and "N*=64" in out


def test_find_n_exhausted_exit_3(tmp_path, capsys):
    cfg = write_config(tmp_path, delta=1e-9)
    code, _, err = run(["find-n", "--config", cfg, "--out", str(tmp_path)], capsys)
    doc = json.loads((tmp_path / "find_n.json").read_text())
    assert code == 3 and doc["N_star"] is None and len(doc["deficits"]) == 6
    assert "never reached" in err


# -- reconstruct and table -----------------------------------------------------------------


def test_reconstruct_outputs(tmp_path, capsys):
    cfg = write_config(tmp_path)
    out = tmp_path / "o"
    code, stdout, _ = run(["reconstruct", "--config", cfg, "--out", str(out)], capsys)
    rep = json.loads((out / "reconstruction.json").read_text())
    assert code == 0 and rep["converged"] and "termination=converged" in stdout
    assert (out / "trajectory.csv").read_text().startswith("k,h0,h1,residual,error,chart_error\n")
    assert (out / "measurement.csv").exists()


def test_reconstruct_is_byte_identical(tmp_path, capsys):
    cfg = write_config(tmp_path)
    for d in ("a", "b"):
        assert run(["reconstruct", "--config", cfg, "--out", str(tmp_path / d)], capsys)[0] == 0
    for name in ("reconstruction.json", "trajectory.csv", "measurement.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_blind_mode_round_trip(tmp_path, capsys):
    cfg = write_config(tmp_path)
    run(["reconstruct", "--config", cfg, "--out", str(tmp_path / "syn")], capsys)
    blind = write_config(tmp_path, "blind.yaml", truth=None, measurement_file=str(tmp_path / "syn" / "measurement.csv"))
    code, _, _ = run(["reconstruct", "--config", blind, "--out", str(tmp_path / "blind")], capsys)
    syn = json.loads((tmp_path / "syn" / "reconstruction.json").read_text())
    bl = json.loads((tmp_path / "blind" / "reconstruction.json").read_text())
    assert code == 0 and bl["final"] == syn["final"] and bl["truth"] is None


def test_reconstruct_not_converged_exit_1(tmp_path, capsys):
    cfg = write_config(tmp_path, stop={"max_iters": 2})
    assert run(["reconstruct", "--config", cfg, "--out", str(tmp_path)], capsys)[0] == 1


def test_reconstruct_divergence_exit_5(tmp_path, capsys):
    cfg = write_config(tmp_path, constants={"mu_step": 1e6}, stop={"divergence_factor": 1.0})
    code, _, err = run(["reconstruct", "--config", cfg, "--out", str(tmp_path)], capsys)
    assert code == 5 and "residual grew" in err
    assert (tmp_path / "trajectory.csv").exists()


def test_lattice_cap_exit_2(tmp_path, capsys):
    cfg = write_config(tmp_path, lattice={"max_points": 10})
    code, _, err = run(["reconstruct", "--config", cfg, "--out", str(tmp_path)], capsys)
    assert code == 2 and "cap" in err


def test_table_and_no_initial_guess(tmp_path, capsys):
    cfg = write_config(tmp_path)
    code, out, _ = run(["table", "--config", cfg, "--out", str(tmp_path / "t")], capsys)
    table_path = tmp_path / "t" / "lattice_table.csv"
    assert code == 0 and len(load_table(table_path)) > 100
    # a much larger C shrinks the threshold below what the coarse table can meet
    strict = write_config(tmp_path, "strict.yaml", truth=[0.3337, 0.7113], constants={"C": 1000.0},
                          lattice={"table_file": str(table_path)})
    code, _, err = run(["reconstruct", "--config", strict, "--out", str(tmp_path / "r")], capsys)
    assert code == 4 and "underestimated" in err


def test_table_worker_invariance(tmp_path, capsys):
    cfg = write_config(tmp_path)
    for w in ("1", "4"):
        assert run(["table", "--config", cfg, "--workers", w, "--out", str(tmp_path / w)], capsys)[0] == 0
    assert (tmp_path / "1" / "lattice_table.csv").read_bytes() == (tmp_path / "4" / "lattice_table.csv").read_bytes()


def test_workers_from_environment(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("CHARTRECON_WORKERS", "3")
    cfg = write_config(tmp_path)
    assert run(["table", "--config", cfg, "--out", str(tmp_path)], capsys)[0] == 0
    # an unparsable value falls back to one worker
    monkeypatch.setenv("CHARTRECON_WORKERS", "many")
    assert run(["table", "--config", cfg, "--out", str(tmp_path)], capsys)[0] == 0


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "chartrecon", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for verb in ("symmdiff", "stability", "find-n", "reconstruct", "table", "counterexample"):
        assert verb in res.stdout
