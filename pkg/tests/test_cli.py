import json
import subprocess
import sys

import pytest

from reebspiral.cli import SPECTRUM_HEADER, TRAJECTORY_HEADER, run
from reebspiral.export import read_csv


def test_validate(capsys):
    assert run(["validate", "--model", "heisenberg"]) == 0
    out = capsys.readouterr().out
    assert "status: ok" in out and "{h_X,h_Y}" in out


def test_validate_report_file(tmp_path):
    path = tmp_path / "report.txt"
    assert run(["validate", "--model", "s3", "--n", "20", "--out", str(path)]) == 0
    assert "model s3: 20 points" in path.read_text()


@pytest.mark.parametrize("argv", [
    [],
    ["frobnicate"],
    ["validate", "--model", "torus"],
    ["geodesic", "--bogus", "1"],
    ["geodesic", "--q0", "1,2"],
    ["spiral-scan", "--h0", "10,-20"],
    ["spiral-scan", "--h0", "10,20"],
    ["spectrum", "--kmin", "5", "--kmax", "3"],
    ["polyalg", "solve"],
])
def test_usage_errors_exit_1(argv, capsys):
    assert run(argv) == 1
    assert "usage:" in capsys.readouterr().err


def test_usage_error_lists_flags(capsys):
    assert run(["geodesic", "--bogus", "1"]) == 1
    err = capsys.readouterr().err
    assert "--model" in err and "--p0" in err


@pytest.mark.parametrize("argv", [
    ["geodesic", "--model", "heisenberg", "--p0", "0,0,-1", "--T", "1"],
    ["monodromy", "--model", "heisenberg", "--tau-max", "3"],
    ["polyalg", "solve", "--q", "1,0,1"],
    ["spiral-scan", "--model", "s3", "--h0", "2,4,8"],
])
def test_numerical_failures_exit_2(argv, capsys):
    assert run(argv) == 2
    assert "numerical failure" in capsys.readouterr().err


def test_geodesic_csv(tmp_path, capsys):
    out = tmp_path / "g.csv"
    assert run(["geodesic", "--model", "s3", "--h0", "8", "--T", "3", "--samples", "30",
                "--out", str(out)]) == 0
    cfg, header, rows = read_csv(out)
    assert tuple(header) == TRAJECTORY_HEADER and len(rows) == 31
    assert cfg["model"] == "s3" and cfg["T"] == 3.0 and "out" not in cfg
    assert abs(float(rows[-1][7]) - 1.0) < 1e-8
    summary = json.loads(capsys.readouterr().out)
    assert summary["samples"] == 31


def test_geodesic_is_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    argv = ["geodesic", "--model", "s3", "--h0", "12", "--T", "5"]
    assert run(argv + ["--out", str(a)]) == 0
    assert run(argv + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_reeb_orbit_and_svg(tmp_path, capsys):
    out, svg = tmp_path / "o.csv", tmp_path / "o.svg"
    assert run(["reeb-orbit", "--model", "s3", "--samples", "50", "--out", str(out),
                "--svg", str(svg)]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert abs(summary["period"] - 3.141592653589793) < 1e-8
    assert len(read_csv(out)[2]) == 51
    assert svg.read_text().startswith("<svg")


def test_monodromy_summary(capsys):
    assert run(["monodromy", "--model", "heisenberg-quotient"]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert abs(summary["alpha0"]) < 1e-7 and summary["rule"] == "curvature-corrected"


def test_monodromy_strain_free_rule(capsys):
    assert run(["monodromy", "--model", "s3", "--rule", "strain-free"]) == 0
    strain_free = json.loads(capsys.readouterr().out)
    assert run(["monodromy", "--model", "s3"]) == 0
    corrected = json.loads(capsys.readouterr().out)
    assert abs(strain_free["accumulated"] - 2 * corrected["accumulated"]) < 1e-6


def test_spectrum_flat(tmp_path, capsys):
    out = tmp_path / "spectrum.csv"
    assert run(["spectrum", "--model", "heisenberg-quotient", "--T0", "6.283185307", "--jmax", "2",
                "--kmin", "3", "--kmax", "5", "--out", str(out)]) == 0
    _, header, rows = read_csv(out)
    assert tuple(header) == SPECTRUM_HEADER and len(rows) == 6
    assert all(r[-1] == "converged" and float(r[4]) < 1e-6 for r in rows)


def test_config_file_and_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("model = heisenberg-quotient\nkmin = 3\nkmax = 5\n")
    out = tmp_path / "spectrum.csv"
    assert run(["spectrum", "--config", str(cfg), "--kmax", "4", "--out", str(out)]) == 0
    recorded, _, rows = read_csv(out)
    assert recorded["model"] == "heisenberg-quotient" and recorded["kmax"] == 4
    assert [r[1] for r in rows] == ["3", "4"]


def test_config_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("flux = 3\n")
    assert run(["spectrum", "--config", str(cfg)]) == 1
    assert "valid keys" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert run(["spectrum", "--config", str(tmp_path / "none.cfg")]) == 1


def test_adiabatic_scan_cli(tmp_path, capsys):
    out, fit = tmp_path / "a.csv", tmp_path / "fit.json"
    assert run(["adiabatic-scan", "--model", "heisenberg", "--h0", "10,20,40", "--out", str(out),
                "--fit", str(fit)]) == 0
    _, header, rows = read_csv(out)
    assert header == ["h0", "J0", "J_drift", "J_ratio"] and len(rows) == 3
    assert json.loads(fit.read_text())["bounded"] is True


def test_spiral_scan_flat_is_exact(capsys, tmp_path):
    svg = tmp_path / "scan.svg"
    assert run(["spiral-scan", "--model", "heisenberg", "--h0", "10,20,40", "--svg", str(svg)]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["pos"]["slope"] == "exact"


@pytest.mark.parametrize("argv,expected", [
    (["polyalg", "bracket", "--p", "1,0,0,0", "--q", "1,0,1"], ["0,6,0,0"]),
    (["polyalg", "aop", "--q", "0,1,0"], ["1,0,-1"]),
    (["polyalg", "decompose", "--q", "1,0,0"], ["1/2,0,-1/2", "1/2"]),
    (["polyalg", "solve", "--q", "1,0,-1"], ["0,1,0"]),
    (["polyalg", "solve", "--q", "1,0,-1", "--float"], ["0.0,1.0,0.0"]),
])
def test_polyalg_cli(argv, expected, capsys):
    assert run(argv) == 0
    assert capsys.readouterr().out.split() == expected


def test_console_script_version():
    res = subprocess.run([sys.executable, "-m", "reebspiral.cli", "--version"], capture_output=True,
                         text=True)
    assert res.returncode == 0 and "reebspiral" in res.stdout
