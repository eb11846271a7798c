import json
import math
import os

import numpy as np
import pytest

from btl.cli import main, parse_weight


def run_cli(capsys, *args):
    code = main(list(args))
    out = capsys.readouterr().out
    return code, out


def test_constants_json(capsys):
    code, out = run_cli(capsys, "constants", "--n", "4", "--json")
    assert code == 0
    data = json.loads(out)
    assert list(data.keys()) == ["n", "alpha_n", "sphere_measure",
                                 "ball_volume", "gamma_n", "bubble_mass",
                                 "c1", "c2", "c3", "c4"]
    assert abs(data["c1"] - 26.3189) < 1e-3
    assert data["c1"] == data["c2"]


def test_constants_human_readable(capsys):
    code, out = run_cli(capsys, "constants", "--n", "5")
    assert code == 0
    assert "alpha_n" in out


def test_constants_rejects_bad_n(capsys):
    code, _ = run_cli(capsys, "constants", "--n", "2", "--json")
    assert code == 1


def test_unknown_command_is_config_error(capsys):
    assert main(["no-such-command"]) == 1


def test_critical_point_command(capsys):
    code, out = run_cli(capsys, "critical-point", "--n", "4", "--k", "3",
                        "--a0", "1", "--grad-a", "1,0,0,0", "--assert")
    assert code == 0
    data = json.loads(out)
    assert np.allclose(data["sigma0"][0], [1, 0, 0, 0])
    assert np.allclose(data["sigma0"][1], [0, 0, 0, 0])
    assert data["hessian_det"] != 0
    assert data["reduced_det"] == -7.0
    assert data["rel_grad_norm"] <= 1e-8


def test_project_command(tmp_path, capsys):
    grid = tmp_path / "grid.csv"
    rows = ["x1,x2,x3,x4"]
    rng = np.random.default_rng(0)
    for _ in range(5):
        x = 0.5 * rng.standard_normal(4)
        rows.append(",".join(repr(float(t)) for t in x))
    grid.write_text("\n".join(rows) + "\n")
    out_file = tmp_path / "proj.csv"
    code, _ = run_cli(capsys, "project", "--n", "4", "--radius", "1.0",
                      "--eps", "0.001", "--delta", "0.1",
                      "--grid-file", str(grid), "--out", str(out_file))
    assert code == 0
    lines = out_file.read_text().strip().splitlines()
    assert lines[0] == "x1,x2,x3,x4,U,PU,defect"
    assert len(lines) == 6
    vals = [float(t) for t in lines[1].split(",")]
    assert abs(vals[4] - vals[5] - vals[6]) < 1e-12  # defect = U - PU


def test_shoot_single_eps(tmp_path, capsys):
    out_file = tmp_path / "shoot.csv"
    code, _ = run_cli(capsys, "shoot", "--n", "4", "--k", "1",
                      "--eps", "0.05", "--out", str(out_file))
    assert code == 0
    lines = out_file.read_text().strip().splitlines()
    assert lines[0].startswith("eps,s,residual,energy")
    assert lines[-1].startswith("# summary:")


def test_shoot_grid_with_assert(tmp_path, capsys):
    out_file = tmp_path / "shoot2.csv"
    code, _ = run_cli(capsys, "shoot", "--n", "4", "--k", "1",
                      "--eps-grid", "0.05,0.02,0.01", "--out", str(out_file),
                      "--assert")
    assert code == 0
    text = out_file.read_text()
    summary = json.loads(text.strip().splitlines()[-1].split("summary: ")[1])
    assert summary["per_layer"][0]["gap"] <= 0.15
    assert "cross-check" in summary["caveat"]


def test_report_roundtrip(tmp_path, capsys):
    rep_file = tmp_path / "r.json"
    code, _ = run_cli(capsys, "lemma-check", "--item", "ii", "--n", "4",
                      "--k", "1", "--weight", "constant",
                      "--eps-grid", "1e-3", "--out", str(rep_file),
                      "--rtol", "1e-7")
    assert code == 0
    rep = json.loads(rep_file.read_text())
    assert rep["schema"] == 1
    assert rep["tool"] == "btl"
    assert "version" in rep and "config" in rep and "provenance" in rep
    code, out = run_cli(capsys, "report", "--in", str(rep_file))
    assert code == 0
    assert "lemma-check" in out


def test_reproducibility_byte_identical(tmp_path, capsys):
    f1, f2 = tmp_path / "a.json", tmp_path / "b.json"
    args = ["expansion", "--n", "4", "--k", "1", "--weight",
            "affine:0.75,0,0,0", "--eps-grid", "1e-3,3.16e-4,1e-4",
            "--rtol", "1e-7", "--seed", "11"]
    code1, _ = run_cli(capsys, *args, "--out", str(f1))
    code2, _ = run_cli(capsys, *args, "--out", str(f2))
    assert code1 == 0 and code2 == 0
    assert f1.read_bytes() == f2.read_bytes()


def test_expansion_assert_exit_code(tmp_path, capsys):
    f1 = tmp_path / "exp.json"
    code, _ = run_cli(capsys, "expansion", "--n", "4", "--k", "1",
                      "--weight", "affine:0.75,0,0,0",
                      "--eps-grid", "3.16e-4,1e-4,3.16e-5,1e-5",
                      "--out", str(f1), "--assert")
    assert code == 0
    rep = json.loads(f1.read_text())
    assert abs(rep["results"]["theta_hat"] - 2.0 / 3.0) <= 0.1


def test_parse_weight():
    w = parse_weight("constant:2.5", 4)
    assert w.value(np.zeros((1, 4)))[0] == 2.5
    w = parse_weight("affine:1,0,0,0", 4)
    assert w.value(np.ones((1, 4)))[0] == 2.0
    w = parse_weight("product:2", 4)
    assert w.value(2.0 * np.ones((1, 4)))[0] == 4.0
    from btl.cli import ConfigError
    with pytest.raises(ConfigError):
        parse_weight("fourier:1", 4)
    with pytest.raises(ConfigError):
        parse_weight("affine:1,2", 4)


def test_missing_grid_file_is_config_error(capsys):
    code, _ = run_cli(capsys, "project", "--n", "4", "--eps", "0.01",
                      "--delta", "0.1", "--grid-file", "/nonexistent.csv")
    assert code == 1
