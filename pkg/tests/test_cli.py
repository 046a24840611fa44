import csv
import json
import os

import numpy as np
import pytest

from canham import ambient, assembly, cli
from canham.ldsolutions import LDSolution


def run(argv, capsys):
    code = cli.main(argv)
    return code, capsys.readouterr().out


@pytest.fixture(scope="module")
def built_m2(tmp_path_factory):
    out = tmp_path_factory.mktemp("build")
    code = cli.main(["build", "--m", "2", "--tau", "1e-4", "--out", str(out)])
    return code, out


def test_build_m2_certified(built_m2):
    code, out = built_m2
    assert code == 0
    rep = json.loads((out / "energy_m2_tau0.0001.json").read_text())
    assert rep["verdict"] == "W<8π: certified"
    assert rep["W_minus_8pi"] < 0
    assert abs(rep["W_minus_8pi"]) >= 10 * rep["error"]
    assert rep["topology"]["genus"] == 1
    for name in ("ld_m2.json", "surface_m2_tau0.0001.obj", "surface_m2_tau0.0001_r3.ply"):
        assert (out / name).exists()


def test_build_is_reproducible(built_m2, tmp_path):
    _, first = built_m2
    assert cli.main(["build", "--m", "2", "--tau", "1e-4", "--out", str(tmp_path)]) == 0
    for name in ("energy_m2_tau0.0001.json", "ld_m2.json", "surface_m2_tau0.0001.obj", "surface_m2_tau0.0001_r3.ply"):
        assert (first / name).read_bytes() == (tmp_path / name).read_bytes()


def test_build_inadmissible_exits_2(tmp_path, capsys):
    code, text = run(["build", "--m", "3", "--tau", "1e-2", "--out", str(tmp_path)], capsys)
    assert code == 2
    err = json.loads(text.strip().splitlines()[-1])
    assert err["exit_code"] == 2
    assert "admissibility" in err["message"]
    assert not list(tmp_path.iterdir())


def test_build_m1_is_a_sphere(tmp_path):
    assert cli.main(["build", "--m", "1", "--tau", "1e-4", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "energy_m1_tau0.0001.json").read_text())
    assert rep["topology"]["euler_characteristic"] == 2
    assert rep["topology"]["genus"] == 0


def test_config_file_and_flag_override(tmp_path):
    conf = tmp_path / "run.cfg"
    conf.write_text("# comment\nm = 3\ntau = 3e-4  # inline\nn-ring = 24\n")
    args = cli.build_parser().parse_args(["build", "--config", str(conf), "--tau", "1e-4"])
    cfg = cli.resolve_config("build", args)
    assert cfg.m == 3
    assert cfg.tau == 1e-4
    assert cfg.mesh.n_ring == 24


def test_config_file_errors(tmp_path, capsys):
    conf = tmp_path / "bad.cfg"
    conf.write_text("colour = red\n")
    code, text = run(["build", "--config", str(conf), "--out", str(tmp_path)], capsys)
    assert code == 2
    assert "unknown key" in json.loads(text)["message"]


def test_help_shows_defaults(capsys):
    with pytest.raises(SystemExit):
        cli.main(["build", "--help"])
    text = capsys.readouterr().out
    assert "(default: 0.0001)" in text
    assert "(default: 2)" in text


def test_sweep_defaults_relaxed():
    cfg = cli.resolve_config("sweep", cli.build_parser().parse_args(["sweep"]))
    assert not cfg.strict
    with pytest.raises(cli.AdmissibilityError):
        cli.resolve_config("build", cli.build_parser().parse_args(["build", "--tau", "1e-3"]))


@pytest.mark.parametrize("target", ["1.0", "0", "-0.2"])
def test_solve_v_rejects_target(tmp_path, capsys, target):
    code, text = run(["solve-v", "--target-v", target, "--out", str(tmp_path)], capsys)
    assert code == 2
    assert "v must lie in (0,1)" in json.loads(text)["message"]


@pytest.mark.parametrize("target", [0.7, 0.99])
def test_solve_v_m3(tmp_path, target):
    argv = ["solve-v", "--m", "3", "--tau", "1e-4", "--target-v", str(target), "--out", str(tmp_path)]
    assert cli.main(argv) == 0
    rep = json.loads((tmp_path / f"isoperimetric_m3_tau0.0001_v{target:g}.json").read_text())
    assert abs(rep["v"] - target) < 1e-3
    assert rep["genus"] == 2
    assert rep["W_source"] == "chart (conformal invariance)"


@pytest.fixture(scope="module")
def sweep(tmp_path_factory):
    out = tmp_path_factory.mktemp("sweep")
    code = cli.main(["sweep", "--m", "2", "--out", str(out)])
    with open(out / "sweep_m2.csv") as fh:
        rows = list(csv.DictReader(fh))
    fit = json.loads((out / "sweep_m2_fit.json").read_text())["fit"]
    return code, rows, fit, out


def test_sweep_outputs(sweep):
    code, rows, fit, out = sweep
    assert code == 0
    assert [float(r["tau"]) for r in rows] == [1e-3, 3e-4, 1e-4]
    assert all(r["status"] == "ok" for r in rows)
    assert (out / "sweep_m2.gp").exists()
    assert fit["n"] == 3
    v = [float(r["v"]) for r in rows]
    assert v[0] > v[1] > v[2]


def test_sweep_margin_ratio(sweep):
    _, rows, _, _ = sweep
    for r in rows[1:]:
        assert 0.25 <= float(r["margin_ratio"]) <= 4.0


def test_sweep_energy_below_8pi(sweep):
    _, rows, fit, _ = sweep
    assert fit["all_negative"], [r["W_minus_8pi"] for r in rows]


def test_verify_quick_subset(tmp_path, capsys):
    code, text = run(["verify", "--quick", "--only", "1", "3", "--out", str(tmp_path)], capsys)
    assert code == 0
    assert "2/2 criteria passed" in text
    rep = json.loads((tmp_path / "verify.json").read_text())
    assert rep["passed"] and rep["quick"]
    assert "runtime" not in rep["criteria"][0]


def test_verify_reports_corrupted_artifact(built_m2, tmp_path, capsys):
    _, out = built_m2
    good = out / "ld_m2.json"
    data = json.loads(good.read_text())
    bad = tmp_path / "ld_bad.json"
    text = json.dumps(data).replace(repr(data["c0"]), repr(data["c0"] + 1e-9), 1)
    bad.write_text(text)
    argv = ["verify", "--only", "3", "--ld-artifact", str(good), "--ld-artifact", str(bad), "--out", str(tmp_path)]
    code, text = run(argv, capsys)
    assert code == 1
    assert f"[PASS] artifact {good}" in text
    assert f"[FAIL] artifact {bad}" in text


def test_export_mesh_round_trip(tmp_path):
    argv = ["export-mesh", "--m", "2", "--format", "ply", "--space", "r3", "--out", str(tmp_path)]
    assert cli.main(argv) == 0
    mesh = assembly.read_ply(str(tmp_path / "surface_m2_tau0.0001_r3.ply"))
    s = mesh.summary()
    assert s["genus"] == 1 and s["watertight"] and s["oriented"]
    built = assembly.build_surface(assembly.SurfaceSpec(2, 1e-4))
    direct = ambient.stereographic_project(assembly.mesh_surface(built))
    np.testing.assert_array_equal(mesh.vertices, direct.vertices)
    np.testing.assert_array_equal(mesh.faces, direct.faces)


def test_ld_solve(tmp_path):
    assert cli.main(["ld-solve", "--m", "3", "--out", str(tmp_path)]) == 0
    sol = LDSolution.load(os.path.join(tmp_path, "ld_m3.json"))
    assert abs(sol.c0 - 0.9506938556659) < 1e-6
