import numpy as np
import pytest

from snowdrift import io
from snowdrift.cli import main
from snowdrift.config import ConfigError, build_config, parse_coefficients, parse_kv


def run(capsys, *args):
    code = main(list(args))
    out, err = capsys.readouterr()
    return code, out, err


def test_verify_passes(capsys):
    code, out, _ = run(capsys, "verify", "--level", "2")
    assert code == 0
    assert out.strip().startswith("PASS")


def test_bad_config_exit_one(capsys, tmp_path):
    code, _, err = run(capsys, "mesh", "--level", "99", "--out", str(tmp_path))
    assert code == 1 and err.startswith("error: config")
    code, _, err = run(capsys, "mesh", "--bogus")
    assert code == 1
    cfg = tmp_path / "c.txt"
    cfg.write_text("level=2\nmystery=1\n")
    code, _, err = run(capsys, "mesh", "--config", str(cfg), "--out", str(tmp_path))
    assert code == 1 and "mystery" in err


@pytest.mark.parametrize("line", ["gamma1=0.6", "delta1=0.5"])
def test_assumption_violation_exit_two(capsys, tmp_path, line):
    cfg = tmp_path / "c.txt"
    cfg.write_text(f"level=1\nT=0.02\ndt=0.01\n{line}\n")
    code, _, err = run(capsys, "solve", "--config", str(cfg), "--out", str(tmp_path / "o"))
    assert code == 2
    assert err.startswith("error: assumption")


def test_mesh_outputs(capsys, tmp_path):
    for method in ("shell", "hexagon"):
        out = tmp_path / method
        assert run(capsys, "mesh", "--level", "2", "--method", method, "--out", str(out), "--svg")[0] == 0
        mesh = io.read_mesh(out / "mesh.snowmesh")
        assert len(mesh["boundary"]) == 3 * 4**3
        text = (out / "mesh_report.txt").read_text()
        assert "# level=2" in text and f"# method={method}" in text
        assert (out / "mesh.svg").read_text().startswith("<?xml")
    assert "components_step_2" in (tmp_path / "hexagon" / "mesh_report.txt").read_text()


def test_byte_identical_outputs(capsys, tmp_path):
    for name in ("a", "b"):
        assert run(capsys, "solve", "--level", "1", "--T", "0.03", "--dt", "0.01", "--u0", "x1",
                   "--forcing", "sin(2;x2)", "--out", str(tmp_path / name))[0] == 0
        assert run(capsys, "extend", "--level", "2", "--out", str(tmp_path / name))[0] == 0
    for f in ("trajectory.csv", "solve_report.txt", "extension.snowmesh", "extension_report.txt"):
        a, b = (tmp_path / "a" / f).read_bytes(), (tmp_path / "b" / f).read_bytes()
        assert a.replace(b"/a", b"/b") == b


def test_solve_constant_trajectory(capsys, tmp_path):
    assert run(capsys, "solve", "--level", "2", "--scheme", "cn", "--T", "0.05", "--dt", "0.01",
               "--u0", "constant(0.25)", "--out", str(tmp_path))[0] == 0
    rows = [ln for ln in (tmp_path / "trajectory.csv").read_text().splitlines() if not ln.startswith("#")]
    assert rows[0] == "time,node_id,value"
    vals = np.array([float(r.split(",")[2]) for r in rows[1:]])
    assert np.abs(vals - 0.25).max() < 1e-10
    report = (tmp_path / "solve_report.txt").read_text()
    assert "ventsell_max_defect=" in report and "alpha=" in report


def test_extend_report(capsys, tmp_path):
    assert run(capsys, "extend", "--level", "4", "--method", "shell", "--out", str(tmp_path))[0] == 0
    kv = parse_kv((tmp_path / "extension_report.txt").read_text())
    assert float(kv["boundary_error"]) == 0.0
    for k in (3, 4):
        assert 0.70 <= float(kv[f"shell_ratio_{k}_{k - 1}"]) <= 0.80
    data = io.read_mesh(tmp_path / "extension.snowmesh")
    assert data["values"] is not None and len(data["values"]) == len(data["nodes"])


def test_extend_with_boundary_csv(capsys, tmp_path):
    from snowdrift.geometry import boundary_graph
    g = boundary_graph(2)
    p = io.write_values(tmp_path / "f.csv", np.sin(2 * np.pi * g.arc / 3))
    assert run(capsys, "extend", "--level", "2", "--boundary-data", str(p), "--out", str(tmp_path))[0] == 0
    code, _, err = run(capsys, "extend", "--level", "3", "--boundary-data", str(p), "--out", str(tmp_path))
    assert code == 1 and err.startswith("error: config")


def test_export(capsys, tmp_path):
    assert run(capsys, "export", "--level", "2", "--out", str(tmp_path))[0] == 0
    kv = parse_kv((tmp_path / "energy_report.txt").read_text())
    assert float(kv["energy_K1"]) == pytest.approx(0.5)


def test_snowmesh_round_trip(tmp_path):
    from snowdrift.extension import angular_boundary_data, extend_hexagon
    r = extend_hexagon(angular_boundary_data(2), 2)
    p = io.write_mesh(tmp_path / "m.snowmesh", r.mesh, r.values, {"level": 2})
    d = io.read_mesh(p)
    assert np.array_equal(d["nodes"], r.mesh.nodes)
    assert np.array_equal(d["triangles"], r.mesh.triangles)
    assert np.array_equal(d["shell"], r.mesh.shell)
    assert np.array_equal(d["values"], r.values)
    link = r.mesh.boundary_link
    assert d["boundary"] == {i: int(link[i]) for i in np.flatnonzero(link >= 0)}


def test_config_precedence_and_echo():
    cfg = build_config("solve", {"level": "3", "dt": "0.02", "A": "diag(2,3)"}, {"level": 2, "dt": None})
    assert cfg.level == 2 and cfg.dt == 0.02
    assert cfg.echo()["coeff.A"] == "diag(2,3)"
    c = parse_coefficients(cfg.coefficients)
    assert np.array_equal(c.A, np.diag([2.0, 3.0]))
    with pytest.raises(ConfigError):
        parse_coefficients({"A": "diag(1)"})
    with pytest.raises(ConfigError):
        build_config("solve", {"theta": "0.3"}, {})
