import json
import os
import subprocess
import sys

import pytest

from derham.cli import main
from derham.mesh import annulus_mesh, two_triangle_square


@pytest.fixture()
def square_path(tmp_path):
    path = tmp_path / "square.json"
    two_triangle_square().save(path)
    return str(path)


@pytest.fixture()
def annulus_path(tmp_path):
    path = tmp_path / "annulus.json"
    annulus_mesh().save(path)
    return str(path)


def test_tables_csv(square_path, capsys):
    rc = main(["tables", "--mesh", square_path, "--p", "3"])
    out = capsys.readouterr().out
    assert rc == 0
    lines = out.strip().split("\n")
    assert lines[0] == "r,k,p,label,local_dim,global_dim"
    cells = {tuple(l.split(",")[:2]): l.split(",") for l in lines[1:]}
    # r=1, k=2 cell is C(p+2,2) * F
    assert int(cells[("1", "2")][5]) == 10 * 2


def test_tables_p_range_json(square_path, capsys):
    rc = main(["tables", "--mesh", square_path, "--p-range", "3:4", "--format", "json"])
    assert rc == 0
    rows = json.loads(capsys.readouterr().out)
    assert {r["p"] for r in rows} == {3, 4}


def test_verify_pass(square_path, capsys):
    rc = main(["verify", "--mesh", square_path, "--row", "1", "--p", "1"])
    assert rc == 0
    data = json.loads(capsys.readouterr().out)
    assert data["pass"] is True


def test_verify_annulus_fails_without_betti(annulus_path, capsys):
    rc = main(["verify", "--mesh", annulus_path, "--row", "1", "--p", "1"])
    err = capsys.readouterr().err
    assert rc == 1
    assert "--betti" in err


def test_verify_annulus_with_betti(annulus_path):
    rc = main(["verify", "--mesh", annulus_path, "--row", "1", "--p", "1",
               "--betti", "1,1,0"])
    assert rc == 0


def test_verify_second_grade_row(square_path):
    rc = main(["verify", "--mesh", square_path, "--row", "2", "--p", "2"])
    assert rc == 0


def test_verify_corrupt_mesh(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    rc = main(["verify", "--mesh", str(bad), "--row", "1", "--p", "1"])
    assert rc == 2
    assert "cannot parse" in capsys.readouterr().err


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as exc:
        main(["verify", "--row", "1"])
    assert exc.value.code == 2


def test_element_report(capsys):
    rc = main(["element", "--r", "2", "--k", "1", "--dim", "3", "--p", "4"])
    out = capsys.readouterr().out
    assert rc == 0
    assert "local dimension 105" in out
    assert "unisolvent: True" in out


def test_element_invalid_family(capsys):
    rc = main(["element", "--r", "2", "--k", "0", "--dim", "2", "--p", "4"])
    assert rc == 2
    assert "p >= 5" in capsys.readouterr().err


def test_bc_report(square_path, capsys):
    rc = main(["bc", "--mesh", square_path, "--p", "4"])
    assert rc == 0
    data = json.loads(capsys.readouterr().out)
    assert data["V0"] == 4 and data["V0s"] == 0
    assert data["reduced_dims"] == data["formula_dims"]
    assert data["alternating_sum"] == 0


def test_bgg_report(square_path, capsys):
    rc = main(["bgg", "--mesh", square_path, "--p", "1"])
    assert rc == 0
    data = json.loads(capsys.readouterr().out)
    assert data["identity_residual"] < 1e-10
    assert data["xi"]["exact"] is True
    assert data["stress"]["interior_identity"] is True


def test_compare_grid(capsys):
    rc = main(["compare", "--p", "4", "--grid", "1,1,1", "--format", "json"])
    assert rc == 0
    data = json.loads(capsys.readouterr().out)
    assert data["per_tet_estimate_classical"] == 170.0
    assert data["per_tet_estimate_nodal"] == 30.5
    assert data["dim_classical"] == data["closed_classical"]


def test_export_dual_basis(capsys):
    rc = main(["export", "--r", "0", "--k", "0", "--dim", "2", "--p", "1"])
    out = capsys.readouterr().out
    assert rc == 0
    assert out.startswith("# form n=2 k=0 p=1")


def test_outputs_deterministic(square_path, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    main(["tables", "--mesh", square_path, "--p", "3", "--out", str(a)])
    main(["tables", "--mesh", square_path, "--p", "3", "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_env_tolerance(square_path, monkeypatch, capsys):
    monkeypatch.setenv("DERHAM_TOL", "1e-30")
    rc = main(["bgg", "--mesh", square_path, "--p", "1"])
    capsys.readouterr()
    assert rc == 1   # impossible tolerance makes the identity check fail


def test_console_script_entry_point(square_path):
    proc = subprocess.run(
        [sys.executable, "-m", "derham.cli", "verify", "--mesh", square_path,
         "--row", "1", "--p", "1"],
        capture_output=True, text=True)
    assert proc.returncode == 0
