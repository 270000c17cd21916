import csv
import io

import numpy as np
import pytest

from jumpfem.adapt import AdaptParams, run_adaptive
from jumpfem.cli import main
from jumpfem.io import CSV_COLUMNS, emit_csv, emit_vtk, run_fields
from jumpfem.mesh import rectangle_mesh, write_mesh
from jumpfem.problems import get_problem

HEADER = "level,ndof,h_max,eta,eta_r,eta_jn,eta_ju,osc,energy_err,dg_err,effectivity,seconds"


def test_one_level_csv():
    rec = run_adaptive(get_problem("flat"), AdaptParams(max_dofs=1))
    text = emit_csv(rec)
    lines = text.splitlines()
    assert lines[0] == HEADER == ",".join(CSV_COLUMNS)
    assert len(lines) == 2
    row = dict(zip(CSV_COLUMNS, lines[1].split(",")))
    assert int(row["level"]) == 0 and float(row["energy_err"]) > 0


def test_empty_error_fields():
    rec = run_adaptive(get_problem("checkerboard"), AdaptParams(max_dofs=200))
    rows = list(csv.DictReader(io.StringIO(emit_csv(rec))))
    assert len(rows) == len(rec.levels)
    for r in rows:
        assert r["energy_err"] == r["dg_err"] == r["effectivity"] == ""
        assert float(r["eta"]) > 0


def test_vtk_cell_count(tmp_path):
    rec = run_adaptive(get_problem("interface_manufactured"), AdaptParams(max_dofs=300))
    path = tmp_path / "out.vtk"
    emit_vtk(rec.mesh, run_fields(rec), path)
    text = path.read_text().splitlines()
    nt = rec.mesh.n_elements
    assert text[0].startswith("# vtk DataFile")
    assert f"CELLS {nt} {4 * nt}" in text
    assert f"CELL_TYPES {nt}" in text and f"CELL_DATA {nt}" in text
    for name in ("u_h", "eta_K", "alpha_K"):
        assert f"SCALARS {name} double 1" in text
    assert "SCALARS subdomain int 1" in text


def test_vtk_errors(tmp_path):
    m = rectangle_mesh(0, 1, 0, 1, 1, 1)
    with pytest.raises(ValueError):
        emit_vtk(m, {"bad": np.zeros(5)}, tmp_path / "x.vtk")
    with pytest.raises(OSError, match="no_such_dir"):
        emit_vtk(m, {}, tmp_path / "no_such_dir" / "x.vtk")


def test_cli_success(tmp_path, capsys):
    out = tmp_path / "run.csv"
    vtk = tmp_path / "run.vtk"
    code = main(["--problem", "interface_manufactured", "--jump-ratio", "100", "--method", "dg",
                 "--max-dofs", "800", "--out-csv", str(out), "--out-vtk", str(vtk)])
    assert code == 0
    assert out.read_text().splitlines()[0] == HEADER
    assert vtk.exists()


def test_cli_stdout(capsys):
    assert main(["--problem", "flat", "--refine", "uniform", "--max-dofs", "300"]) == 0
    assert capsys.readouterr().out.splitlines()[0] == HEADER


def test_cli_mesh_option(tmp_path, capsys):
    m = rectangle_mesh(-1, 1, -1, 1, 2, 2, lambda cx, cy: np.where(cx < 0, 1, 2))
    path = tmp_path / "mesh.txt"
    write_mesh(m, path)
    assert main(["--problem", "interface_manufactured", "--mesh", str(path), "--max-dofs", "200"]) == 0
    first = capsys.readouterr().out.splitlines()[1]
    assert first.split(",")[1] == str(len(m.interior_faces))


@pytest.mark.parametrize(
    "argv, msg",
    [
        (["--problem", "flat", "--mesh", "/nonexistent/mesh.txt"], "nonexistent"),
        (["--problem", "flat", "--out-csv", "/nonexistent/dir/x.csv", "--max-dofs", "10"], "nonexistent"),
        (["--problem", "kellogg", "--jump-ratio", "3"], "jump-ratio"),
        (["--problem", "flat", "--theta", "2"], "theta"),
        (["--problem", "flat", "--method", "dg", "--gamma", "-1", "--max-dofs", "10"], "gamma"),
    ],
)
def test_cli_errors(argv, msg, capsys):
    assert main(argv) != 0
    err = capsys.readouterr().err
    assert err.startswith("jumpfem: error:") and msg in err


def test_cli_bad_choice():
    with pytest.raises(SystemExit) as exc:
        main(["--problem", "unknown"])
    assert exc.value.code != 0


def test_cli_mesh_with_foreign_subdomains(tmp_path, capsys):
    m = rectangle_mesh(0, 1, 0, 1, 1, 1, lambda cx, cy: np.full_like(cx, 7, dtype=int))
    path = tmp_path / "m.txt"
    write_mesh(m, path)
    assert main(["--problem", "flat", "--mesh", str(path)]) == 1
    assert "subdomain" in capsys.readouterr().err


def test_module_entry_point():
    import subprocess
    import sys

    out = subprocess.run([sys.executable, "-m", "jumpfem", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "--problem" in out.stdout
