import csv

import pytest

from cosserat_msmfe.cli import main
from cosserat_msmfe.mesh import build_structured_square, write_msh
from cosserat_msmfe.study import OUTPUT_ENV


def test_mesh_info_default(capsys):
    assert main(["mesh-info"]) == 0
    out = capsys.readouterr().out
    assert "BDM1-P0: dof_full=" in out and "RT1-P1: requires --barycentric" in out


def test_mesh_info_barycentric_3d(capsys):
    assert main(["mesh-info", "--dim", "3", "--barycentric", "--scheme", "RT1-P1"]) == 0
    out = capsys.readouterr().out
    assert "RT1-P1: dof_full=" in out and "BDM1-P0" not in out


def test_mesh_info_from_file(tmp_path, capsys):
    p = tmp_path / "m.msh"
    write_msh(build_structured_square(3), p)
    assert main(["mesh-info", "--file", str(p), "--scheme", "BDM1-P0"]) == 0
    assert main(["mesh-info", "--file", str(tmp_path / "missing.msh")]) == 2


def test_run_writes_csv(tmp_path, capsys):
    rc = main(["run", "--levels", "3,6", "--output-dir", str(tmp_path), "--name", "t", "--format", "csv"])
    assert rc == 0
    rows = list(csv.reader((tmp_path / "t.csv").open()))
    assert len(rows) == 3 and rows[1][0] == "BDM1-P0"
    assert "wrote" in capsys.readouterr().out


def test_run_uses_env_dir(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "env"))
    assert main(["run", "--levels", "3,6", "--format", "markdown"]) == 0
    assert list((tmp_path / "env").glob("*.md"))


def test_run_bad_config_exit_code(tmp_path, capsys):
    assert main(["run", "--levels", "4,8", "--output-dir", str(tmp_path)]) == 2
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour = blue\n")
    assert main(["run", str(bad)]) == 2
    assert main(["run", str(tmp_path / "missing.cfg")]) == 2
    assert "error" in capsys.readouterr().err


def test_run_unwritable_dir(tmp_path):
    blocker = tmp_path / "f"
    blocker.write_text("")
    assert main(["run", "--levels", "3", "--output-dir", str(blocker / "sub")]) == 1


def test_verify_subset(capsys):
    assert main(["verify", "11"]) == 0
    out = capsys.readouterr().out
    assert "[PASS] criterion 11" in out and "1/1 criteria passed" in out


def test_argument_errors():
    with pytest.raises(SystemExit):
        main(["run", "--scheme", "BDM2"])
    with pytest.raises(SystemExit):
        main([])
