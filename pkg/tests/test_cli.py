import json
import subprocess
import sys

import numpy as np
import pytest

from saddlecg import cli
from saddlecg.cli import main
from saddlecg.linalg import SparseMatrix
from saddlecg.mmio import read_history_csv, write_matrix_market


def test_run_writes_outputs(tmp_path, capsys):
    csv, js = tmp_path / "h.csv", tmp_path / "s.json"
    code = main(["run", "--example", "1", "--n", "40", "--out-csv", str(csv), "--out-json", str(js)])
    assert code == 0
    summary = json.loads(js.read_text())
    assert summary["status"] == "converged"
    assert len(read_history_csv(csv)) == summary["iterations"] + 1
    assert "converged" in capsys.readouterr().out


@pytest.mark.parametrize("solver", ["nspcg", "glsqr", "qmr", "lsqr"])
def test_matrix_file(tmp_path, solver):
    path = tmp_path / "eye.mtx"
    write_matrix_market(SparseMatrix.identity(10), path)
    assert main(["run", "--matrix", str(path), "--solver", solver]) == 0


@pytest.mark.parametrize("precond", ["exact", "iqr:0.01", "iqr"])
def test_preconditioners(precond):
    assert main(["run", "--example", "1", "--n", "30", "--precond", precond, "--tol", "1e-10"]) == 0


def test_maxit_exit(capsys):
    assert main(["run", "--example", "1", "--maxit", "2"]) == 2


def test_breakdown_exit():
    assert main(["run", "--example", "4", "--solver", "qmr"]) == 3


@pytest.mark.parametrize("status, code", [("converged", 0), ("maxit", 2), ("breakdown", 3), ("indefinite", 4)])
def test_status_to_exit_code(monkeypatch, status, code):
    # the admissible w keeps the shifted operator definite, so force each status
    real = cli.run_benchmark

    def fake(cfg, **kw):
        res = real(cfg, **kw)
        res.status = status
        res.summary["status"] = status
        return res

    monkeypatch.setattr(cli, "run_benchmark", fake)
    assert main(["run", "--example", "1", "--n", "10"]) == code


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["run"],
        ["run", "--example", "9"],
        ["run", "--example", "1", "--matrix", "x.mtx"],
        ["run", "--example", "1", "--precond", "iqr:abc"],
        ["run", "--example", "1", "--precond", "iqr:-1"],
        ["run", "--example", "2"],
        ["run", "--matrix", "/nonexistent/a.mtx"],
        ["run", "--example", "1", "--tol", "0"],
        ["run", "--example", "4", "--n", "50"],
        ["run", "--example", "1", "--safety", "0.5"],
        ["sweep"],
    ],
)
def test_usage_errors(argv, capsys):
    assert main(argv) == 1
    assert "bench: error:" in capsys.readouterr().err


def test_parse_error(tmp_path, capsys):
    path = tmp_path / "bad.mtx"
    path.write_text("%%MatrixMarket matrix coordinate real general\n2 2 1\n5 5 1\n")
    assert main(["run", "--matrix", str(path)]) == 1
    assert "line 3" in capsys.readouterr().err


def test_sweep(tmp_path):
    assert main(["sweep", "--out-dir", str(tmp_path), "--maxit", "20"]) == 0
    names = {p.name for p in tmp_path.iterdir()}
    assert "example1_n100_s1_nspcg_none_strict.csv" in names
    assert "example1_n100_s1_qmr_iqr0.01_strict.json" in names


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "saddlecg", "run", "--example", "3", "--n", "20"],
                         capture_output=True, text=True)
    assert out.returncode == 0
    assert "example3" in out.stdout
