import json
import subprocess
import sys

import numpy as np
import pytest

from sparsecov import cli
from sparsecov.cli import EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, main, parse_grid, read_data_csv, read_matrix_csv
from sparsecov.core import sample_covariance
from sparsecov.errors import InputError, NotPositiveDefiniteError
from sparsecov.fdr import pattern_from_json
from sparsecov.synth import TruthSpec, gen_sparse_spd, sample_gaussian


def write_csv(path, Y, header=True):
    """``Y`` is p x n; the file gets one row per sample."""
    p = Y.shape[0]
    lines = [",".join(f"x{k}" for k in range(p))] if header else []
    lines += [",".join(repr(float(v)) for v in row) for row in Y.T]
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture
def sparse_csv(tmp_path):
    truth = gen_sparse_spd(TruthSpec(p=8, sparsity=0.6, seed=21))
    Y = sample_gaussian(truth, 120, seed=22)
    return write_csv(tmp_path / "data.csv", Y), Y


def test_estimate_contract(tmp_path, sparse_csv, capsys):
    path, Y = sparse_csv
    out = tmp_path / "out"
    code = main(["estimate", "--alpha", "0.05", "--solver", "bcd", str(path), str(out)])
    assert code == EXIT_OK
    for name in ("estimate.csv", "report.json", "graph.dot", "pattern.json"):
        assert (out / name).is_file()
    report = json.loads((out / "report.json").read_text())
    for key in ("alpha", "objective", "iterations", "converged", "m"):
        assert key in report
    assert report["alpha"] == 0.05 and report["ebic_path"] is None
    assert report["p"] == 8 and report["n"] == 120
    dot = (out / "graph.dot").read_text()
    assert dot.startswith("graph") and '"x0"' in dot
    Z = pattern_from_json((out / "pattern.json").read_text())
    est = read_matrix_csv(out / "estimate.csv")
    assert np.all(est[Z == 0] == 0)
    assert "converged=" in capsys.readouterr().out


def test_estimate_round_trip_is_lossless(tmp_path, sparse_csv, monkeypatch):
    path, _ = sparse_csv
    held = {}
    real = cli.bcd_fit

    def spy(*a, **k):
        held["est"] = real(*a, **k)
        return held["est"]

    monkeypatch.setattr(cli, "bcd_fit", spy)
    assert main(["estimate", "--alpha", "0.05", str(path), str(tmp_path / "o")]) == EXIT_OK
    back = read_matrix_csv(tmp_path / "o" / "estimate.csv")
    assert np.array_equal(back, held["est"].sigma)
    for cell in (tmp_path / "o" / "estimate.csv").read_text().split()[0].split(","):
        assert float("%.17g" % float(cell)) == float(cell)


def test_estimate_with_ebic_path(tmp_path, sparse_csv):
    path, _ = sparse_csv
    out = tmp_path / "sel"
    assert main(["estimate", "--grid", "0.01:0.1:0.01", str(path), str(out)]) == EXIT_OK
    report = json.loads((out / "report.json").read_text())
    path_doc = report["ebic_path"]
    assert path_doc["selected_alpha"] == report["alpha"]
    assert len(path_doc["alphas"]) >= 1


def test_independent_noise_gives_diagonal(tmp_path):
    rng = np.random.default_rng(4)
    Y = rng.standard_normal((2, 10))
    path = write_csv(tmp_path / "noise.csv", Y)
    out = tmp_path / "o"
    assert main(["estimate", "--alpha", "0.05", str(path), str(out)]) == EXIT_OK
    Z = pattern_from_json((out / "pattern.json").read_text())
    assert np.array_equal(Z, np.eye(2))
    S = sample_covariance(Y).S
    est = read_matrix_csv(out / "estimate.csv")
    assert np.allclose(est, np.diag(np.diag(S)), rtol=1e-8, atol=0)


def test_bcd_and_pd_agree(tmp_path, sparse_csv):
    path, _ = sparse_csv
    objs = {}
    for solver in ("bcd", "pd"):
        out = tmp_path / solver
        assert main(["estimate", "--alpha", "0.05", "--solver", solver, str(path), str(out)]) == EXIT_OK
        objs[solver] = json.loads((out / "report.json").read_text())["objective"]
    assert abs(objs["pd"] - objs["bcd"]) <= 0.01 * abs(objs["bcd"])


def test_select_alpha_command(tmp_path, sparse_csv, capsys):
    path, _ = sparse_csv
    assert main(["select-alpha", str(path)]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert {"alphas", "m", "ebic", "selected"} <= set(doc)
    target = tmp_path / "path.json"
    assert main(["select-alpha", str(path), "-o", str(target)]) == EXIT_OK
    assert json.loads(target.read_text())["ebic"] == doc["ebic"]


@pytest.mark.parametrize("argv", [
    ["estimate", "--alpha", "0.05", "--zeta", "1.1", "IN", "OUT"],
    ["estimate", "--alpha", "0.05", "--fixed-steps", "IN", "OUT"],
    ["estimate", "--alpha", "1.5", "IN", "OUT"],
    ["estimate", "--alpha", "0.05", "--grid", "0.01:0.1:0.01", "IN", "OUT"],
    ["estimate", "--grid", "0.1:0.01:0.01", "IN", "OUT"],
    ["select-alpha", "--grid", "a,b", "IN"],
    ["simulate", "--trials", "0", "--out", "OUT"],
    ["simulate", "--estimators", "glasso", "--out", "OUT"],
    ["simulate", "--sparsity", "2", "--out", "OUT"],
    ["simulate", "-n", "2", "--out", "OUT"],
    ["compare", "--jobs", "0", "--out", "OUT"],
])
def test_usage_errors(argv, tmp_path, sparse_csv, capsys):
    path, _ = sparse_csv
    argv = [str(path) if a == "IN" else str(tmp_path / "o") if a == "OUT" else a for a in argv]
    assert main(argv) == EXIT_USAGE
    assert "error" in capsys.readouterr().err


def test_argparse_errors_exit_one():
    with pytest.raises(SystemExit) as exc:
        main(["estimate", "--bogus"])
    assert exc.value.code == EXIT_USAGE
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == EXIT_USAGE


def test_bad_csv_reports_line(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n3,oops\n5,6\n")
    assert main(["estimate", "--alpha", "0.05", str(bad), str(tmp_path / "o")]) == EXIT_USAGE
    assert "line 3" in capsys.readouterr().err
    with pytest.raises(InputError, match="line 2: expected 2 fields"):
        (tmp_path / "ragged.csv").write_text("1,2\n3\n")
        read_data_csv(tmp_path / "ragged.csv")
    with pytest.raises(InputError, match="non-finite"):
        (tmp_path / "nan.csv").write_text("1,2\nnan,3\n")
        read_data_csv(tmp_path / "nan.csv")
    assert main(["estimate", "--alpha", "0.05", str(tmp_path / "missing.csv"), str(tmp_path / "o")]) == EXIT_USAGE


def test_too_few_samples(tmp_path):
    path = write_csv(tmp_path / "tiny.csv", np.array([[1.0, 2.0], [0.5, -1.0]]))
    assert main(["estimate", "--alpha", "0.05", str(path), str(tmp_path / "o")]) == EXIT_USAGE


def test_numeric_failure_exit_two(tmp_path, sparse_csv, monkeypatch, capsys):
    path, _ = sparse_csv

    def broken(*a, **k):
        raise NotPositiveDefiniteError("synthetic breakdown")

    monkeypatch.setattr(cli, "bcd_fit", broken)
    assert main(["estimate", "--alpha", "0.05", str(path), str(tmp_path / "o")]) == EXIT_NUMERIC
    diag = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert diag["error"] == "NotPositiveDefiniteError" and "synthetic" in diag["message"]


def test_transpose_and_header_handling(tmp_path):
    rng = np.random.default_rng(1)
    Y = rng.standard_normal((3, 12))
    plain = write_csv(tmp_path / "plain.csv", Y, header=False)
    got, names = read_data_csv(plain)
    assert names is None and np.array_equal(got, Y)
    wide = tmp_path / "wide.csv"
    wide.write_text("\n".join(",".join(repr(float(v)) for v in row) for row in Y) + "\n")
    got, _ = read_data_csv(wide, transpose=True)
    assert np.array_equal(got, Y)


def test_parse_grid():
    assert parse_grid("0.01:0.05:0.01") == (0.01, 0.02, 0.03, 0.04, 0.05)
    assert parse_grid("0.1,0.05") == (0.05, 0.1)
    assert len(parse_grid(None)) == 20


def test_simulate_is_byte_identical(tmp_path, capsys):
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        argv = ["simulate", "-p", "30", "-n", "40", "--sparsity", "0.8", "--trials", "20", "--seed", "7",
                "--out", str(out)]
        assert main(argv) == EXIT_OK
        outs.append(((out / "trials.csv").read_bytes(), (out / "summary.json").read_bytes()))
    assert outs[0] == outs[1]
    header = outs[0][0].decode().splitlines()[0].split(",")
    assert header[:3] == ["trial", "estimator", "nrmse"] and "runtime_s" not in header
    assert "NRMSE" in capsys.readouterr().out


def test_compare_direction(tmp_path):
    out = tmp_path / "cmp"
    argv = ["compare", "--estimators", "scm,bcd", "-p", "30", "-n", "200", "--sparsity", "0.75",
            "--trials", "10", "--seed", "3", "--out", str(out)]
    assert main(argv) == EXIT_OK
    summ = json.loads((out / "summary.json").read_text())["estimators"]
    assert summ["bcd"]["nrmse_mean"] < summ["scm"]["nrmse_mean"]


def test_console_script_runs(tmp_path, sparse_csv):
    path, _ = sparse_csv
    proc = subprocess.run(
        [sys.executable, "-m", "sparsecov.cli", "estimate", "--alpha", "0.05", str(path), str(tmp_path / "o")],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    proc = subprocess.run([sys.executable, "-m", "sparsecov.cli", "simulate", "--trials", "0"],
                          capture_output=True, text=True)
    assert proc.returncode == 1
