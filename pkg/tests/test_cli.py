import json
import math

import numpy as np
import pytest

from cqspace.cli import main
from cqspace.data import format_matrix_csv, read_numeric_csv
from cqspace.metrics import distance_measure
from cqspace.simulation import ModelSpec, generate


def write_dataset(path, data):
    header = ["y"] + data.names
    path.write_text(format_matrix_csv(np.column_stack([data.y, data.x]), header))
    return path


@pytest.fixture(scope="module")
def ex1_csv(tmp_path_factory):
    return write_dataset(tmp_path_factory.mktemp("data") / "ex1.csv", generate(ModelSpec("EX1", n=600, p=10, seed=5)))


def test_simulate_writes_csv(tmp_path):
    out = tmp_path / "t.csv"
    code = main(["simulate", "--model", "I", "--n", "60", "--p", "3", "--tau", "0.25,0.5",
                 "--method", "cqs,tcqs", "--reps", "2", "--seed", "7", "--out", str(out), "--threads", "1"])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("model,method,tau,dm_mean,dm_sd,tcc_mean,tcc_sd,failures")
    assert len(lines) == 5


@pytest.mark.parametrize("argv", [
    ["simulate", "--model", "ZZ"],
    ["simulate", "--model", "I", "--tau", "1.5"],
    ["simulate", "--model", "I", "--method", "ols"],
    ["simulate", "--model", "I", "--n", "10"],
    ["simulate", "--model", "VI", "--p", "3"],
    ["consistency", "--n-grid", "400,600"],
    ["consistency", "--n-grid", "600,400,800"],
    ["frobnicate"],
    [],
])
def test_usage_errors_exit_2(argv, capsys):
    assert main(argv) == 2


def test_estimate_tcqs_close_to_truth(tmp_path, ex1_csv):
    out = tmp_path / "b.csv"
    assert main(["estimate", "--data", str(ex1_csv), "--method", "tcqs", "--d", "1", "--tau", "0.5",
                 "--out", str(out), "--score-coordinates"]) == 0
    header, basis = read_numeric_csv(out)
    assert header == ["dir1"]
    assert distance_measure(basis, np.r_[np.ones(4), np.zeros(6)]) <= 0.3
    summary = json.loads((tmp_path / "b.csv.json").read_text())
    assert summary["method"] == "tcqs" and summary["n"] == 600 and summary["p"] == 10
    assert summary["columns"] == [f"x{j}" for j in range(1, 11)]
    assert len(summary["eigenvalues"]) == 10


def test_estimate_cqs_shape_and_d_check(tmp_path, ex1_csv):
    out = tmp_path / "c.csv"
    summary = tmp_path / "s.json"
    assert main(["estimate", "--data", str(ex1_csv), "--method", "cqs", "--d", "1",
                 "--out", str(out), "--summary", str(summary)]) == 0
    assert read_numeric_csv(out)[1].shape == (10, 1)
    assert json.loads(summary.read_text())["d"] == 1
    assert main(["estimate", "--data", str(ex1_csv), "--d", "11", "--out", str(out)]) == 2


def test_estimate_data_error_exit_1(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("y,x1\n1,2\n3,oops\n")
    assert main(["estimate", "--data", str(bad), "--out", str(tmp_path / "o.csv")]) == 1
    assert "row 2" in capsys.readouterr().err


def test_project_self_consistency(tmp_path, capsys):
    data = generate(ModelSpec("I", n=150, p=4, seed=3))
    train = write_dataset(tmp_path / "train.csv", data)
    basis = tmp_path / "basis.csv"
    assert main(["estimate", "--data", str(train), "--d", "2", "--tau", "0.5", "--out", str(basis)]) == 0
    capsys.readouterr()
    pred = tmp_path / "pred.csv"
    assert main(["project", "--basis", str(basis), "--train", str(train), "--test", str(train), "--out", str(pred)]) == 0
    report = json.loads(capsys.readouterr().out)
    from cqspace.tcqs import tcqs_basis
    res = tcqs_basis(data, 0.5, 2)
    insample = res.transform.z_g @ res.basis.basis
    for k in range(2):
        r = np.corrcoef(insample[:, k], data.y)[0, 1]
        assert report["correlations"][f"dir{k + 1}"] == pytest.approx(r, abs=1e-10)
    assert read_numeric_csv(pred)[1].shape == (150, 2)


def test_project_rejects_empty_and_mismatched_tests(tmp_path):
    data = generate(ModelSpec("I", n=60, p=3, seed=4))
    train = write_dataset(tmp_path / "train.csv", data)
    basis = tmp_path / "basis.csv"
    basis.write_text(format_matrix_csv(np.eye(3)[:, :1], ["dir1"]))
    empty = tmp_path / "empty.csv"
    empty.write_text("y,x1,x2,x3\n")
    args = ["project", "--basis", str(basis), "--train", str(train), "--out", str(tmp_path / "p.csv")]
    assert main(args + ["--test", str(empty)]) == 2
    other = tmp_path / "other.csv"
    other.write_text("y,a,b,c\n1,2,3,4\n")
    assert main(args + ["--test", str(other)]) == 2


@pytest.mark.parametrize("a, b, dm, tcc", [
    ([1, 0], [1, 0], 0.0, 1.0),
    ([1, 0], [0, 1], 1.0, 0.0),
    ([1, 0], [1, 1], math.sqrt(0.5), math.sqrt(0.5)),
])
def test_metrics_command(tmp_path, capsys, a, b, dm, tcc):
    fa, fb = tmp_path / "a.csv", tmp_path / "b.csv"
    fa.write_text(format_matrix_csv(np.array(a, float)[:, None], ["dir1"]))
    fb.write_text(format_matrix_csv(np.array(b, float)[:, None], ["dir1"]))
    assert main(["metrics", str(fa), str(fb)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert set(out) == {"dm", "tcc"}
    assert out["dm"] == pytest.approx(dm, abs=1e-5) and out["tcc"] == pytest.approx(tcc, abs=1e-5)


def test_metrics_dimension_mismatch(tmp_path):
    fa, fb = tmp_path / "a.csv", tmp_path / "b.csv"
    fa.write_text(format_matrix_csv(np.eye(3)[:, :1], ["dir1"]))
    fb.write_text(format_matrix_csv(np.eye(3)[:, :2], ["dir1", "dir2"]))
    assert main(["metrics", str(fa), str(fb)]) == 2


def test_consistency_deterministic(tmp_path):
    args = ["consistency", "--model", "I", "--n-grid", "60,90,120", "--p", "3", "--reps", "2", "--seed", "3"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--out", str(a), "--threads", "1"]) == 0
    assert main(args + ["--out", str(b), "--threads", "1"]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().splitlines()[0] == "n,inv_sqrt_n,dm_mean"


def test_config_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# defaults\nmodel = I\nn = 60\np = 3\nreps = 1\ntau = 0.25\nmethod = tcqs\nthreads = 1\n")
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["simulate", "--config", str(cfg), "--out", str(a)]) == 0
    assert ",0.25," in a.read_text().splitlines()[1]
    assert main(["simulate", "--config", str(cfg), "--tau", "0.75", "--out", str(b)]) == 0
    assert ",0.75," in b.read_text().splitlines()[1]
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour = blue\n")
    assert main(["simulate", "--config", str(bad), "--model", "I"]) == 2


def test_atomic_output_leaves_no_temp_files(tmp_path):
    out = tmp_path / "t.csv"
    main(["simulate", "--model", "I", "--n", "60", "--p", "3", "--reps", "1", "--out", str(out), "--threads", "1"])
    assert [p.name for p in tmp_path.iterdir()] == ["t.csv"]
