import csv
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from qgpbo import experiments
from qgpbo.benchmark import run_suites
from qgpbo.cli import main
from qgpbo.errors import ConfigError
from qgpbo.qkernel import read_gram_csv

HELPERS = Path(__file__).parent / "helpers"
SMALL_BO = ["--reps", "2", "--iters", "3"]


def tree(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def rows(path):
    return list(csv.reader(open(path)))


@pytest.fixture(scope="module")
def regress_out(tmp_path_factory):
    out = tmp_path_factory.mktemp("regress")
    assert main(["regress", "--out", str(out), "--budget", "20"]) == 0
    return out


def test_regress_outputs(regress_out):
    names = set(tree(regress_out))
    assert {"config.json", "metrics.json", "training_data.csv", "predictions_exact.csv",
            "predictions_sampled.csv", "gram_exact.csv", "gram_sampled.csv"} <= names
    pred = rows(regress_out / "predictions_exact.csv")
    assert pred[0] == ["x", "true_f", "mean", "std"] and len(pred) == 51
    metrics = json.loads((regress_out / "metrics.json").read_text())
    assert set(metrics["modes"]) == {"EXACT", "SAMPLED"}
    assert len(metrics["loss_history"]) <= 20
    assert metrics["modes"]["SAMPLED"]["model"]["kernel"]["shots"] == 10_000
    assert read_gram_csv(regress_out / "gram_sampled.csv").regularized
    cfg = json.loads((regress_out / "config.json").read_text())
    assert cfg["training"]["budget"] == 20 and cfg["seed"] == 0


def test_regress_is_byte_identical(regress_out, tmp_path):
    assert main(["regress", "--out", str(tmp_path), "--budget", "20"]) == 0
    assert tree(tmp_path) == tree(regress_out)


def test_regress_single_test_point(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"dataset": {"n_test": 1}, "training": {"enabled": False}}))
    assert main(["regress", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    assert len(rows(tmp_path / "o" / "predictions_exact.csv")) == 2


def test_bayesopt_outputs_and_determinism(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["bayesopt", "--out", str(out), *SMALL_BO, "--qubits", "2", "--shots", "200"]) == 0
    assert tree(a) == tree(b)
    names = set(tree(a))
    for tag in ("qgp-exact", "qgp-sampled", "rbf", "random"):
        assert {f"aggregate_{tag}.csv", f"traces/{tag}_run000.csv", f"traces/{tag}_run001.json"} <= names
    agg = rows(a / "aggregate_rbf.csv")
    assert agg[0] == ["iteration", "mean_best_so_far", "std"] and len(agg) == 1 + 5 + 3
    summary = json.loads((a / "summary.json").read_text())
    assert summary["RANDOM"]["runs"] == 2


def test_bayesopt_single_repetition_has_zero_spread(tmp_path):
    assert main(["bayesopt", "--out", str(tmp_path), "--reps", "1", "--iters", "2", "--surrogate", "RBF"]) == 0
    agg = np.array([[float(v) for v in r] for r in rows(tmp_path / "aggregate_rbf.csv")[1:]])
    trace = np.array([[float(v) for v in r] for r in rows(tmp_path / "traces" / "rbf_run000.csv")[1:]])
    np.testing.assert_array_equal(agg[:, 1], trace[:, -1])
    assert np.all(agg[:, 2] == 0.0)


def test_bayesopt_paired_initial_design(tmp_path):
    assert main(["bayesopt", "--out", str(tmp_path), "--reps", "1", "--iters", "1"]) == 0
    first = {tag: rows(tmp_path / "traces" / f"{tag}_run000.csv")[1:6] for tag in ("qgp-exact", "rbf", "random")}
    assert first["qgp-exact"] == first["rbf"] == first["random"]


def test_external_objective_command(tmp_path):
    cmd = f"{sys.executable} {HELPERS / 'branin_cmd.py'}"
    argv = ["bayesopt", "--out", str(tmp_path), "--reps", "1", "--iters", "2", "--surrogate", "RBF",
            "--objective-cmd", cmd, "--bounds", "[[-5, 10], [0, 15]]"]
    assert main(argv) == 0
    cfg = experiments.resolve_config("bayesopt", None, {
        "repetitions": 1, "n_iter": 2, "surrogates": ["RBF"], "objective": {"command": cmd, "bounds": [[-5, 10], [0, 15]]}})
    ref = experiments.run_single(cfg, "RBF", 0)
    trace = np.array([[float(v) for v in r] for r in rows(tmp_path / "traces" / "rbf_run000.csv")[1:]])
    np.testing.assert_array_equal(trace[:, 1:3], ref.points)


def test_parallel_workers_match_serial(tmp_path):
    base = ["bayesopt", *SMALL_BO, "--surrogate", "RBF", "--surrogate", "RANDOM"]
    assert main([*base, "--out", str(tmp_path / "s")]) == 0
    assert main([*base, "--out", str(tmp_path / "p"), "--workers", "2"]) == 0
    serial, parallel = tree(tmp_path / "s"), tree(tmp_path / "p")
    serial.pop("config.json"), parallel.pop("config.json")
    assert serial == parallel


def test_benchmark_passes_and_is_deterministic(tmp_path):
    assert main(["benchmark", "--out", str(tmp_path / "a")]) == 0
    assert main(["benchmark", "--out", str(tmp_path / "b")]) == 0
    assert tree(tmp_path / "a") == tree(tmp_path / "b")
    report = json.loads((tmp_path / "a" / "report.json").read_text())
    assert report["passed"] and all("max_error" in r for r in report["suites"].values())


def test_injected_fault_fails_named_suite(tmp_path, capsys):
    assert main(["benchmark", "--out", str(tmp_path), "--inject-fault", "gram_symmetry"]) == 3
    assert "gram_invariants" in capsys.readouterr().err
    report = json.loads((tmp_path / "report.json").read_text())
    assert not report["suites"]["gram_invariants"]["passed"]
    assert "gram_symmetry" in report["suites"]["gram_invariants"]["invariant"]


def test_unknown_fault_rejected():
    with pytest.raises(ValueError):
        run_suites(0, ["nope"])


def exit_code(argv):
    try:
        return main(argv)
    except SystemExit as exc:
        return exc.code


@pytest.mark.parametrize("argv", [
    ["regress", "--bogus"],
    ["regress", "--qubits", "0"],
    ["regress", "--seed", "x"],
    ["bayesopt", "--surrogate", "SVM"],
    ["bayesopt", "--objective-cmd", "cat"],
    ["bayesopt", "--reps", "0"],
    ["bayesopt", "--bounds", "[[0, 1"],
])
def test_config_errors_exit_1(argv, tmp_path):
    assert exit_code([*argv, "--out", str(tmp_path)]) == 1


def test_unknown_command_exit_1():
    assert exit_code(["nothing"]) == 1


def test_bad_config_file(tmp_path):
    (tmp_path / "c.json").write_text("{not json")
    assert main(["regress", "--config", str(tmp_path / "c.json"), "--out", str(tmp_path)]) == 1
    assert main(["regress", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 1
    (tmp_path / "d.json").write_text(json.dumps({"dataset": {"colour": 1}}))
    assert main(["regress", "--config", str(tmp_path / "d.json"), "--out", str(tmp_path)]) == 1


def test_runtime_error_exit_2(tmp_path):
    argv = ["bayesopt", "--out", str(tmp_path), "--reps", "1", "--iters", "1", "--surrogate", "RBF",
            "--objective-cmd", f"{sys.executable} {HELPERS / 'bad_cmd.py'}", "--bounds", "[[0, 1]]"]
    assert main(argv) == 2


def test_resolve_config_rejects_unknown_keys():
    with pytest.raises(ConfigError):
        experiments.resolve_config("regress", {"nope": 1})
    with pytest.raises(ConfigError):
        experiments.resolve_config("fly")


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "qgpbo", "benchmark", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
