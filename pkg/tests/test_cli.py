import csv
import hashlib
import json
from pathlib import Path

import pytest

from sigapprox.cli import main
from sigapprox.config import ConfigError, ExperimentConfig
from sigapprox.path import PathGrid


def write_config(tmp_path, name="cfg.json", **overrides):
    cfg = {
        "brownian": {"d": 1, "T": 1.0, "K": 32, "seed": 5, "n_paths": 60},
        "weight": {"alpha": 0.4, "beta": 0.01, "gamma": 2, "p": 2},
        "regression": {"p": 2, "N_list": [1, 2, 3], "split_fraction": 0.75},
        "target": {"kind": "terminal-functional", "spec": {"name": "gbm", "mu": 0.05, "sigma": 0.2}},
        "output_dir": str(tmp_path / "out"),
    }
    for key, value in overrides.items():
        cfg[key] = value
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


def tree(root: Path) -> dict:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


class TestConfig:
    def test_defaults_roundtrip(self):
        cfg = ExperimentConfig()
        assert ExperimentConfig.from_dict(json.loads(cfg.canonical_json())) == cfg

    @pytest.mark.parametrize(
        "obj",
        [
            {"regression": {"N_list": [2, 1]}},
            {"regression": {"split_fraction": 1.0}},
            {"brownian": {"K": 3}},
            {"weight": {"alpha": 0.6}},
            {"target": {"kind": "other", "spec": {"name": "gbm"}}},
            {"unknown": 1},
        ],
    )
    def test_invalid(self, obj):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(obj)


def test_simulate_single_path(tmp_path):
    cfg = write_config(tmp_path, brownian={"d": 2, "K": 16, "seed": 5, "n_paths": 1})
    assert main(["simulate", "--config", str(cfg)]) == 0
    out = tmp_path / "out"
    files = list((out / "paths").iterdir())
    assert len(files) == 1
    grid = PathGrid.from_csv(files[0].read_text())
    assert grid.values.shape == (17, 2)
    manifest = json.loads((out / "manifest.json").read_text())
    recomputed = hashlib.sha256(ExperimentConfig.load(cfg).canonical_json().encode()).hexdigest()
    assert manifest["config_hash"] == recomputed and manifest["seed"] == 5
    with (out / "targets.csv").open() as fh:
        assert next(csv.reader(fh)) == ["path_id", "t", "y_1"]


def test_simulate_rerun_identical(tmp_path):
    cfg = write_config(tmp_path, brownian={"K": 16, "n_paths": 3})
    main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "a")])
    main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "b")])
    a, b = tree(tmp_path / "a"), tree(tmp_path / "b")
    assert a == b


def test_seed_override_changes_paths(tmp_path):
    cfg = write_config(tmp_path, brownian={"K": 16, "n_paths": 1})
    main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "a")])
    main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "b"), "--seed", "99"])
    assert tree(tmp_path / "a")["paths/path_0.csv"] != tree(tmp_path / "b")["paths/path_0.csv"]
    assert json.loads((tmp_path / "b" / "manifest.json").read_text())["seed"] == 99


def test_fit_outputs_and_thread_invariance(tmp_path):
    cfg = write_config(tmp_path)
    assert main(["fit", "--config", str(cfg), "--out", str(tmp_path / "t1"), "--threads", "1"]) == 0
    assert main(["fit", "--config", str(cfg), "--out", str(tmp_path / "t3"), "--threads", "3"]) == 0
    a, b = tree(tmp_path / "t1"), tree(tmp_path / "t3")
    assert a == b
    for N in (1, 2, 3):
        rep = json.loads(a[f"report_N{N}.json"])
        assert rep["N"] == N and rep["n_train"] == 45 and rep["n_test"] == 15
        assert json.loads(a[f"functional_N{N}.json"])["level_cap"] == N
    rows = list(csv.DictReader((tmp_path / "t1" / "summary.csv").open()))
    train = [float(r["train_error"]) for r in rows]
    assert [int(r["N"]) for r in rows] == [1, 2, 3] and train == sorted(train, reverse=True)


def test_fit_time_target_exact(tmp_path):
    cfg = write_config(
        tmp_path,
        target={"kind": "process", "spec": {"name": "time"}},
        regression={"N_list": [1, 2], "ridge_lambda": 0.0},
    )
    assert main(["fit", "--config", str(cfg)]) == 0
    rows = list(csv.DictReader((tmp_path / "out" / "summary.csv").open()))
    assert all(float(r["test_error"]) <= 1e-10 for r in rows)


def test_diagnose(tmp_path):
    cfg = write_config(tmp_path, weight={"beta": 0.0, "diagnostic": True})
    assert main(["diagnose", "--config", str(cfg)]) == 0
    diag = json.loads((tmp_path / "out" / "diagnostics.json").read_text())
    assert diag["mean"] == 1.0 and diag["overflow_count"] == 0 and diag["n_paths"] == 60
    assert sum(diag["norm_histogram"]["counts"]) == 60


def test_stopped_audit(tmp_path):
    cfg = write_config(tmp_path, brownian={"d": 2, "K": 16, "n_paths": 2})
    assert main(["stopped-audit", "--config", str(cfg)]) == 0
    summary = json.loads((tmp_path / "out" / "stopped_audit_summary.json").read_text())
    assert summary["max_residual"] <= 1e-12 and summary["n_rows"] > 0


def test_report_merges(tmp_path):
    cfg = write_config(tmp_path)
    main(["fit", "--config", str(cfg), "--out", str(tmp_path / "r1")])
    main(["fit", "--config", str(cfg), "--out", str(tmp_path / "r2"), "--seed", "8"])
    assert main(["report", str(tmp_path / "r1"), str(tmp_path / "r2"), "--out", str(tmp_path / "rep")]) == 0
    rows = list(csv.DictReader((tmp_path / "rep" / "report.csv").open()))
    assert len(rows) == 6 and {r["run"] for r in rows} == {str(tmp_path / "r1"), str(tmp_path / "r2")}


def test_config_error_exit_code(tmp_path, capsys):
    cfg = write_config(tmp_path, regression={"N_list": [3, 1]})
    assert main(["fit", "--config", str(cfg)]) == 2
    assert json.loads(capsys.readouterr().err)["exit_code"] == 2
    assert main(["fit", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path / "x")]) == 2


def test_unknown_target_is_config_error(tmp_path):
    cfg = write_config(tmp_path, target={"kind": "process", "spec": {"name": "nope"}})
    assert main(["fit", "--config", str(cfg)]) == 2


def test_numerical_failure_exit_code(tmp_path):
    cfg = write_config(tmp_path, target={"kind": "terminal-functional", "spec": {"name": "gbm_em", "mu": 1e12, "sigma": 0.2}})
    assert main(["fit", "--config", str(cfg)]) == 3
    err = json.loads((tmp_path / "out" / "error.json").read_text())
    assert err["error"] == "NumericalError" and "path" in err["message"]
