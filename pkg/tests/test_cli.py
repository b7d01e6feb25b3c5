import json
import subprocess
import sys

import pytest

from owfccd.cli import main

SMALL = {"scengen": {"pool_size": 200, "shape": [1, 2, 2, 1, 1, 1]},
         "freqcheck": {"horizon_s": 20.0, "dt_s": 0.02}}


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert main(["synth", "--out", str(root / "data"), "--days", "8", "--seed", "1"]) == 0
    (root / "config.json").write_text(json.dumps(SMALL))
    return root


def run_all(root, out):
    return main(["all", "--config", str(root / "config.json"),
                 "--data", str(root / "data" / "data_manifest.json"), "--seed", "2",
                 "--out", str(out)])


@pytest.fixture(scope="module")
def pipeline(workspace):
    out = workspace / "run1"
    assert run_all(workspace, out) == 0
    return out


def test_pipeline_artifacts(pipeline):
    names = {p.name for p in pipeline.iterdir()}
    for case in ("ccd", "base", "noreserve", "noess"):
        assert {f"solution_{case}.json", f"freqcheck_{case}.json", f"revenue_{case}.csv",
                f"trajectory_{case}.csv"} <= names
    assert {"history.json", "tree.json", "scengen_report.json", "design_battery.csv",
            "design_cable.csv", "design_raw.json"} <= names
    for name in ("history.json", "tree.json", "solution_ccd.json", "freqcheck_ccd.json"):
        assert json.loads((pipeline / name).read_text())["schema"].startswith("owfccd.")


def test_solutions_succeed(pipeline):
    for case in ("ccd", "base", "noreserve", "noess"):
        doc = json.loads((pipeline / f"solution_{case}.json").read_text())
        assert doc["status"] == "SUCCESS"
        assert max(doc["residuals"].values()) <= 1e-6


def test_rerun_is_byte_identical(workspace, pipeline):
    out = workspace / "run2"
    assert run_all(workspace, out) == 0
    for path in pipeline.iterdir():
        assert (out / path.name).read_bytes() == path.read_bytes(), path.name


def test_missing_tree_names_artifact(workspace, tmp_path, capsys):
    code = main(["solve", "--config", str(workspace / "config.json"), "--out", str(tmp_path)])
    assert code == 1
    err = capsys.readouterr().err
    assert "tree.json" in err and "scengen" in err


def test_stage_by_stage(workspace, pipeline, tmp_path, capsys):
    for name in ("history.json", "tree.json"):
        (tmp_path / name).write_bytes((pipeline / name).read_bytes())
    base = ["--config", str(workspace / "config.json"), "--out", str(tmp_path), "--case", "base"]
    assert main(["solve"] + base) == 0
    assert main(["report"] + base) == 0
    printed = capsys.readouterr().out.split()
    assert str(tmp_path / "revenue_base.csv") in printed


def test_bad_config_exit_code(tmp_path, capsys):
    (tmp_path / "c.json").write_text(json.dumps({"ess": {"eta_ch": 3}}))
    assert main(["solve", "--config", str(tmp_path / "c.json"), "--out", str(tmp_path)]) == 1
    assert "error" in capsys.readouterr().err


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as exc:
        main(["solve", "--case", "cheap"])
    assert exc.value.code == 1


def test_wrong_schema_artifact(workspace, tmp_path, capsys):
    (tmp_path / "history.json").write_text(json.dumps({"schema": "other/1"}))
    code = main(["scengen", "--config", str(workspace / "config.json"), "--out", str(tmp_path)])
    assert code == 1
    assert "expected schema" in capsys.readouterr().err


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "owfccd", "--version"], capture_output=True,
                         text=True)
    assert out.returncode == 0 and out.stdout.startswith("owfccd ")
