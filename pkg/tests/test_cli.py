import json
import os
import subprocess
import sys

import pytest

from fastrons.cli import load_config, main
from fastrons.experiments import ConfigError, ExperimentConfig

from conftest import CONFIGS


def _read_csv(path):
    lines = path.read_text().splitlines()
    return lines[0].split(","), [row.split(",") for row in lines[1:]]


def test_run_writes_outputs(tmp_path, capsys):
    code = main(["run", str(CONFIGS / "fp_r2.toml"), "--set", "T=1", "--out", str(tmp_path)])
    assert code == 0
    for suffix in ("errors.csv", "trajectory.csv", "summary.json", "manifest.json"):
        assert (tmp_path / f"fp_r2_{suffix}").exists()
    header, rows = _read_csv(tmp_path / "fp_r2_errors.csv")
    assert header[0] == "t" and "mean_error" in header
    assert len(rows) == 11
    # 17 significant digits round-trip every float exactly
    value = rows[3][1]
    assert float(f"{float(value):.17g}") == float(value)
    summary = json.loads((tmp_path / "fp_r2_summary.json").read_text())
    assert summary["completed"] is True and summary["t_reached"] == 1.0
    assert "fp_r2:" in capsys.readouterr().out


def test_manifest_config_round_trips(tmp_path):
    assert main(["run", str(CONFIGS / "fp_r2.toml"), "--set", "T=0.2", "--out", str(tmp_path)]) == 0
    manifest = json.loads((tmp_path / "fp_r2_manifest.json").read_text())
    cfg = ExperimentConfig.from_dict(manifest["config"])
    assert cfg == load_config(CONFIGS / "fp_r2.toml", ["T=0.2"])
    assert manifest["seed"] == cfg.seed and manifest["build_id"]


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("FASTRONS_OUTPUT_DIR", str(tmp_path / "env"))
    assert main(["run", str(CONFIGS / "fp_r2.toml"), "--set", "T=0.2"]) == 0
    assert (tmp_path / "env" / "fp_r2_errors.csv").exists()


@pytest.mark.parametrize("override,field", [("alpha=-1", "alpha"), ("sigma=3", "sigma"), ("r=two", "r")])
def test_invalid_override_exit_2(tmp_path, capsys, override, field):
    code = main(["run", str(CONFIGS / "fp_r2.toml"), "--set", override, "--out", str(tmp_path)])
    assert code == 2
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "validation" and err["field"] == field
    assert not list(tmp_path.iterdir())


def test_missing_config_exit_2(tmp_path, capsys):
    assert main(["run", str(tmp_path / "nope.toml")]) == 2
    assert json.loads(capsys.readouterr().err)["error"] == "usage"


def test_bad_toml(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("r = = 3\n")
    assert main(["run", str(bad), "--out", str(tmp_path)]) == 2


def test_nested_table_rejected(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("[a]\n[a.b]\nr = 3\n")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_aborted_run_exit_1_with_partial_outputs(tmp_path, capsys):
    code = main(["run", str(CONFIGS / "fp_r2.toml"), "--set", "max_steps=3", "--out", str(tmp_path)])
    assert code == 1
    assert json.loads(capsys.readouterr().err)["error"] == "aborted"
    summary = json.loads((tmp_path / "fp_r2_summary.json").read_text())
    assert summary["completed"] is False


def test_verify_unknown_suite(capsys):
    assert main(["verify", "bogus"]) == 2
    assert "bogus" in json.loads(capsys.readouterr().err)["message"]


def test_verify_integrators(capsys):
    assert main(["verify", "integrators"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out and all(line.startswith("PASS") for line in out)


def test_usage_errors():
    assert main([]) == 2
    assert main(["run", str(CONFIGS / "fp_r2.toml"), "--jobs", "0"]) == 2


def test_seeded_ks_runs_byte_identical(tmp_path):
    args = [str(CONFIGS / "ks_mc_reg.toml"), "--seed", "7", "--set", "T=0.3"]
    assert main(["run", *args, "--out", str(tmp_path / "a")]) == 0
    assert main(["run", *args, "--out", str(tmp_path / "b")]) == 0
    for suffix in ("errors.csv", "trajectory.csv"):
        a = (tmp_path / "a" / f"ks_mc_reg_{suffix}").read_bytes()
        b = (tmp_path / "b" / f"ks_mc_reg_{suffix}").read_bytes()
        assert a == b


def test_module_entry_point(tmp_path):
    env = dict(os.environ, FASTRONS_OUTPUT_DIR=str(tmp_path))
    proc = subprocess.run([sys.executable, "-m", "fastrons.cli", "run", str(CONFIGS / "fp_r2.toml"),
                           "--set", "alpha=-1"], env=env, capture_output=True, text=True)
    assert proc.returncode == 2
    assert json.loads(proc.stderr)["field"] == "alpha"
