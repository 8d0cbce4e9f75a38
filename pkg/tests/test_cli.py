"""CLI surface tests: subcommands, exit codes, output files."""

import json
import subprocess
import sys

import pytest

from vamp_cfar import matched_params, save_params

CONFIG_TOML = """
m = 24
n = 60
k_targets = 3
snr_db = 20.0
noise_var = 1.0
k_layers = 4
param_mode = "matched"
trials = 4
base_seed = 5
pfa_grid = [0.1, 0.01]
detectors = ["pcd", "vamp_eq8"]

[pcd]
pfa = 0.01
pfa0 = 0.01
c_tol = 1e-6
m_max = 20
"""


def run_cli(*args):
    return subprocess.run(
        [sys.executable, "-m", "vamp_cfar.cli", *map(str, args)],
        capture_output=True, text=True,
    )


@pytest.fixture
def config_path(tmp_path):
    path = tmp_path / "cfg.toml"
    path.write_text(CONFIG_TOML)
    return path


class TestExitCodes:
    def test_success(self, config_path, tmp_path):
        proc = run_cli("sigma-convergence", "--config", config_path,
                       "--out", tmp_path / "out")
        assert proc.returncode == 0, proc.stderr

    def test_missing_config_file(self, tmp_path):
        proc = run_cli("roc", "--config", tmp_path / "absent.toml",
                       "--out", tmp_path / "out")
        assert proc.returncode == 2
        assert "config error" in proc.stderr

    def test_invalid_config_value(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text(CONFIG_TOML.replace("trials = 4", "trials = 0"))
        proc = run_cli("pfa-control", "--config", path, "--out", tmp_path / "out")
        assert proc.returncode == 2
        assert "trials" in proc.stderr

    def test_malformed_params_file(self, config_path, tmp_path):
        params = tmp_path / "params.json"
        params.write_text("{}")
        proc = run_cli("roc", "--config", config_path, "--out", tmp_path / "out",
                       "--params", params)
        assert proc.returncode == 2


class TestOutputs:
    def test_each_command_writes_expected_files(self, config_path, tmp_path):
        expected = {
            "sigma-convergence": ["trials.csv", "sigma_trace.csv", "ecdf.csv"],
            "roc": ["roc.csv"],
            "pfa-control": ["pfa_control.csv"],
        }
        for command, files in expected.items():
            out = tmp_path / command
            proc = run_cli(command, "--config", config_path, "--out", out)
            assert proc.returncode == 0, proc.stderr
            for name in files + ["manifest.json"]:
                assert (out / name).exists(), f"{command} missing {name}"
            manifest = json.loads((out / "manifest.json").read_text())
            assert manifest["command"] == command
            assert manifest["config"]["trials"] == 4

    def test_params_override_recorded_in_run(self, config_path, tmp_path):
        params = tmp_path / "params.json"
        save_params(matched_params(4, 0.05, 1.0), params)
        proc = run_cli("roc", "--config", config_path, "--out", tmp_path / "out",
                       "--params", params)
        assert proc.returncode == 0, proc.stderr

    def test_export_fixtures(self, config_path, tmp_path):
        out = tmp_path / "fx"
        proc = run_cli("export-fixtures", "--config", config_path,
                       "--out", out, "--count", 2)
        assert proc.returncode == 0, proc.stderr
        for name in ("fixtures.csv", "params.json", "manifest.json"):
            assert (out / name).exists()
        header = (out / "fixtures.csv").read_text().splitlines()[0]
        assert header == "sample,seed,vector,index,value"

    def test_rerun_is_byte_identical(self, config_path, tmp_path):
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        assert run_cli("roc", "--config", config_path, "--out", out1).returncode == 0
        assert run_cli("roc", "--config", config_path, "--out", out2,
                       "--workers", 2).returncode == 0
        assert (out1 / "roc.csv").read_bytes() == (out2 / "roc.csv").read_bytes()
        assert ((out1 / "manifest.json").read_bytes()
                == (out2 / "manifest.json").read_bytes())
