"""Shared fixtures: reference batches exported by the detection toolkit.

The toolkit is consumed strictly through its CLI (an external
interface); these tests shell out to it and read the files it writes.
"""

import subprocess
import sys

import pytest

TOOLKIT_CONFIG = """
m = 10
n = 16
k_targets = 2
snr_db = 18.0
noise_var = 1.0
k_layers = 4
param_mode = "matched"
trials = 3
base_seed = 0
pfa_grid = [0.01]
detectors = ["pcd", "vamp_eq8"]

[pcd]
pfa = 0.01
"""


@pytest.fixture(scope="session")
def toolkit_fixtures(tmp_path_factory):
    """Exported fixture directory; skips if the toolkit is not installed."""
    if not _toolkit_available():
        pytest.skip("detection toolkit CLI not installed")
    root = tmp_path_factory.mktemp("toolkit")
    config = root / "cfg.toml"
    config.write_text(TOOLKIT_CONFIG)
    out = root / "fx"
    proc = subprocess.run(
        [sys.executable, "-m", "vamp_cfar.cli", "export-fixtures",
         "--config", str(config), "--out", str(out), "--count", "3"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    return out


def _toolkit_available() -> bool:
    proc = subprocess.run(
        [sys.executable, "-c", "import vamp_cfar.cli"], capture_output=True,
    )
    return proc.returncode == 0
