"""Generate sampler artifacts once per session by driving the tipla CLI.

The renderer is exercised only against artifacts produced through the public
command-line interface, never by importing the sampler package.  The presets
are the shipped ones with reduced step counts: identical schemas, faster runs.
"""

import subprocess
import sys
from pathlib import Path

import pytest

REPO_ROOT = Path(__file__).resolve().parents[2]
PRESETS = REPO_ROOT / "presets"


def _run_cli(config_text: str, out_dir: Path, tmp: Path, name: str) -> Path:
    cfg = tmp / f"{name}.toml"
    cfg.write_text(config_text)
    res = subprocess.run([sys.executable, "-m", "tipla.cli", "--config", str(cfg),
                          "--out", str(out_dir), "--quiet"], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    return out_dir


@pytest.fixture(scope="session")
def artifacts(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("artifacts")
    quadratic = (PRESETS / "quadratic_stationary.toml").read_text().replace(
        "n_steps = 200000", "n_steps = 20000")
    scaling = (PRESETS / "variance_scaling.toml").read_text().replace(
        "n_steps = 20000", "n_steps = 3000").replace(
        "n_repeats = 50", "n_repeats = 8").replace(
        "n_values = [10, 100, 1000]", "n_values = [10, 100]")
    comparison = (PRESETS / "stability_comparison.toml").read_text()
    return {
        "quadratic": _run_cli(quadratic, tmp / "quadratic", tmp, "quadratic"),
        "scaling": _run_cli(scaling, tmp / "scaling", tmp, "scaling"),
        "comparison": _run_cli(comparison, tmp / "comparison", tmp, "comparison"),
    }
