"""Shared artifact fixtures: produced through the solver CLI, never in-process."""

import subprocess
import sys

import pytest


def _run_cli(command, config_path):
    proc = subprocess.run(
        [sys.executable, "-m", "obstaclelab.cli", command, str(config_path)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, f"{command} failed: {proc.stderr}"


@pytest.fixture(scope="session")
def uniform_run(tmp_path_factory):
    """Constant scenario: lambda identically 1.5, empty contact set."""
    root = tmp_path_factory.mktemp("uniform")
    out = root / "artifacts"
    cfg = root / "cfg.txt"
    cfg.write_text(f"scenario=constant\nn=32\ndim=3\nout={out}\namplitude=1.5\n")
    _run_cli("solve", cfg)
    _run_cli("decay", cfg)
    return out


@pytest.fixture(scope="session")
def cap_run(tmp_path_factory):
    """Latitude-cap scenario with nondegenerate gradients and decay fits."""
    root = tmp_path_factory.mktemp("cap")
    out = root / "artifacts"
    cfg = root / "cfg.txt"
    cfg.write_text(
        f"scenario=latitude_cap\nn=48\ndim=3\nout={out}\nbeta=0.4\namplitude=1.0\n"
    )
    _run_cli("solve", cfg)
    _run_cli("decay", cfg)
    return out
