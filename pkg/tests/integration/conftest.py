# tests/integration/conftest.py
import logging

import pytest

from .fixtures import CliRunner, ConfigWriter

logger = logging.getLogger(__name__)


@pytest.fixture(scope="function")
def config_writer(tmp_path):
    """Writes per-test config files"""
    return ConfigWriter(tmp_path / "configs")


@pytest.fixture(scope="function")
def cli_runner(tmp_path, monkeypatch):
    """In-process CLI runner writing under the test's temporary directory"""
    monkeypatch.chdir(tmp_path)
    return CliRunner(out_root=tmp_path / "out")
