# tests/integration/fixtures/cases.py
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import pytest

from .cli_runner import CliRunner
from .config_writer import ConfigWriter

logger = logging.getLogger(__name__)

EXPECTED_OUTPUTS = Path(__file__).resolve().parents[1] / "expected_outputs"


@dataclass
class ConfigSource:
    """Where the config of a case comes from: a named template with optional
    overrides, or literal text written as-is."""

    template: Optional[str] = None
    overrides: Optional[dict[str, Any]] = None
    raw_text: Optional[str] = None


@dataclass
class CliCase:
    name: str
    description: str
    command: str
    config: Optional[ConfigSource]
    expected_exit: int
    extra_args: list[str] = field(default_factory=list)
    out_under_file: bool = False
    # e.g. "solve_scalar_bounded.json": files written and table row counts
    expected_output_file: Optional[str] = None


def _materialize(case: CliCase, writer: ConfigWriter) -> Optional[Path]:
    source = case.config
    if source is None:
        return None
    if source.raw_text is not None:
        return writer.write_raw(f"{case.name}.json", source.raw_text)
    return writer.from_template(source.template, source.overrides)


def execute_cli_case(case: CliCase, runner: CliRunner, writer: ConfigWriter) -> None:
    config_path = _materialize(case, writer)
    out = None
    if case.out_under_file:
        blocker = runner.out_root / "blocker"
        blocker.parent.mkdir(parents=True, exist_ok=True)
        blocker.write_text("not a directory", encoding="utf-8")
        out = blocker / "results"

    result = runner.run(case.command, config_path, out, *case.extra_args)
    assert result.exit_code == case.expected_exit, (
        f"{case.name}: exit code {result.exit_code}, expected {case.expected_exit}"
    )

    if case.expected_output_file:
        expected = json.loads((EXPECTED_OUTPUTS / case.expected_output_file).read_text(encoding="utf-8"))
        assert result.files == sorted(expected["files"])
        for table, rows in expected.get("rows", {}).items():
            assert len(result.table(table)) == rows, f"{case.name}: {table} row count"
        for key, value in expected.get("summary", {}).items():
            assert result.results()["summary"][key] == pytest.approx(value, rel=1e-9)
        for key, value in expected.get("metadata", {}).items():
            assert result.results()["metadata"][key] == value


def create_parametrized_test(cases: list[CliCase], pytest_marks=None):
    """Factory for a test function running every case."""
    pytest_marks = pytest_marks or []

    @pytest.mark.parametrize("case", cases, ids=lambda case: case.name)
    def test_function(case, cli_runner, config_writer):
        execute_cli_case(case, cli_runner, config_writer)

    for mark in pytest_marks:
        test_function = mark(test_function)
    return test_function
