# tests/integration/fixtures/cli_runner.py
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import pandas as pd

from cli_io import main

logger = logging.getLogger(__name__)


@dataclass
class CliResult:
    exit_code: int
    out_dir: Path

    @property
    def files(self) -> list[str]:
        if not self.out_dir.is_dir():
            return []
        return sorted(p.name for p in self.out_dir.iterdir() if not p.name.startswith("."))

    def table(self, name: str) -> pd.DataFrame:
        return pd.read_csv(self.out_dir / f"{name}.csv")

    def results(self) -> dict:
        return json.loads((self.out_dir / "results.json").read_text(encoding="utf-8"))

    def raw(self, filename: str) -> bytes:
        return (self.out_dir / filename).read_bytes()


@dataclass
class CliRunner:
    """Runs the ``flipdyn`` entry point in-process with a per-test output dir."""

    out_root: Path
    extra_args: list[str] = field(default_factory=lambda: ["--log-level", "WARNING"])

    def run(self, command: str, config: Optional[Path] = None, out: Optional[Path] = None, *args: str) -> CliResult:
        out_dir = Path(out) if out is not None else self.out_root / command
        argv = [*self.extra_args, command]
        if config is not None:
            argv += ["--config", str(config)]
        argv += ["--out", str(out_dir), *args]
        logger.info(f"flipdyn {' '.join(argv)}")
        return CliResult(exit_code=main(argv), out_dir=out_dir)
