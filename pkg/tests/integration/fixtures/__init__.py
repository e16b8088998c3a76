from .cli_runner import CliRunner, CliResult
from .config_writer import ConfigWriter

__all__ = ["CliRunner", "CliResult", "ConfigWriter"]
