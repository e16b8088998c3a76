import logging
import sys
from typing import Optional

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"


def setup_logging(level: str = "INFO", log_file: Optional[str] = None) -> logging.Logger:
    """Configure the root logger once per process entry point.

    Library modules only ever call ``logging.getLogger(__name__)``; handlers are
    installed here by the CLI.
    """
    handlers: list[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if log_file:
        handlers.append(logging.FileHandler(log_file, mode="w", encoding="utf-8"))

    logging.basicConfig(
        level=getattr(logging, str(level).upper(), logging.INFO),
        format=LOG_FORMAT,
        datefmt=DATE_FORMAT,
        handlers=handlers,
        force=True,  # This clears any existing handlers
    )

    # Configure console handler for UTF-8 (mainly for Windows)
    for handler in logging.getLogger().handlers:
        if isinstance(handler, logging.StreamHandler) and handler.stream == sys.stderr:
            try:
                if hasattr(handler.stream, "reconfigure"):
                    handler.stream.reconfigure(encoding="utf-8", errors="replace")
            except Exception:
                pass

    return logging.getLogger(__name__)
