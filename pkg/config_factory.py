import json
import logging
import os
from dataclasses import dataclass, fields

from constants import DEFAULT_TREE_CAP

logger = logging.getLogger(__name__)

VALIDITY_MODES = ("strict", "permissive")


@dataclass
class SolverConfig:
    out_dir: str = "results"
    validity: str = "strict"
    log_level: str = "INFO"
    log_file: str = ""
    workers: int = 1
    tree_cap: int = DEFAULT_TREE_CAP
    settings_file: str = ""

    # env var name -> field name
    _ENV_KEYS = {
        "FLIPDYN_OUT_DIR": "out_dir",
        "FLIPDYN_VALIDITY": "validity",
        "FLIPDYN_LOG_LEVEL": "log_level",
        "FLIPDYN_LOG_FILE": "log_file",
        "FLIPDYN_WORKERS": "workers",
        "FLIPDYN_TREE_CAP": "tree_cap",
    }

    @property
    def strict(self) -> bool:
        return self.validity == "strict"

    def _apply(self, key: str, raw) -> None:
        """Coerce one raw override onto the matching field, keeping the
        default when the value is malformed."""
        field_type = {f.name: f.type for f in fields(self)}[key]
        try:
            if field_type in (int, "int"):
                value = int(raw)
                if value < 1:
                    raise ValueError(f"{key} must be >= 1")
            else:
                value = str(raw)
            if key == "validity" and value not in VALIDITY_MODES:
                raise ValueError(f"validity must be one of {VALIDITY_MODES}")
        except (TypeError, ValueError) as e:
            logger.warning(f"Ignoring setting {key}={raw!r}: {e}")
            return
        setattr(self, key, value)

    @classmethod
    def get_conf(cls):
        conf = cls()

        conf.settings_file = os.getenv("FLIPDYN_SETTINGS", "")
        if conf.settings_file and os.path.exists(conf.settings_file):
            try:
                with open(conf.settings_file, "r", encoding="utf-8") as config_file:
                    data = json.load(config_file)
                for key, value in data.items():
                    if key in cls._ENV_KEYS.values():
                        conf._apply(key, value)
            except (OSError, json.JSONDecodeError) as e:
                logger.warning(f"Could not read settings file {conf.settings_file}: {e}")

        for env_key, key in cls._ENV_KEYS.items():
            raw = os.getenv(env_key)
            if raw is not None and raw != "":
                conf._apply(key, raw)

        return conf


CONF = SolverConfig.get_conf()
