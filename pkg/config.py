# config.py
# -------------------------------------------------------------------
# Shared settings for the oblivious-median toolkit:
# - Defaults for seeds, enumeration caps and streaming chunk sizes
# - Optional KEY=VALUE settings file (read with python-dotenv)
# - stderr logging setup used by the command-line entry point
# -------------------------------------------------------------------

from __future__ import annotations

import logging
import os
import sys
from dataclasses import dataclass, fields, replace

from dotenv import dotenv_values


# =========================
# Configuration & Defaults
# =========================
DEFAULT_SEED = 0
DEFAULT_FORMAT = "json"
ENUMERATION_CAP = 10**7          # joint states enumerated by infotools
EXHAUSTIVE_ASSIGNMENT_CAP = 10**6  # subsets tried exhaustively by find_assignment
ASSIGNMENT_ATTEMPT_CAP = 10**6
STREAM_CHUNK_SIZE = 2**20        # values per chunk in a streamed pass
LOG_LEVEL = "WARNING"
VERIFY_SCALE = 1.0

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Raised for unreadable or malformed settings files."""


@dataclass(frozen=True)
class Settings:
    seed: int = DEFAULT_SEED
    output_format: str = DEFAULT_FORMAT
    enumeration_cap: int = ENUMERATION_CAP
    exhaustive_assignment_cap: int = EXHAUSTIVE_ASSIGNMENT_CAP
    assignment_attempt_cap: int = ASSIGNMENT_ATTEMPT_CAP
    chunk_size: int = STREAM_CHUNK_SIZE
    log_level: str = LOG_LEVEL
    verify_scale: float = VERIFY_SCALE

    def __post_init__(self):
        if self.output_format not in ("json", "csv"):
            raise ConfigError(f"output_format must be 'json' or 'csv', got {self.output_format!r}")
        for name in ("enumeration_cap", "exhaustive_assignment_cap", "assignment_attempt_cap", "chunk_size"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be a positive integer, got {getattr(self, name)}")
        if not 0 < self.verify_scale <= 1.0:
            raise ConfigError(f"verify_scale must lie in (0, 1], got {self.verify_scale}")
        if logging.getLevelName(self.log_level.upper()) not in range(0, 60):
            raise ConfigError(f"Unknown log level: {self.log_level!r}")


# =========================
# Helpers
# =========================
def _coerce(name: str, raw: str | None, kind: type):
    if raw is None:
        raise ConfigError(f"Setting {name} has no value")
    try:
        return kind(raw.strip())
    except ValueError:
        raise ConfigError(f"Setting {name}={raw!r} is not a valid {kind.__name__}") from None


def load_settings(path: str | None = None, **overrides) -> Settings:
    """
    Build Settings from defaults, an optional settings file, then explicit overrides.

    The file uses dotenv syntax with upper-case field names, e.g.::

        SEED=7
        ENUMERATION_CAP=1000000

    Only the file is consulted; the process environment never is.
    """
    settings = Settings()
    if path is not None:
        if not os.path.exists(path):
            raise FileNotFoundError(f"Settings file not found at: {path}")
        known = {f.name.upper(): f for f in fields(Settings)}
        values = {}
        for key, raw in dotenv_values(path).items():
            field = known.get(key.upper())
            if field is None:
                raise ConfigError(
                    f"Unknown setting {key!r} in {path}. Known settings: {sorted(known)}"
                )
            kind = {"int": int, "float": float, "str": str}[
                field.type if isinstance(field.type, str) else field.type.__name__
            ]
            values[field.name] = _coerce(key, raw, kind)
        settings = replace(settings, **values)
        logger.info("Loaded %d setting(s) from %s", len(values), path)

    clean = {k: v for k, v in overrides.items() if v is not None}
    return replace(settings, **clean) if clean else settings


def configure_logging(level: str = LOG_LEVEL) -> None:
    """Send log records to stderr so stdout stays reserved for results."""
    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root.addHandler(handler)
    root.setLevel(level.upper())
