from __future__ import annotations

import os
import tempfile
from pathlib import Path

from bellman.constants import DEFAULT_BELLMAN_CACHE_DIR_NAME, ENV_PREFIX

_TRUE = {"1", "true", "t", "yes", "y", "on"}
_FALSE = {"0", "false", "f", "no", "n", "off"}


def _get(key: str, fallback: str | None = None) -> str | None:
    return os.environ.get(f"{ENV_PREFIX}{key.upper()}", fallback)


def _getboolean(key: str, fallback: bool) -> bool:
    value = _get(key)
    if value is None:
        return fallback
    if value.strip().lower() in _TRUE:
        return True
    if value.strip().lower() in _FALSE:
        return False
    raise ValueError(f"Invalid boolean value for {ENV_PREFIX}{key.upper()}: {value!r}")


def _getint(key: str, fallback: int) -> int:
    value = _get(key)
    return fallback if value is None else int(value)


def _getfloat(key: str, fallback: float) -> float:
    value = _get(key)
    return fallback if value is None else float(value)


# In MacOS users may want to set the envvar `TMPDIR` if they do not want the value of the temp directory to change
DEFAULT_CACHE_DIR = Path(tempfile.gettempdir(), DEFAULT_BELLMAN_CACHE_DIR_NAME)
cache_dir = Path(_get("cache_dir") or DEFAULT_CACHE_DIR)
enable_cache = _getboolean("enable_cache", fallback=True)
rich_logging = _getboolean("rich_logging", fallback=False)
event_cap = _getint("event_cap", fallback=64)
max_iterations = _getint("max_iterations", fallback=10000)
horizon = _getfloat("horizon", fallback=60.0)
oracle_max_sweeps = _getint("oracle_max_sweeps", fallback=20000)
