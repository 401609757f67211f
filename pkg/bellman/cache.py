from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any

import msgpack
from packaging.version import InvalidVersion, Version

from bellman import __version__, settings
from bellman.boundary_function import BoundaryFunction
from bellman.constants import CACHE_FORMAT_VERSION, TRACE_FILE_SUFFIX
from bellman.evolution import EvolutionTrace
from bellman.exceptions import BellmanConfigException
from bellman.log import get_logger

logger = get_logger(__name__)
TRACE_CACHE_DIR_NAME = "traces"


def is_cache_enabled() -> bool:
    return settings.enable_cache


def create_cache_key(bf: BoundaryFunction, eps_target: float, tolerances: dict[str, float] | None = None) -> str:
    """
    Key of an evolution trace: the boundary function's version, the target radius, the tolerances and the package
    version.

    :param bf: The boundary function evolved
    :param eps_target: Radius the trace reaches
    :param tolerances: Tolerance overrides of the run
    :return: A sha256 hex digest
    """
    content = {
        "bf": bf.version,
        "eps_target": repr(float(eps_target)),
        "tolerances": tolerances or {},
        "package": __version__,
    }
    return hashlib.sha256(json.dumps(content, sort_keys=True).encode()).hexdigest()


def _obtain_cache_dir_path(base_dir: Path | None = None) -> Path:
    """
    Return the directory holding cached traces, creating it if needed.

    :param base_dir: Root directory of the cache, ``settings.cache_dir`` by default
    """
    cache_dir_path = (base_dir or settings.cache_dir) / TRACE_CACHE_DIR_NAME
    cache_dir_path.mkdir(parents=True, exist_ok=True)
    return cache_dir_path


def get_trace_path(cache_key: str, base_dir: Path | None = None) -> Path:
    return _obtain_cache_dir_path(base_dir) / f"{cache_key}{TRACE_FILE_SUFFIX}"


def _pack_default(value: Any) -> Any:
    if isinstance(value, float):
        return value
    if hasattr(value, "item"):
        return value.item()
    raise TypeError(f"Cannot serialize {type(value).__name__} in a trace cache file")


def store_trace(trace: EvolutionTrace, cache_key: str, base_dir: Path | None = None) -> Path:
    """
    Write a trace to the cache as msgpack, tagged with the cache format version.
    """
    path = get_trace_path(cache_key, base_dir)
    content = {"format_version": CACHE_FORMAT_VERSION, "package_version": __version__, "trace": trace.as_dict()}
    with path.open("wb") as f:
        f.write(msgpack.packb(content, default=_pack_default, use_bin_type=True))
    logger.info(f"Stored evolution trace in {path}")
    return path


def _is_current_format(recorded: Any) -> bool:
    try:
        return Version(str(recorded)) >= Version(CACHE_FORMAT_VERSION)
    except InvalidVersion:
        return False


def read_trace_file(path: Path, bf: BoundaryFunction) -> EvolutionTrace:
    """
    Read a trace file, raising ``BellmanConfigException`` when it is corrupted or older than the current format.
    """
    try:
        with path.open("rb") as f:
            content = msgpack.unpack(f, raw=False, strict_map_key=False)
    except (ValueError, msgpack.UnpackException) as error:
        raise BellmanConfigException(f"Corrupted trace file {path}: {error}") from error
    if not isinstance(content, dict) or not _is_current_format(content.get("format_version")):
        raise BellmanConfigException(f"Trace file {path} has an outdated or unknown format")
    try:
        return EvolutionTrace.from_dict(content["trace"], bf)
    except (KeyError, TypeError, ValueError) as error:
        raise BellmanConfigException(f"Corrupted trace file {path}: {error}") from error


def load_trace(cache_key: str, bf: BoundaryFunction, base_dir: Path | None = None) -> EvolutionTrace | None:
    """
    Return the cached trace, or None if there is no usable one. Outdated and corrupted files are discarded.
    """
    if not is_cache_enabled():
        return None
    path = get_trace_path(cache_key, base_dir)
    if not path.exists():
        return None
    try:
        trace = read_trace_file(path, bf)
    except BellmanConfigException as error:
        logger.warning(f"Ignoring cached trace: {error}")
        path.unlink(missing_ok=True)
        return None
    logger.info(f"Loaded evolution trace from {path}")
    return trace
