from pathlib import Path
from unittest.mock import patch

import msgpack
import pytest

from bellman import cache
from bellman.boundary_function import BoundaryFunction
from bellman.cache import (
    create_cache_key,
    get_trace_path,
    is_cache_enabled,
    load_trace,
    read_trace_file,
    store_trace,
)
from bellman.config import load_boundary_function_document
from bellman.constants import TRACE_FILE_SUFFIX
from bellman.evolution import evolve
from bellman.exceptions import BellmanConfigException

SAMPLES_DIR = Path(__file__).parent.parent / "bellman/samples"


def load(name: str) -> BoundaryFunction:
    return BoundaryFunction.from_document(load_boundary_function_document(SAMPLES_DIR / f"{name}.json"))


@pytest.fixture(scope="module")
def exp_trace():
    return evolve(load("exp"), 0.5)


def test_create_cache_key_is_stable():
    bf = load("exp")
    assert create_cache_key(bf, 0.5) == create_cache_key(load("exp"), 0.5)
    assert len(create_cache_key(bf, 0.5)) == 64


@pytest.mark.parametrize(
    "other",
    [
        ("exp", 0.6, None),
        ("exp", 0.5, {"tol_glue": 1e-6}),
        ("quadratic", 0.5, None),
    ],
)
def test_create_cache_key_changes(other):
    name, eps, tolerances = other
    assert create_cache_key(load("exp"), 0.5) != create_cache_key(load(name), eps, tolerances)


def test_create_cache_key_depends_on_the_package_version():
    bf = load("exp")
    key = create_cache_key(bf, 0.5)
    with patch.object(cache, "__version__", "99.0.0"):
        assert create_cache_key(bf, 0.5) != key


def test_get_trace_path(tmp_path):
    path = get_trace_path("abc", tmp_path)
    assert path == tmp_path / "traces" / f"abc{TRACE_FILE_SUFFIX}"
    assert path.parent.is_dir()


def test_store_and_load_trace(tmp_path, exp_trace):
    key = create_cache_key(exp_trace.bf, 0.5)
    path = store_trace(exp_trace, key, tmp_path)
    assert path.exists()
    loaded = load_trace(key, exp_trace.bf, tmp_path)
    assert loaded is not None
    assert loaded.as_dict() == exp_trace.as_dict()


def test_load_trace_missing(tmp_path):
    assert load_trace("missing", load("exp"), tmp_path) is None


@patch("bellman.cache.settings.enable_cache", False)
def test_load_trace_with_cache_disabled(tmp_path, exp_trace):
    store_trace(exp_trace, "key", tmp_path)
    assert not is_cache_enabled()
    assert load_trace("key", exp_trace.bf, tmp_path) is None


@pytest.mark.parametrize(
    "content",
    [
        b"\xc1 not msgpack",
        msgpack.packb({"format_version": "1.0", "trace": {}}),
        msgpack.packb({"format_version": "not a version", "trace": {}}),
        msgpack.packb(["no", "mapping"]),
        msgpack.packb({"format_version": "2.0", "trace": {"eps_target": 0.5}}),
    ],
)
def test_read_trace_file_rejects(tmp_path, content):
    path = tmp_path / "trace.msgpack"
    path.write_bytes(content)
    with pytest.raises(BellmanConfigException):
        read_trace_file(path, load("exp"))


def test_load_trace_discards_outdated_files(tmp_path, caplog):
    path = get_trace_path("old", tmp_path)
    path.write_bytes(msgpack.packb({"format_version": "1.0", "trace": {}}))
    assert load_trace("old", load("exp"), tmp_path) is None
    assert not path.exists()
    assert "Ignoring cached trace" in caplog.text
