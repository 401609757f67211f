import json
import math
from pathlib import Path

import pytest

from bellman.config import (
    BoundaryFunctionDocument,
    GridConfig,
    SweepConfig,
    Tolerances,
    load_boundary_function_document,
    load_run_config,
    parse_boundary_function_document,
)
from bellman.constants import TOL_CUP
from bellman.exceptions import BellmanConfigException

SAMPLE_DIR = Path(__file__).parent / "sample"
SAMPLE_RUN_EXP = SAMPLE_DIR / "run_exp.json"
SAMPLE_RUN_QUADRATIC = SAMPLE_DIR / "run_quadratic.json"
SAMPLE_BF_MALFORMED = SAMPLE_DIR / "bf_malformed.json"
SAMPLE_BF_GAP = SAMPLE_DIR / "bf_gap.json"
SHIPPED_SAMPLES_DIR = Path(__file__).parent.parent / "bellman/samples"


def test_load_run_config_with_referenced_boundary_function():
    config = load_run_config(SAMPLE_RUN_EXP)
    assert config.boundary_function.name == "exp"
    assert config.boundary_function.eps_inf == 0.99
    assert config.eps == 0.5
    assert config.sweep == SweepConfig(start=0.3, stop=0.5, samples=3)
    assert config.points == [(0.0, 0.0), (0.0, 0.1), (1.0, 1.2)]
    assert config.tolerances.tol_glue == 1e-7
    assert config.tolerances.tol_cup == TOL_CUP
    assert config.source == str(SAMPLE_RUN_EXP)


def test_load_run_config_with_inline_boundary_function():
    config = load_run_config(SAMPLE_RUN_QUADRATIC)
    assert config.boundary_function.eps_inf == math.inf
    assert config.boundary_function.pieces[0].lo == -math.inf
    assert config.grid == GridConfig(x1_min=-2.0, x1_max=2.0, n1=41, n2=9)


def test_load_run_config_from_bare_boundary_function():
    config = load_run_config(SHIPPED_SAMPLES_DIR / "quintic.json", eps=0.4)
    assert config.eps == 0.4
    assert config.boundary_function.pieces[0].poly == [0.0, 0.0, 0.0, -10.0, 0.0, 1.0]
    assert config.out_dir == "out"


def test_overrides_ignore_none():
    config = load_run_config(SAMPLE_RUN_EXP, eps=None, out_dir="elsewhere", jobs=None)
    assert config.eps == 0.5
    assert config.out_dir == "elsewhere"
    assert config.jobs == 1


@pytest.mark.parametrize("eps", [0.99, 1.5, -0.1])
def test_eps_outside_the_summability_radius(eps):
    with pytest.raises(BellmanConfigException) as err_info:
        load_run_config(SAMPLE_RUN_EXP, eps=eps)
    assert "eps_inf" in str(err_info.value) or "eps=" in str(err_info.value)


def test_malformed_json():
    with pytest.raises(BellmanConfigException) as err_info:
        load_boundary_function_document(SAMPLE_BF_MALFORMED)
    assert "Malformed JSON" in str(err_info.value)
    assert "line" in str(err_info.value)


def test_missing_file():
    with pytest.raises(BellmanConfigException) as err_info:
        load_run_config(SAMPLE_DIR / "missing.json")
    assert "File not found" in str(err_info.value)


def test_pieces_must_be_contiguous():
    with pytest.raises(BellmanConfigException) as err_info:
        load_boundary_function_document(SAMPLE_BF_GAP)
    assert "not contiguous" in str(err_info.value)


@pytest.mark.parametrize(
    "content, message",
    [
        ([], "JSON object"),
        ({"eps_inf": 1.0, "pieces": []}, "at least one piece"),
        ({"eps_inf": 1.0, "pieces": [{"lo": 0.0, "hi": "inf"}]}, "whole real line"),
        ({"eps_inf": 0.0, "pieces": [{"lo": "-inf", "hi": "inf"}]}, "eps_inf must be positive"),
        ({"eps_inf": 1.0, "pieces": [{"lo": "-inf", "hi": "inf", "poly": "x"}]}, "Invalid boundary-function"),
    ],
)
def test_parse_boundary_function_document_errors(content, message):
    with pytest.raises(BellmanConfigException) as err_info:
        parse_boundary_function_document(content)
    assert message in str(err_info.value)


def test_document_version_is_stable_and_content_based():
    content = json.loads((SHIPPED_SAMPLES_DIR / "exp.json").read_text())
    first = parse_boundary_function_document(content)
    second = parse_boundary_function_document(json.loads(json.dumps(content)))
    assert first.version == second.version
    content["eps_inf"] = 0.5
    assert parse_boundary_function_document(content).version != first.version


def test_as_dict_encodes_infinities():
    document = BoundaryFunctionDocument(pieces=[{"lo": "-inf", "hi": "inf", "poly": [1.0]}], eps_inf="inf")
    content = document.as_dict()
    assert content["eps_inf"] == "inf"
    assert content["pieces"][0]["lo"] == "-inf"
    assert parse_boundary_function_document(content).version == document.version


def test_sweep_values():
    assert SweepConfig(start=0.1, stop=0.5, samples=5).values() == pytest.approx([0.1, 0.2, 0.3, 0.4, 0.5])
    assert SweepConfig(start=0.1, stop=0.5, samples=1).values() == [0.5]
    with pytest.raises(BellmanConfigException):
        SweepConfig(start=0.5, stop=0.1)


def test_grid_and_tolerance_validation():
    with pytest.raises(BellmanConfigException):
        GridConfig(x1_min=1.0, x1_max=0.0)
    with pytest.raises(BellmanConfigException):
        GridConfig(n1=4)
    with pytest.raises(BellmanConfigException) as err_info:
        Tolerances(tol_cup=0.0)
    assert "tol_cup" in str(err_info.value)


def test_radii_and_eps_target():
    config = load_run_config(SAMPLE_RUN_EXP)
    assert config.radii() == pytest.approx([0.5, 0.3, 0.4, 0.5])
    assert config.eps_target == 0.5


@pytest.mark.parametrize("path", sorted(SHIPPED_SAMPLES_DIR.glob("*.json")), ids=lambda path: path.stem)
def test_shipped_samples_parse(path):
    document = load_boundary_function_document(path)
    assert document.name == path.stem
