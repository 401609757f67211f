"""
End-to-end checks of the constructed Bellman functions against known closed forms, critical radii, the property
suite, optimizer identities and the grid oracle.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pytest

from bellman.boundary_function import BoundaryFunction
from bellman.config import GridConfig, load_boundary_function_document
from bellman.constants import EdgeKind, Side
from bellman.evolution import evolve, simple_picture
from bellman.foliation import assemble
from bellman.foliation.properties import property_suite, random_points
from bellman.forces import Force, balance_root
from bellman.optimizers import optimizer_at, verify_optimizer
from bellman.oracle import compare, grid_minimal_concave

SAMPLES_DIR = Path(__file__).parent.parent.parent / "bellman/samples"

SHIPPED_RADII = {
    "exp": 0.5,
    "quadratic": 0.5,
    "quartic_pos": 0.5,
    "quartic_neg": 0.8,
    "quintic": 0.5,
    "sextic_pos_c0": 0.5,
    "sextic_pos_c05": 0.5,
    "sextic_neg_c0": 1.0,
    "sextic_neg_c05": 1.0,
    "solid_root_cubic": 0.5,
    "abs_cubic": 0.5,
    "escaping_angle": 0.5,
    "sine_monster": 0.05,
}


def load(name: str) -> BoundaryFunction:
    return BoundaryFunction.from_document(load_boundary_function_document(SAMPLES_DIR / f"{name}.json"))


def candidate_of(name: str):
    eps = SHIPPED_RADII[name]
    return assemble(evolve(load(name), eps).graph_at(eps))


def assert_criticals(name: str, eps_target: float, expected: list[float]) -> None:
    radii = [point.eps for point in evolve(load(name), eps_target).critical_points]
    for value in expected:
        assert min(abs(radius - value) for radius in radii) < 1e-6, (value, radii)


@pytest.mark.perf
@pytest.mark.parametrize("eps", [0.3, 0.5, 0.9])
def test_exponential_closed_form(eps):
    trace = evolve(load("exp"), eps)
    graph = trace.final_graph
    (edge,) = graph.edges.values()
    assert edge.kind is EdgeKind.TANGENT_L
    assert (edge.params["lo"], edge.params["hi"]) == (-math.inf, math.inf)
    candidate = assemble(graph)
    for x1, x2 in random_points(candidate, 100, np.random.default_rng(5)):
        u = x1 - eps + math.sqrt(max(x1 * x1 + eps * eps - x2, 0.0))
        expected = math.exp(u) * (1 + (x1 - u) / (1 - eps))
        assert candidate(x1, x2) == pytest.approx(expected, rel=1e-10)


@pytest.mark.perf
def test_sextic_positive_criticals():
    assert_criticals("sextic_pos_c0", 0.75, [math.sqrt(35) / 9, 1 / math.sqrt(2)])


@pytest.mark.perf
def test_sextic_negative_criticals():
    assert_criticals("sextic_neg_c0", 2.8, [math.sqrt(15 / 8), math.sqrt(15 / 2)])


@pytest.mark.perf
def test_quintic_criticals():
    assert_criticals("quintic", 1.1, [math.sqrt(1225 / 1614), 1.0])


@pytest.mark.perf
@pytest.mark.parametrize("eps", [0.2, 0.5, 1.0])
def test_stable_angle_of_the_absolute_cubic(eps):
    bf = load("abs_cubic")
    right, left = Force.of_infinity(bf, Side.RIGHT, eps), Force.of_infinity(bf, Side.LEFT, eps)
    assert abs(balance_root(right, left, (-math.inf, math.inf))) < 1e-8


@pytest.mark.perf
@pytest.mark.parametrize("eps", [0.5, 1.5, 1.9])
def test_escaping_angle(eps):
    bf = load("escaping_angle")
    right, left = Force.of_infinity(bf, Side.RIGHT, eps), Force.of_infinity(bf, Side.LEFT, eps)
    expected = eps / (eps - 1) * math.log(2 / ((2 - eps) * (1 + eps)))
    assert balance_root(right, left, (-10.0, 10.0)) == pytest.approx(expected, abs=1e-6)


@pytest.mark.perf
def test_escaped_angle():
    bf = load("escaping_angle")
    right, left = Force.of_infinity(bf, Side.RIGHT, 2.1), Force.of_infinity(bf, Side.LEFT, 2.1)
    assert balance_root(right, left, (-10.0, 10.0)) is None


@pytest.mark.perf
@pytest.mark.parametrize("name", sorted(SHIPPED_RADII))
def test_property_suite_of_shipped_examples(name):
    report = property_suite(candidate_of(name))
    assert report.passed, report.as_dict()


@pytest.mark.perf
@pytest.mark.parametrize("name", sorted(SHIPPED_RADII))
def test_optimizers_of_shipped_examples(name):
    candidate = candidate_of(name)
    for point in random_points(candidate, 200, np.random.default_rng(6)):
        report = verify_optimizer(optimizer_at(candidate, *point), point, candidate)
        assert report.passed, report.as_dict()


@pytest.mark.perf
def test_oracle_of_a_quadratic():
    bf = load("quadratic")
    candidate = assemble(simple_picture(bf, 0.5))
    grid = GridConfig(x1_min=-2.0, x1_max=2.0, n1=81, n2=17)
    comparison = compare(candidate, grid_minimal_concave(bf, 0.5, grid, edge_values=candidate))
    assert comparison.max_abs <= 1e-10


@pytest.mark.perf
def test_oracle_of_the_exponential():
    bf = load("exp")
    candidate = assemble(simple_picture(bf, 0.5))
    fine_grid = GridConfig(x1_min=-4.0, x1_max=2.0, n1=200, n2=40)
    coarse_grid = GridConfig(x1_min=-4.0, x1_max=2.0, n1=100, n2=20)
    fine = compare(candidate, grid_minimal_concave(bf, 0.5, fine_grid, edge_values=candidate))
    coarse = compare(candidate, grid_minimal_concave(bf, 0.5, coarse_grid, edge_values=candidate))
    assert fine.max_abs <= 5e-3
    assert coarse.max_abs >= 1.8 * fine.max_abs


@pytest.mark.perf
def test_oracle_of_the_sextic():
    bf = load("sextic_pos_c0")
    candidate = assemble(evolve(bf, 0.3).graph_at(0.3))
    grid_values = grid_minimal_concave(bf, 0.3, GridConfig(n1=300, n2=50), edge_values=candidate)
    assert compare(candidate, grid_values).max_rel <= 1e-2
