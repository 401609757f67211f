import math
from pathlib import Path
from types import SimpleNamespace

import pytest

from bellman.boundary_function import BoundaryFunction
from bellman.candidates import SlopeFunction, TangentsFigure
from bellman.chords import chord_at, chord_coefficients
from bellman.config import load_boundary_function_document
from bellman.constants import EdgeKind, Side, VertexKind
from bellman.evolution import simple_picture
from bellman.exceptions import BellmanConfigException, OutsideStrip
from bellman.foliation import FoliationGraph, assemble, check_admissible, evaluate, locate, minimize_variant
from bellman.foliation.candidate import interface_points
from bellman.foliation.properties import (
    boundary_error,
    coverage,
    gradient_continuity,
    midpoint_concavity,
    monge_ampere_residual,
    property_suite,
    transverse_concavity,
    view_range,
)

SAMPLES_DIR = Path(__file__).parent.parent / "bellman/samples"


def load(name: str) -> BoundaryFunction:
    return BoundaryFunction.from_document(load_boundary_function_document(SAMPLES_DIR / f"{name}.json"))


@pytest.fixture(scope="module")
def sextic_graph():
    return simple_picture(load("sextic_pos_c0"), 0.05)


@pytest.fixture(scope="module")
def exp_graph():
    return simple_picture(load("exp"), 0.5)


def test_simple_picture_of_the_sextic(sextic_graph):
    kinds = sorted(vertex.kind.value for vertex in sextic_graph.vertices.values())
    assert kinds == ["angle", "angle", "fictious_1", "fictious_2", "fictious_4", "fictious_4"]
    assert len(sextic_graph.edges) == 5
    angles = sorted(float(vertex.params["w"]) for vertex in sextic_graph.of_kind(VertexKind.ANGLE))
    assert angles == pytest.approx([-math.sqrt(3), math.sqrt(3)], abs=0.1)
    (cup,) = sextic_graph.of_kind(VertexKind.FICTIOUS_1)
    assert cup.params["b"] - cup.params["a"] == pytest.approx(0.1)
    (base,) = sextic_graph.of_kind(VertexKind.FICTIOUS_2)
    assert base.params["t"] == pytest.approx(0.0, abs=1e-12)
    assert all(vertex.params["emits"] for vertex in sextic_graph.of_kind(VertexKind.FICTIOUS_4))


def test_simple_picture_edges(sextic_graph):
    (chordal,) = sextic_graph.chordal_edges()
    assert sextic_graph.vertices[chordal.source].kind is VertexKind.FICTIOUS_2
    assert sextic_graph.vertices[chordal.target].kind is VertexKind.FICTIOUS_1
    kinds = sorted(edge.kind.value for edge in sextic_graph.tangent_edges())
    assert kinds == ["tangent_L", "tangent_L", "tangent_R", "tangent_R"]
    for edge in sextic_graph.tangent_edges():
        assert sextic_graph.vertices[edge.target].kind is VertexKind.ANGLE


def test_simple_picture_is_admissible(sextic_graph):
    report = check_admissible(sextic_graph)
    assert report.passed, report.failures()


def test_graph_json_round_trip(sextic_graph):
    text = sextic_graph.to_json(indent=2)
    assert '"-inf"' in text
    loaded = FoliationGraph.from_json(text, sextic_graph.bf)
    assert loaded.as_dict() == sextic_graph.as_dict()
    assert all(edge.table is None for edge in loaded.edges.values())


def test_loaded_graph_regrows_its_tables(sextic_graph):
    loaded = FoliationGraph.from_json(sextic_graph.to_json(), sextic_graph.bf)
    original, regrown = assemble(sextic_graph), assemble(loaded)
    for point in [(0.0, 0.001), (-1.0, 1.002), (1.9, 3.611)]:
        assert regrown(*point) == pytest.approx(original(*point), rel=1e-9, abs=1e-12)


@pytest.mark.parametrize(
    "text",
    [
        "{",
        '{"eps": 0.1}',
        '{"eps": 0.1, "vertices": [{"id": "v0", "kind": "pentagon", "params": {}}], "edges": []}',
        '{"eps": 0.1, "vertices": [], "edges": [{"id": "e0", "kind": "chordal", "from": "v0", "to": "v1"}]}',
    ],
)
def test_malformed_graph(text):
    with pytest.raises(BellmanConfigException):
        FoliationGraph.from_json(text)


def test_forest_is_not_admissible():
    graph = FoliationGraph(eps=0.1, bf=load("exp"))
    graph.add_vertex(VertexKind.FICTIOUS_4, side="-inf", ray=None, emits=False)
    graph.add_vertex(VertexKind.FICTIOUS_4, side="inf", ray=None, emits=True)
    report = check_admissible(graph)
    assert not report.passed
    assert [entry.check for entry in report.failures()] == ["tree"]


def test_graph_without_boundary_function(sextic_graph):
    graph = FoliationGraph.from_json(sextic_graph.to_json())
    report = check_admissible(graph)
    assert "boundary_function" in [entry.check for entry in report.failures()]
    with pytest.raises(BellmanConfigException):
        assemble(graph)


def test_upstream_entities(exp_graph):
    (edge,) = exp_graph.edges.values()
    assert edge.kind is EdgeKind.TANGENT_L
    source = exp_graph.vertices[edge.source]
    target = exp_graph.vertices[edge.target]
    assert source.params["side"] == "inf"
    assert target.upstream_entity_ids == [source.id]
    assert edge.upstream_entity_ids == [source.id]
    with pytest.raises(KeyError) as err_info:
        source.param("w")
    assert "has no parameter 'w'" in str(err_info.value)


@pytest.mark.parametrize("x1,lift", [(-2.0, 0.0), (-0.5, 0.3), (0.0, 1.0), (1.2, 0.6)])
def test_exp_candidate_closed_form(exp_graph, x1, lift):
    eps = 0.5
    x2 = x1 * x1 + lift * eps * eps
    u = x1 - eps + math.sqrt(x1 * x1 + eps * eps - x2)
    value, _, d2 = evaluate(assemble(exp_graph), x1, x2)
    assert value == pytest.approx(math.exp(u) * (1 + (x1 - u) / (1 - eps)), rel=1e-10)
    assert d2 == pytest.approx(math.exp(u) / (2 * (1 - eps)), rel=1e-10)


def test_locate(sextic_graph):
    candidate = assemble(sextic_graph)
    (chordal,) = sextic_graph.chordal_edges()
    assert locate(candidate, 0.0, 0.001) == chordal.id
    assert candidate.locate(-1.7, 2.89 + 0.001) in {edge.id for edge in sextic_graph.tangent_edges()} | {
        vertex.id for vertex in sextic_graph.of_kind(VertexKind.ANGLE)
    }
    with pytest.raises(OutsideStrip):
        locate(candidate, 0.0, 1.0)
    with pytest.raises(OutsideStrip):
        candidate.eval(1.0, 0.5)


def test_candidate_matches_the_boundary(sextic_graph):
    candidate = assemble(sextic_graph)
    bf = sextic_graph.bf
    for t in (-3.0, -1.7, -0.04, 0.0, 0.02, 1.0, 2.5):
        assert candidate(t, t * t) == pytest.approx(float(bf(t)), abs=1e-10 * (1 + abs(float(bf(t)))))


def test_sextic_properties(sextic_graph):
    candidate = assemble(sextic_graph)
    assert boundary_error(candidate, 300).passed
    assert coverage(candidate, 1000).passed
    assert midpoint_concavity(candidate, 300).passed
    assert gradient_continuity(candidate).passed


def test_exp_property_suite(exp_graph):
    report = property_suite(assemble(exp_graph), samples=200)
    assert report.passed, [check.as_dict() for check in report.failures]
    assert [check["name"] for check in report.as_dict()["checks"]] == [
        "boundary",
        "midpoint_concavity",
        "gradient_continuity",
        "monge_ampere",
        "transverse_concavity",
        "coverage",
    ]


def test_view_range(sextic_graph):
    lo, hi = view_range(assemble(sextic_graph))
    assert lo < -math.sqrt(3) - 2 and hi > math.sqrt(3) + 2


def test_interface_points(sextic_graph):
    (chordal,) = sextic_graph.chordal_edges()
    points = interface_points(sextic_graph, chordal, samples=4)
    assert len(points) == 4
    for x1, x2 in points:
        assert x2 > x1 * x1


def test_minimize_variant():
    bf = load("sextic_pos_c0")
    assert minimize_variant(bf)(1.3) == pytest.approx(-float(bf(1.3)))


def test_points_on_the_top_chord_of_a_full_cup(sextic_graph):
    candidate = assemble(sextic_graph)
    (chordal,) = sextic_graph.chordal_edges()
    figure = candidate.figure(chordal.id)
    top = chord_at(figure.table, figure.l_hi)
    g0, g1, g2 = chord_coefficients(sextic_graph.bf, top.a, top.b)
    for x1 in (-0.04375, 0.0, 0.03):
        for x2 in (top.height(x1), top.height(x1) + 1e-11):
            value, _, d2 = figure.evaluate(x1, x2)
            assert value == pytest.approx(g0 + g1 * x1 + g2 * x2, abs=1e-12)
            assert d2 == pytest.approx(g2)
    assert locate(candidate, -0.04375, top.height(-0.04375))


def _quadratic_candidate(curvature: float) -> SimpleNamespace:
    return SimpleNamespace(
        graph=SimpleNamespace(vertices={}),
        eps=0.5,
        locate=lambda x1, x2: "q",
        eval=lambda x1, x2: (0.0, curvature * x1, curvature * x2),
    )


@pytest.mark.parametrize("curvature, passed", [(0.0, True), (1e-4, False), (1.0, False)])
def test_monge_ampere_residual_is_relative_to_the_hessian(curvature, passed):
    check = monge_ampere_residual(_quadratic_candidate(curvature), count=50)
    assert check.samples > 0
    assert check.passed is passed


def test_transverse_concavity_of_the_tangent_families():
    bf = load("exp")
    left = TangentsFigure(SlopeFunction.from_infinity(bf, Side.LEFT, 0.5), -math.inf, math.inf, ident="left")
    right = TangentsFigure(SlopeFunction.from_infinity(bf, Side.RIGHT, 0.5), -math.inf, math.inf, ident="right")
    assert transverse_concavity(SimpleNamespace(figures=[left])).passed
    check = transverse_concavity(SimpleNamespace(figures=[left, right]))
    assert not check.passed
    assert check.samples == 64
