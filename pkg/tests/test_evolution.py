import math
from pathlib import Path

import attr
import pytest

from bellman.boundary_function import BoundaryFunction
from bellman.candidates import single_tangent_coefficients
from bellman.chords import chord_at, chord_coefficients, grow_chordal_domain, make_chord
from bellman.config import load_boundary_function_document
from bellman.constants import EdgeKind, EventKind, FigureKind, KnotKind, VertexKind
from bellman.evolution import (
    Chain,
    ChordalStack,
    ClosedMulticup,
    CriticalPoint,
    Event,
    EvolutionTrace,
    InnerChord,
    Knot,
    attempt,
    chain_events,
    chain_graph,
    crossover_index,
    detect_critical,
    evolve,
    modify_at_critical,
    simple_chain,
    simple_picture,
    step_first_kind,
    sweep,
)
from bellman.exceptions import Divergent, OutOfRange, StepTooLarge, UnknownConfiguration
from bellman.foliation import assemble, check_admissible

SAMPLES_DIR = Path(__file__).parent.parent / "bellman/samples"


def load(name: str) -> BoundaryFunction:
    return BoundaryFunction.from_document(load_boundary_function_document(SAMPLES_DIR / f"{name}.json"))


def test_simple_picture_of_the_exponential():
    graph = simple_picture(load("exp"), 0.3)
    assert [vertex.kind for vertex in graph.vertices.values()] == [VertexKind.FICTIOUS_4, VertexKind.FICTIOUS_4]
    (edge,) = graph.edges.values()
    assert edge.kind is EdgeKind.TANGENT_L
    assert (edge.params["lo"], edge.params["hi"]) == (-math.inf, math.inf)


def test_simple_picture_of_a_quadratic_is_exact():
    graph = simple_picture(load("quadratic"), 0.5)
    (edge,) = graph.edges.values()
    assert edge.kind is EdgeKind.TANGENT_R
    assert check_admissible(graph).passed
    candidate = assemble(graph)
    for x1, x2 in [(-3.0, 9.1), (0.0, 0.25), (2.0, 4.0)]:
        assert candidate.eval(x1, x2) == pytest.approx((x2, 0.0, 1.0), abs=1e-12)


def test_simple_picture_of_the_sine_monster():
    graph = simple_picture(load("sine_monster"), 0.05)
    rays = sorted(vertex.params["ray"] for vertex in graph.of_kind(VertexKind.FICTIOUS_4))
    assert rays == pytest.approx([-1.5 * math.pi, 1.5 * math.pi])
    angles = sorted(vertex.params["w"] for vertex in graph.of_kind(VertexKind.ANGLE))
    assert angles == pytest.approx([-math.pi, math.pi], abs=0.1)
    (cup,) = graph.of_kind(VertexKind.FICTIOUS_1)
    assert 0.5 * (cup.params["a"] + cup.params["b"]) == pytest.approx(0.0, abs=1e-9)
    figures = [figure.kind for figure in assemble(graph).figures]
    assert figures.count(FigureKind.MULTICUP) == 2
    assert figures.count(FigureKind.ANGLE) == 2


def test_simple_picture_of_a_long_solid_root():
    graph = simple_picture(load("solid_root_cubic"), 0.5)
    (multicup,) = graph.of_kind(VertexKind.MULTICUP)
    assert multicup.params["arcs"] == [[-1.0, 1.0]]
    assert not list(graph.chordal_edges())
    assert check_admissible(graph).passed


def test_simple_picture_of_a_short_solid_root():
    graph = simple_picture(load("solid_root_cubic"), 1.5)
    (chordal,) = graph.chordal_edges()
    assert chordal.params["seed_kind"] == "over_hull"
    assert graph.vertices[chordal.source].kind is VertexKind.CLOSED_MULTICUP
    assert check_admissible(graph).passed


@pytest.mark.parametrize("name, origins", [("quintic", [-1.0]), ("sextic_neg_c0", [-math.sqrt(3), math.sqrt(3)])])
def test_simple_picture_grows_cups_at_polynomial_roots(name, origins):
    graph = simple_picture(load(name), 0.05)
    cups = sorted(graph.of_kind(VertexKind.FICTIOUS_1), key=lambda vertex: vertex.params["a"])
    assert [0.5 * (cup.params["a"] + cup.params["b"]) for cup in cups] == pytest.approx(origins, abs=1e-2)
    assert all(cup.params["b"] - cup.params["a"] == pytest.approx(0.1) for cup in cups)
    assert check_admissible(graph).passed


def test_evolve_quintic_below_its_first_critical_radius():
    trace = evolve(load("quintic"), 0.3)
    assert trace.critical_points == []
    (cup,) = trace.final_graph.of_kind(VertexKind.FICTIOUS_1)
    assert cup.params["b"] - cup.params["a"] == pytest.approx(0.6)


def test_simple_chain_knots():
    chain = simple_chain(load("sextic_pos_c0"), 0.05)
    assert [knot.kind for knot in chain.knots] == [
        KnotKind.NEG_INF,
        KnotKind.ANGLE,
        KnotKind.FULL_CHORDAL,
        KnotKind.ANGLE,
        KnotKind.POS_INF,
    ]
    assert chain.knots[2].chord.length == pytest.approx(0.1)
    assert all(event.value > 0 for event in chain_events(chain))


def test_step_first_kind():
    chain = simple_chain(load("sextic_pos_c0"), 0.05, l_max=2.0)
    stepped = step_first_kind(chain, 0.1)
    assert stepped.eps == 0.1
    assert stepped.knots[2].chord.length == pytest.approx(0.2)
    assert stepped.knots[3].w > stepped.knots[2].chord.b
    with pytest.raises(StepTooLarge):
        step_first_kind(chain, 0.7)


def test_detect_critical_of_the_sextic():
    chain = simple_chain(load("sextic_pos_c0"), 0.05, l_max=2.0)
    lower, upper = attempt(chain, 0.6), attempt(chain, 0.7)
    assert lower.ok and not upper.ok
    bracket = detect_critical(lower, upper)
    assert bracket is not None
    assert bracket.eps == pytest.approx(math.sqrt(35) / 9, abs=1e-6)
    assert bracket.events
    assert detect_critical(lower, attempt(chain, 0.61)) is None


def test_evolve_exponential_has_no_critical_points():
    trace = evolve(load("exp"), 0.9)
    assert trace.critical_points == []
    assert len(trace.final_graph.edges) == 1
    assert trace.graph_at(0.3).eps == 0.3


def test_evolve_symmetric_cup():
    trace = evolve(load("quartic_neg"), 1.0)
    assert trace.critical_points == []
    (cup,) = trace.final_graph.of_kind(VertexKind.FICTIOUS_1)
    assert cup.params["b"] - cup.params["a"] == pytest.approx(2.0)
    assert cup.params["a"] == pytest.approx(-1.0, abs=1e-9)


def test_evolve_beyond_summability():
    with pytest.raises(Divergent):
        evolve(load("exp"), 0.99)


def test_trace_round_trip():
    bf = load("exp")
    trace = evolve(bf, 0.5)
    loaded = EvolutionTrace.from_dict(trace.as_dict(), bf)
    assert loaded.eps_target == 0.5
    assert [segment.eps_lo for segment in loaded.segments] == [segment.eps_lo for segment in trace.segments]
    assert loaded.graph_at(0.5).as_dict() == trace.graph_at(0.5).as_dict()
    with pytest.raises(OutOfRange):
        loaded.graph_at(0.6)
    with pytest.raises(OutOfRange):
        loaded.graph_at(0.0)


def test_sweep():
    graphs = sweep(load("exp"), [0.2, 0.4])
    assert [graph.eps for graph in graphs] == [0.2, 0.4]


@pytest.fixture
def cup_stack():
    return ChordalStack(grow_chordal_domain(load("quartic_neg"), 0.0, 2.0))


def _inner(bf, stack, a, b):
    chord = make_chord(bf, a, b)
    return InnerChord(stack, chord.length, chord)


def _closed(bf, arcs, inner):
    return ClosedMulticup(tuple(arcs), tuple(inner), chord_coefficients(bf, arcs[0][0], arcs[-1][1]))


def _crash(chain, position):
    return modify_at_critical(chain, [Event(EventKind.TROLLEYBUS_BASE_ZERO, position, 0.0)], chain.eps)


@pytest.mark.parametrize(
    "kind, formed",
    [(KnotKind.TROLLEYBUS_R, VertexKind.MULTITROLLEYBUS_R), (KnotKind.TROLLEYBUS_L, VertexKind.MULTITROLLEYBUS_L)],
)
def test_trolleybus_over_a_closed_multicup_splits_into_a_parade(cup_stack, kind, formed):
    bf = load("quartic_neg")
    inner = [_inner(bf, cup_stack, -0.8, -0.4), _inner(bf, cup_stack, 0.1, 0.6)]
    closed = _closed(bf, [(-0.8, -0.8), (-0.4, 0.1), (0.6, 0.6)], inner)
    hull = make_chord(bf, -0.8, 0.6)
    trolleybus = Knot(kind, stack=ChordalStack(cup_stack.table, base=closed), length=hull.length, chord=hull)
    right = kind is KnotKind.TROLLEYBUS_R
    knots = [Knot(KnotKind.NEG_INF, emits=right), trolleybus, Knot(KnotKind.POS_INF, emits=not right)]
    chain = Chain(bf, 0.7, knots, 2.0)
    modified = _crash(chain, 1)
    assert [knot.kind for knot in modified.knots] == [KnotKind.NEG_INF, kind, kind, KnotKind.POS_INF]
    assert [knot.chord for knot in modified.knots[1:3]] == [chord.chord for chord in inner]
    assert modified.formed == (formed,)


def test_trolleybus_over_a_single_arc_leaves_the_tangents(cup_stack):
    bf = load("quartic_neg")
    closed = _closed(bf, [(-0.3, 0.3)], [])
    hull = make_chord(bf, -0.3, 0.3)
    trolleybus = Knot(KnotKind.TROLLEYBUS_R, stack=ChordalStack(cup_stack.table, base=closed), length=0.6, chord=hull)
    chain = Chain(bf, 0.5, [Knot(KnotKind.NEG_INF, emits=True), trolleybus, Knot(KnotKind.POS_INF)], 2.0)
    modified = _crash(chain, 1)
    assert [knot.kind for knot in modified.knots] == [KnotKind.NEG_INF, KnotKind.POS_INF]
    assert modified.formed == (VertexKind.MULTITROLLEYBUS_R,)


def test_parade_touching_at_a_point_has_a_single_tangent(cup_stack):
    bf = load("quartic_neg")
    inner = [_inner(bf, cup_stack, -0.9, -0.2), _inner(bf, cup_stack, -0.2, 0.5)]
    closed = _closed(bf, [(-0.9, -0.9), (-0.2, -0.2), (0.5, 0.5)], inner)
    hull = make_chord(bf, -0.9, 0.5)
    trolleybus = Knot(
        KnotKind.TROLLEYBUS_R, stack=ChordalStack(cup_stack.table, base=closed), length=hull.length, chord=hull
    )
    chain = Chain(bf, 0.7, [Knot(KnotKind.NEG_INF, emits=True), trolleybus, Knot(KnotKind.POS_INF)], 2.0)
    modified = _crash(chain, 1)
    assert modified.formed == (VertexKind.MULTITROLLEYBUS_R, VertexKind.FICTIOUS_5)
    graph = chain_graph(modified)
    (single,) = graph.of_kind(VertexKind.FICTIOUS_5)
    assert single.params == {"u": -0.2, "side": "right"}
    (incoming,) = graph.incoming(single.id, EdgeKind.TANGENT_R)
    (outgoing,) = graph.outgoing(single.id, EdgeKind.TANGENT_R)
    assert graph.vertices[incoming.source].kind is VertexKind.TROLLEYBUS_R
    assert graph.vertices[outgoing.target].kind is VertexKind.TROLLEYBUS_R
    figure = assemble(graph, check_glue=False).figure(single.id)
    assert figure.kind is FigureKind.SINGLE_TANGENT
    assert figure.beta == pytest.approx(single_tangent_coefficients(bf, -0.2))


def test_trolleybus_dying_over_its_cup_leaves_a_single_tangent(cup_stack):
    bf = load("quartic_neg")
    chord = chord_at(cup_stack.table, 0.2)
    trolleybus = Knot(KnotKind.TROLLEYBUS_R, stack=cup_stack, length=0.2, chord=chord)
    chain = Chain(bf, 0.5, [Knot(KnotKind.NEG_INF, emits=True), trolleybus, Knot(KnotKind.POS_INF)], 2.0)
    modified = _crash(chain, 1)
    assert [knot.kind for knot in modified.knots] == [KnotKind.NEG_INF, KnotKind.POS_INF]
    assert modified.formed == (VertexKind.FICTIOUS_5,)


def test_trolleybus_passes_a_pasted_chord(cup_stack):
    bf = load("quartic_neg")
    chord = chord_at(cup_stack.table, 1.0)
    upper = ChordalStack(cup_stack.table, below=cup_stack)
    trolleybus = Knot(KnotKind.TROLLEYBUS_L, stack=upper, length=1.0, chord=chord)
    chain = Chain(bf, 0.6, [Knot(KnotKind.NEG_INF), trolleybus, Knot(KnotKind.POS_INF, emits=True)], 2.0)
    modified = _crash(chain, 1)
    (knot,) = modified.knots[1:-1]
    assert knot.kind is KnotKind.TROLLEYBUS_L
    assert knot.stack is cup_stack
    assert knot.chord is chord
    assert modified.formed == ()


def test_birdie_over_a_point_multicup_becomes_an_angle(cup_stack):
    bf = load("quartic_neg")
    closed = _closed(bf, [(0.3, 0.3)], [])
    point = make_chord(bf, 0.3, 0.3)
    birdie = Knot(KnotKind.BIRDIE, stack=ChordalStack(cup_stack.table, base=closed), length=0.0, chord=point)
    chain = Chain(bf, 0.5, [Knot(KnotKind.NEG_INF, emits=True), birdie, Knot(KnotKind.POS_INF, emits=True)], 2.0)
    modified = _crash(chain, 1)
    assert [knot.kind for knot in modified.knots] == [KnotKind.NEG_INF, KnotKind.ANGLE, KnotKind.POS_INF]
    assert modified.knots[1].w == pytest.approx(0.3)
    assert modified.formed == (VertexKind.MULTIBIRDIE,)
    solid = Chain(
        bf,
        0.5,
        [
            Knot(KnotKind.NEG_INF, emits=True),
            attr.evolve(birdie, stack=ChordalStack(cup_stack.table, base=_closed(bf, [(-0.3, 0.3)], []))),
            Knot(KnotKind.POS_INF, emits=True),
        ],
        2.0,
    )
    with pytest.raises(UnknownConfiguration):
        _crash(solid, 1)


@pytest.mark.parametrize(
    "right, left, expected",
    [
        ([0.1, 0.2, 0.3], [0.2, 0.3, 0.1], 2),
        ([0.1, 0.2, 0.3], [0.2, 0.2, 0.1], 1),
        ([0.3, 0.3, 0.3], [0.2, 0.2, 0.2], 0),
        ([0.1, 0.1], None, 2),
        (None, [0.1, 0.1], 0),
    ],
)
def test_multibirdie_crossover(right, left, expected):
    assert crossover_index(right, left, 2 if left is None or right is None else 3) == expected


def test_critical_point_keeps_the_figures_it_formed():
    bf = load("exp")
    trace = evolve(bf, 0.3)
    graph = trace.final_graph
    trace.critical_points.append(
        CriticalPoint(0.2, ("trolleybus_base_zero",), ("trolleybus",), True, graph, graph, ("multitrolleybus_R",))
    )
    loaded = EvolutionTrace.from_dict(trace.as_dict(), bf)
    assert loaded.critical_points[0].formed == ("multitrolleybus_R",)
