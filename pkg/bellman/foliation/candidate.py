from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Optional, Tuple

from bellman.boundary_function import BoundaryFunction
from bellman.candidates import (
    ChordalFigure,
    Evaluation,
    FigureCandidate,
    LinearityFigure,
    Region,
    SlopeFunction,
    TangentsFigure,
    angle_coefficients,
    chord_segment,
    glue_check,
    quadratic_coefficients,
    single_tangent_coefficients,
    slope_eval,
    tangent_segment,
)
from bellman.chords import ChordalDomainTable, chord_coefficients, grow_chordal_domain, make_chord
from bellman.constants import TOL_GLUE, EdgeKind, FigureKind, Side, TableKind, VertexKind
from bellman.exceptions import BellmanConfigException, GlueFailure, OutsideFigure, OutsideStrip
from bellman.foliation.entities import Edge, Vertex
from bellman.foliation.graph import TANGENT_SIDES, FoliationGraph
from bellman.log import get_logger

logger = get_logger(__name__)

LOCATE_TOLERANCES = (1e-12, 1e-9, 1e-6)


@lru_cache(maxsize=256)
def _grown_table(bf: BoundaryFunction, kind: TableKind, a: float, b: float, l_max: float) -> ChordalDomainTable:
    if kind is TableKind.CUP:
        return grow_chordal_domain(bf, a, l_max)
    return grow_chordal_domain(bf, make_chord(bf, a, b), l_max, kind=kind)


def edge_table(graph: FoliationGraph, edge: Edge) -> ChordalDomainTable:
    """The table of a chordal edge: the one kept in memory, or regrown from the serialized seed."""
    if edge.table is not None:
        return edge.table
    if graph.bf is None:
        raise BellmanConfigException("The graph carries no boundary function.")
    a, b = (float(value) for value in edge.params["seed"])
    kind = TableKind(edge.params["seed_kind"])
    edge.table = _grown_table(graph.bf, kind, a, b, float(edge.params["l_hi"]))
    return edge.table


def _arcs(vertex: Vertex) -> List[Tuple[float, float]]:
    return [(float(lo), float(hi)) for lo, hi in vertex.params["arcs"]]


def _inner_chords(arcs: List[Tuple[float, float]]) -> Tuple[Tuple[float, float], ...]:
    return tuple((arcs[index][1], arcs[index + 1][0]) for index in range(len(arcs) - 1))


@dataclass
class BellmanCandidate:
    """
    A Bellman candidate assembled from a foliation graph: one figure per vertex or edge that covers area.

    :param graph: The graph the candidate was assembled from
    :param figures: The figures, in the order ``locate`` tries them
    """

    graph: FoliationGraph
    figures: List[FigureCandidate] = field(default_factory=list)
    index: Dict[str, int] = field(default_factory=dict)

    @property
    def eps(self) -> float:
        return self.graph.eps

    def add(self, figure: FigureCandidate) -> None:
        self.index[figure.ident] = len(self.figures)
        self.figures.append(figure)

    def figure(self, ident: str) -> FigureCandidate:
        return self.figures[self.index[ident]]

    def locate(self, x1: float, x2: float) -> str:
        return locate(self, x1, x2)

    def eval(self, x1: float, x2: float) -> Evaluation:
        return evaluate(self, x1, x2)

    def __call__(self, x1: float, x2: float) -> float:
        return evaluate(self, x1, x2)[0]


def _linearity_figure(graph: FoliationGraph, vertex: Vertex) -> Optional[LinearityFigure]:
    bf = graph.bf
    assert bf is not None
    eps = graph.eps
    params = vertex.params
    if vertex.kind is VertexKind.ANGLE:
        w = float(params["w"])
        (right,) = graph.incoming(vertex.id, EdgeKind.TANGENT_R)
        (left,) = graph.incoming(vertex.id, EdgeKind.TANGENT_L)
        m_right = slope_eval(SlopeFunction(graph.tangent_force(right)), w)[0]
        m_left = slope_eval(SlopeFunction(graph.tangent_force(left)), w)[0]
        beta = angle_coefficients(bf, w, m_right, m_left, eps)
        return LinearityFigure(FigureKind.ANGLE, beta, Region(right_lo=w, left_hi=w), eps, vertex.id)
    if vertex.kind in (VertexKind.TROLLEYBUS_R, VertexKind.TROLLEYBUS_L, VertexKind.BIRDIE):
        a, b = float(params["a"]), float(params["b"])
        beta = chord_coefficients(bf, a, b)
        if vertex.kind is VertexKind.TROLLEYBUS_R:
            region = Region(right_lo=a, right_hi=b, floors=((a, b),))
            kind = FigureKind.TROLLEYBUS_R
        elif vertex.kind is VertexKind.TROLLEYBUS_L:
            region = Region(left_lo=a, left_hi=b, floors=((a, b),))
            kind = FigureKind.TROLLEYBUS_L
        else:
            region = Region(right_lo=a, left_hi=b, floors=((a, b),))
            kind = FigureKind.BIRDIE
        return LinearityFigure(kind, beta, region, eps, vertex.id)
    if vertex.kind in (VertexKind.MULTICUP, VertexKind.CLOSED_MULTICUP):
        arcs = _arcs(vertex)
        beta = tuple(float(value) for value in params["beta"])
        floors = _inner_chords(arcs)
        lo, hi = arcs[0][0], arcs[-1][1]
        if vertex.kind is VertexKind.CLOSED_MULTICUP:
            region = Region(floors=floors, ceiling=(lo, hi))
            return LinearityFigure(FigureKind.CLOSED_MULTICUP, beta, region, eps, vertex.id)  # type: ignore[arg-type]
        region = Region(left_lo=lo, right_hi=hi, floors=floors)
        return LinearityFigure(FigureKind.MULTICUP, beta, region, eps, vertex.id)  # type: ignore[arg-type]
    if vertex.kind is VertexKind.FICTIOUS_4 and params.get("ray") is not None:
        ray = float(params["ray"])
        beta = quadratic_coefficients(bf, ray, 0.5 * bf.derivative(ray, 2))
        region = Region(right_hi=ray) if params["side"] == "-inf" else Region(left_lo=ray)
        return LinearityFigure(FigureKind.MULTICUP, beta, region, eps, vertex.id)
    if vertex.kind is VertexKind.FICTIOUS_5:
        u = float(params["u"])
        region = Region(right_lo=u, right_hi=u) if params["side"] == Side.RIGHT.value else Region(left_lo=u, left_hi=u)
        return LinearityFigure(FigureKind.SINGLE_TANGENT, single_tangent_coefficients(bf, u), region, eps, vertex.id)
    return None


def boundary_figure(candidate: BellmanCandidate, vertex_id: str) -> Optional[FigureCandidate]:
    """The figure beyond the end of a tangent family: a linearity domain or the chordal domain below a chord."""
    if vertex_id in candidate.index:
        return candidate.figure(vertex_id)
    for edge in candidate.graph.incoming(vertex_id, EdgeKind.CHORDAL):
        if edge.id in candidate.index:
            return candidate.figure(edge.id)
    return None


def _glue(candidate: BellmanCandidate, tangents: TangentsFigure, other: FigureCandidate, u: float, tol: float) -> None:
    side = tangents.slope.side
    interface = tangent_segment(u, side, candidate.eps)
    residual = glue_check(tangents, other, interface)
    scale = 1 + abs(tangents.evaluate(*interface[-1])[2])
    if residual > tol * scale:
        raise GlueFailure(
            f"Tangents {tangents.ident} and figure {other.ident} do not glue along the {side.value} tangent at u={u}: "
            f"dB/dx2 jumps by {residual:.3e}"
        )


def assemble(graph: FoliationGraph, glue_tol: float = TOL_GLUE, check_glue: bool = True) -> BellmanCandidate:
    """
    Build the candidate of a graph: chordal domains, then linearity domains, then the tangent families glued to
    their neighbours.
    """
    if graph.bf is None:
        raise BellmanConfigException("The graph carries no boundary function.")
    candidate = BellmanCandidate(graph)
    for edge in graph.chordal_edges():
        table = edge_table(graph, edge)
        l_lo = float(edge.params["l_lo"])
        l_hi = min(float(edge.params["l_hi"]), table.l_max)
        candidate.add(ChordalFigure(table, l_lo, l_hi, edge.id))
    for vertex in graph.vertices.values():
        figure = _linearity_figure(graph, vertex)
        if figure is not None:
            candidate.add(figure)
    for edge in graph.tangent_edges():
        lo, hi = float(edge.params["lo"]), float(edge.params["hi"])
        if not lo < hi:
            continue
        tangents = TangentsFigure(SlopeFunction(graph.tangent_force(edge)), lo, hi, edge.id)
        candidate.add(tangents)
        if not check_glue:
            continue
        side = TANGENT_SIDES[edge.kind]
        emitter_end, absorber_end = (lo, hi) if side is Side.RIGHT else (hi, lo)
        for vertex_id, u in ((edge.source, emitter_end), (edge.target, absorber_end)):
            other = boundary_figure(candidate, vertex_id)
            if other is not None and math.isfinite(u):
                _glue(candidate, tangents, other, u, glue_tol)
    logger.debug(f"Assembled {len(candidate.figures)} figures for {graph.summary()}")
    return candidate


def _check_strip(eps: float, x1: float, x2: float) -> None:
    slack = 1e-12 * (1 + abs(x2))
    if not x1 * x1 - slack <= x2 <= x1 * x1 + eps * eps + slack:
        raise OutsideStrip(f"({x1}, {x2}) is outside the parabolic strip of radius {eps}")


def locate(candidate: BellmanCandidate, x1: float, x2: float) -> str:
    """
    Id of the first figure containing the point, with the membership tolerance escalated when no figure claims it.
    """
    _check_strip(candidate.eps, x1, x2)
    x2 = min(max(x2, x1 * x1), x1 * x1 + candidate.eps**2)
    for tol in LOCATE_TOLERANCES:
        for figure in candidate.figures:
            if figure.contains(x1, x2, tol):
                return figure.ident
    raise OutsideFigure(f"No figure of the candidate contains ({x1}, {x2})")


def evaluate(candidate: BellmanCandidate, x1: float, x2: float) -> Evaluation:
    """Value and gradient of the candidate at a point of the strip."""
    ident = locate(candidate, x1, x2)
    x2 = min(max(x2, x1 * x1), x1 * x1 + candidate.eps**2)
    return candidate.figure(ident).evaluate(x1, x2)


def minimize_variant(bf: BoundaryFunction) -> BoundaryFunction:
    """
    Boundary function whose maximal Bellman function gives the minimal one of ``bf`` by negation.
    """
    return bf.negated()


def interface_points(graph: FoliationGraph, edge: Edge, samples: int = 8) -> List[Tuple[float, float]]:
    """Points of the extremals bounding an edge's figure, used for gradient continuity checks."""
    eps = graph.eps
    if edge.kind is EdgeKind.CHORDAL:
        table = edge_table(graph, edge)
        chord_index = min(len(table) - 1, int(sum(table.lengths <= float(edge.params["l_hi"]))) - 1)
        a, b = float(table.left[chord_index]), float(table.right[chord_index])
        return [tuple(point) for point in chord_segment(a, b, samples)]  # type: ignore[misc]
    side = TANGENT_SIDES[edge.kind]
    points: List[Tuple[float, float]] = []
    for u in (float(edge.params["lo"]), float(edge.params["hi"])):
        if math.isfinite(u):
            points.extend(tuple(point) for point in tangent_segment(u, side, eps, samples))  # type: ignore[misc]
    return points
