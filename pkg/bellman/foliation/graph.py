from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, List, Optional

from bellman.boundary_function import BoundaryFunction
from bellman.candidates import SlopeFunction, slope_eval
from bellman.chords import cup_residual, cup_tolerance, differentials
from bellman.constants import TOL_BALANCE, EdgeKind, EventKind, Side, VertexKind
from bellman.exceptions import BellmanConfigException
from bellman.foliation.entities import Edge, Vertex
from bellman.forces import Force, tail_endpoint
from bellman.log import get_logger

logger = get_logger(__name__)

TANGENT_SIDES = {EdgeKind.TANGENT_R: Side.RIGHT, EdgeKind.TANGENT_L: Side.LEFT}


def _encode(value: Any) -> Any:
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if isinstance(value, (list, tuple)):
        return [_encode(item) for item in value]
    if isinstance(value, dict):
        return {key: _encode(item) for key, item in value.items()}
    return value


def _decode(value: Any) -> Any:
    if value == "inf":
        return math.inf
    if value == "-inf":
        return -math.inf
    if isinstance(value, list):
        return [_decode(item) for item in value]
    if isinstance(value, dict):
        return {key: _decode(item) for key, item in value.items()}
    return value


@dataclass
class FoliationGraph:
    """
    Oriented tree of figures for one radius.

    Tangent edges point from the emitting vertex to the absorbing one, chordal edges from the vertex the chords grow
    from to the vertex sitting on the top chord.

    :param eps: The BMO radius
    :param bf: The boundary function, required to assemble the graph but never serialized
    """

    eps: float
    bf: Optional[BoundaryFunction] = field(default=None, repr=False, compare=False)
    vertices: Dict[str, Vertex] = field(default_factory=dict)
    edges: Dict[str, Edge] = field(default_factory=dict)

    def add_vertex(self, kind: VertexKind, **params: Any) -> Vertex:
        vertex = Vertex(id=f"v{len(self.vertices)}", kind=kind, params=params)
        self.vertices[vertex.id] = vertex
        return vertex

    def add_edge(self, kind: EdgeKind, source: Vertex, target: Vertex, table: Any = None, **params: Any) -> Edge:
        """
        Add an edge between two vertices of the graph. The target becomes subordinate to the source.
        """
        edge = Edge(id=f"e{len(self.edges)}", kind=kind, source=source.id, target=target.id, params=params, table=table)
        edge.add_upstream(source)
        target.add_upstream(source)
        self.edges[edge.id] = edge
        return edge

    def incoming(self, vertex_id: str, kind: EdgeKind | None = None) -> List[Edge]:
        return [edge for edge in self.edges.values() if edge.target == vertex_id and kind in (None, edge.kind)]

    def outgoing(self, vertex_id: str, kind: EdgeKind | None = None) -> List[Edge]:
        return [edge for edge in self.edges.values() if edge.source == vertex_id and kind in (None, edge.kind)]

    def tangent_edges(self) -> Iterator[Edge]:
        return (edge for edge in self.edges.values() if edge.is_tangent)

    def chordal_edges(self) -> Iterator[Edge]:
        return (edge for edge in self.edges.values() if edge.kind is EdgeKind.CHORDAL)

    def of_kind(self, *kinds: VertexKind) -> List[Vertex]:
        return [vertex for vertex in self.vertices.values() if vertex.kind in kinds]

    def as_dict(self) -> dict[str, Any]:
        return {
            "eps": self.eps,
            "vertices": [
                {"id": vertex.id, "kind": vertex.kind.value, "params": _encode(vertex.params)}
                for vertex in self.vertices.values()
            ],
            "edges": [
                {
                    "id": edge.id,
                    "kind": edge.kind.value,
                    "from": edge.source,
                    "to": edge.target,
                    "params": _encode(edge.params),
                }
                for edge in self.edges.values()
            ],
        }

    def to_json(self, indent: int | None = None) -> str:
        return json.dumps(self.as_dict(), indent=indent, allow_nan=False)

    @classmethod
    def from_dict(cls, content: dict[str, Any], bf: BoundaryFunction | None = None) -> FoliationGraph:
        try:
            graph = cls(eps=float(content["eps"]), bf=bf)
            for item in content["vertices"]:
                vertex = Vertex(id=item["id"], kind=VertexKind(item["kind"]), params=_decode(item["params"]))
                graph.vertices[vertex.id] = vertex
            for item in content["edges"]:
                source, target = graph.vertices[item["from"]], graph.vertices[item["to"]]
                edge = Edge(
                    id=item["id"],
                    kind=EdgeKind(item["kind"]),
                    source=source.id,
                    target=target.id,
                    params=_decode(item["params"]),
                )
                edge.add_upstream(source)
                target.add_upstream(source)
                graph.edges[edge.id] = edge
        except (KeyError, TypeError, ValueError) as error:
            raise BellmanConfigException(f"Malformed foliation graph: {error}") from error
        return graph

    @classmethod
    def from_json(cls, text: str, bf: BoundaryFunction | None = None) -> FoliationGraph:
        try:
            content = json.loads(text)
        except json.JSONDecodeError as error:
            raise BellmanConfigException(f"Foliation graph is not valid JSON: {error}") from error
        return cls.from_dict(content, bf)

    def tangent_force(self, edge: Edge) -> Force:
        """The force driving the tangents of an edge, rebuilt from its parameters."""
        if self.bf is None:
            raise BellmanConfigException("The graph carries no boundary function.")
        params = edge.params
        return Force(
            self.bf,
            TANGENT_SIDES[edge.kind],
            self.eps,
            float(params["start"]),
            float(params.get("start_value", 0.0)),
            origin=self.vertices[edge.source].kind.value,
        )

    def summary(self) -> str:
        kinds = [vertex.kind.value for vertex in self.vertices.values()]
        return f"eps={self.eps:.8g}, {len(self.vertices)} vertices ({', '.join(kinds)}), {len(self.edges)} edges"


@dataclass(frozen=True)
class AdmissibilityEntry:
    subject: str
    check: str
    passed: bool
    value: float = 0.0
    message: str = ""


@dataclass
class AdmissibilityReport:
    entries: List[AdmissibilityEntry] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(entry.passed for entry in self.entries)

    def failures(self) -> List[AdmissibilityEntry]:
        return [entry for entry in self.entries if not entry.passed]

    def add(self, subject: str, check: str, passed: bool, value: float = 0.0, message: str = "") -> None:
        self.entries.append(AdmissibilityEntry(subject, check, bool(passed), float(value), message))


def _tree_check(graph: FoliationGraph, report: AdmissibilityReport) -> None:
    parent = {vertex_id: vertex_id for vertex_id in graph.vertices}

    def find(vertex_id: str) -> str:
        while parent[vertex_id] != vertex_id:
            parent[vertex_id] = parent[parent[vertex_id]]
            vertex_id = parent[vertex_id]
        return vertex_id

    cycles = 0
    for edge in graph.edges.values():
        root_source, root_target = find(edge.source), find(edge.target)
        if root_source == root_target:
            cycles += 1
        else:
            parent[root_source] = root_target
    components = len({find(vertex_id) for vertex_id in graph.vertices})
    report.add("graph", "tree", cycles == 0 and components == 1, cycles + components - 1,
               f"{cycles} cycle(s), {components} component(s)")


def _chord_check(graph: FoliationGraph, report: AdmissibilityReport, subject: str, a: float, b: float) -> None:
    bf = graph.bf
    assert bf is not None
    eps = graph.eps
    length = b - a
    report.add(subject, "length", 0 < length <= 2 * eps * (1 + 1e-9), length, f"chord [{a}, {b}] at eps={eps}")
    if length <= 0:
        return
    residual = cup_residual(bf, a, b)
    report.add(subject, "cup_equation", abs(residual) <= 1e4 * cup_tolerance(bf, a, b), residual)
    dl, dr = differentials(bf, a, b)
    report.add(subject, EventKind.DIFFERENTIAL_ZERO.value, dl <= 1e-9 and dr <= 1e-9, max(dl, dr))


def _vertex_checks(graph: FoliationGraph, report: AdmissibilityReport) -> None:
    eps = graph.eps
    for vertex in graph.vertices.values():
        params = vertex.params
        if vertex.kind in (VertexKind.TROLLEYBUS_R, VertexKind.TROLLEYBUS_L, VertexKind.BIRDIE, VertexKind.FICTIOUS_1):
            _chord_check(graph, report, vertex.id, float(params["a"]), float(params["b"]))
            if vertex.kind is VertexKind.FICTIOUS_1:
                length = float(params["b"]) - float(params["a"])
                report.add(vertex.id, "full_chord", abs(length - 2 * eps) <= 1e-9 * (1 + eps), length - 2 * eps)
        elif vertex.kind in (VertexKind.MULTICUP, VertexKind.CLOSED_MULTICUP):
            arcs = [tuple(arc) for arc in params["arcs"]]
            ordered = all(lo <= hi for lo, hi in arcs) and all(
                arcs[index][1] < arcs[index + 1][0] for index in range(len(arcs) - 1)
            )
            report.add(vertex.id, "arcs_ordered", ordered, len(arcs))
            gaps = [arcs[index + 1][0] - arcs[index][1] for index in range(len(arcs) - 1)]
            report.add(vertex.id, "arc_gaps", all(gap <= 2 * eps * (1 + 1e-9) for gap in gaps), max(gaps, default=0.0))
            width = arcs[-1][1] - arcs[0][0]
            if vertex.kind is VertexKind.MULTICUP:
                report.add(vertex.id, EventKind.MULTICUP_FILLS.value, width >= 2 * eps * (1 - 1e-9), width - 2 * eps)
            else:
                report.add(vertex.id, "hull_length", width <= 2 * eps * (1 + 1e-9), width - 2 * eps)
        elif vertex.kind is VertexKind.ANGLE:
            report.add(vertex.id, "vertex", math.isfinite(float(params["w"])), float(params["w"]))


def _tangent_checks(graph: FoliationGraph, report: AdmissibilityReport) -> None:
    for edge in graph.tangent_edges():
        lo, hi = float(edge.params["lo"]), float(edge.params["hi"])
        report.add(edge.id, EventKind.EDGE_LENGTH_ZERO.value, lo <= hi, hi - lo if math.isfinite(hi - lo) else 1.0)
        if lo == hi:
            continue
        if graph.bf is not None and not len(graph.bf.roots):
            report.add(edge.id, EventKind.TAIL_MEETS_FIGURE.value, True, 0.0, "f''' vanishes, the force is zero")
            continue
        force = graph.tangent_force(edge)
        if force.side is Side.RIGHT:
            tail = tail_endpoint(force, limit=hi)
            covered = tail.covers(hi) if math.isfinite(hi) else math.isinf(tail.endpoint)
        else:
            tail = tail_endpoint(force, limit=lo)
            covered = tail.covers(lo) if math.isfinite(lo) else math.isinf(tail.endpoint)
        report.add(
            edge.id,
            EventKind.TAIL_MEETS_FIGURE.value,
            covered,
            tail.endpoint,
            f"{force.side.value} tangents on [{lo}, {hi}], tail ends at {tail.endpoint}",
        )


def _balance_checks(graph: FoliationGraph, report: AdmissibilityReport) -> None:
    bf = graph.bf
    assert bf is not None
    for vertex in graph.of_kind(VertexKind.ANGLE):
        w = float(vertex.params["w"])
        rights = graph.incoming(vertex.id, EdgeKind.TANGENT_R)
        lefts = graph.incoming(vertex.id, EdgeKind.TANGENT_L)
        if len(rights) != 1 or len(lefts) != 1:
            report.add(vertex.id, "balance", False, 0.0, "an angle absorbs exactly one tangent family per side")
            continue
        m_right = slope_eval(SlopeFunction(graph.tangent_force(rights[0])), w)[0]
        m_left = slope_eval(SlopeFunction(graph.tangent_force(lefts[0])), w)[0]
        residual = m_right + m_left - 2 * bf.derivative(w, 1)
        report.add(vertex.id, "balance", abs(residual) <= TOL_BALANCE * (1 + abs(m_right) + abs(m_left)), residual)


def check_admissible(graph: FoliationGraph) -> AdmissibilityReport:
    """
    Check a graph against the sanity conditions of its figures, the force condition on every tangent edge and the
    tree structure. Never raises on a failed check.
    """
    report = AdmissibilityReport()
    _tree_check(graph, report)
    if graph.bf is None:
        report.add("graph", "boundary_function", False, message="the graph carries no boundary function")
        return report
    _vertex_checks(graph, report)
    for edge in graph.chordal_edges():
        l_hi = float(edge.params["l_hi"])
        report.add(edge.id, "length", l_hi <= 2 * graph.eps * (1 + 1e-9), l_hi - 2 * graph.eps)
    _tangent_checks(graph, report)
    _balance_checks(graph, report)
    for failure in report.failures():
        logger.debug(f"Admissibility check {failure.check} failed for {failure.subject}: {failure.message}")
    return report
