from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from bellman.chords import ChordalDomainTable
from bellman.constants import EdgeKind, VertexKind
from bellman.log import get_logger

logger = get_logger(__name__)


@dataclass
class FoliationEntity:
    """
    A FoliationEntity defines a base class for the vertices and edges of a foliation graph.

    :param id: The unique identifier of the entity within its graph
    :param upstream_entity_ids: The ids of the vertices this entity is subordinate to
    """

    id: str
    upstream_entity_ids: List[str] = field(default_factory=list)

    def add_upstream(self, entity: FoliationEntity) -> None:
        """
        Add an upstream entity to the entity.

        :param entity: The entity to add
        """
        if entity.id not in self.upstream_entity_ids:
            self.upstream_entity_ids.append(entity.id)


@dataclass
class Vertex(FoliationEntity):
    """
    A linearity domain of the foliation, or one of the fictious vertices closing the tree.

    :param kind: The figure type
    :param params: The numeric parameters of the figure (``w``, ``a``/``b``, ``arcs``, ``beta``...)
    """

    kind: VertexKind = VertexKind.ANGLE
    params: Dict[str, Any] = field(default_factory=dict)

    def param(self, name: str) -> Any:
        try:
            return self.params[name]
        except KeyError:
            raise KeyError(f"Vertex {self.id} ({self.kind.value}) has no parameter {name!r}") from None


@dataclass
class Edge(FoliationEntity):
    """
    A domain foliated by extremals: tangents of one side between two vertices, or a chordal domain below a vertex.

    :param kind: ``tangent_R``, ``tangent_L`` or ``chordal``
    :param source: Id of the emitting vertex (tangents) or of the vertex the chords grow from (chordal)
    :param target: Id of the absorbing vertex (tangents) or of the vertex sitting on the top chord (chordal)
    :param params: Tangent range and force start, or the chordal seed and length range
    :param table: The grown chordal domain, kept in memory only
    """

    kind: EdgeKind = EdgeKind.TANGENT_R
    source: str = ""
    target: str = ""
    params: Dict[str, Any] = field(default_factory=dict)
    table: Optional[ChordalDomainTable] = field(default=None, repr=False, compare=False)

    @property
    def is_tangent(self) -> bool:
        return self.kind is not EdgeKind.CHORDAL
