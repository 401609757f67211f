from bellman.foliation.candidate import BellmanCandidate, assemble, evaluate, locate, minimize_variant
from bellman.foliation.entities import Edge, FoliationEntity, Vertex
from bellman.foliation.graph import AdmissibilityReport, FoliationGraph, check_admissible

__all__ = [
    "AdmissibilityReport",
    "BellmanCandidate",
    "Edge",
    "FoliationEntity",
    "FoliationGraph",
    "Vertex",
    "assemble",
    "check_admissible",
    "evaluate",
    "locate",
    "minimize_variant",
]
