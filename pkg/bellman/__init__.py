"""
Bellman is a library for computing exact Bellman functions of integral functionals on BMO.

Contains the boundary-function model, chordal domains, forces, the foliation graph, its evolution in the
BMO radius, optimizer synthesis and an independent grid oracle.
"""

__version__ = "0.4.0"


from bellman.boundary_function import BoundaryFunction, affine_normalize, find_roots
from bellman.evolution import evolve, simple_picture
from bellman.foliation import BellmanCandidate, FoliationGraph, assemble
from bellman.log import get_logger
from bellman.optimizers import Optimizer, optimizer_at, verify_optimizer

__all__ = [
    "BellmanCandidate",
    "BoundaryFunction",
    "FoliationGraph",
    "Optimizer",
    "affine_normalize",
    "assemble",
    "evolve",
    "find_roots",
    "get_logger",
    "optimizer_at",
    "simple_picture",
    "verify_optimizer",
]
