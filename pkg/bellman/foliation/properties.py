"""
Numerical properties of an assembled candidate: boundary values, local concavity, gradient continuity across figure
interfaces and the degenerate Monge-Ampere equation.
"""

from __future__ import annotations

import math
from typing import Any, Dict, List, Tuple

import numpy as np
from attr import define, field

from bellman.candidates import TangentsFigure, tangent_concavity
from bellman.constants import EdgeKind
from bellman.exceptions import OutsideFigure
from bellman.foliation.candidate import BellmanCandidate, interface_points
from bellman.log import get_logger

logger = get_logger(__name__)

Point = Tuple[float, float]

HESSIAN_FLOOR = 1e-8


@define
class PropertyCheck:
    name: str
    value: float
    threshold: float
    samples: int
    location: Tuple[float, float] | None = None

    @property
    def passed(self) -> bool:
        return self.value <= self.threshold

    def as_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "value": self.value,
            "threshold": self.threshold,
            "samples": self.samples,
            "location": None if self.location is None else list(self.location),
            "passed": self.passed,
        }


@define
class PropertyReport:
    checks: List[PropertyCheck] = field(factory=list)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def failures(self) -> List[PropertyCheck]:
        return [check for check in self.checks if not check.passed]

    def as_dict(self) -> Dict[str, Any]:
        return {"passed": self.passed, "checks": [check.as_dict() for check in self.checks]}


def view_range(bc: BellmanCandidate, margin: float = 2.0) -> Tuple[float, float]:
    """Abscissas around the finite features of the graph."""
    marks: List[float] = []
    for vertex in bc.graph.vertices.values():
        for key in ("w", "a", "b", "t", "ray"):
            value = vertex.params.get(key)
            if isinstance(value, (int, float)) and math.isfinite(value):
                marks.append(float(value))
    eps = bc.eps
    if not marks:
        return -margin - eps, margin + eps
    return min(marks) - margin * eps - margin, max(marks) + margin * eps + margin


def random_points(bc: BellmanCandidate, count: int, rng: np.random.Generator) -> List[Point]:
    lo, hi = view_range(bc)
    x1 = rng.uniform(lo, hi, count)
    lift = rng.uniform(0.0, 1.0, count) * bc.eps**2
    return [(float(a), float(a * a + b)) for a, b in zip(x1, lift)]


def boundary_error(bc: BellmanCandidate, count: int = 1000, seed: int = 0) -> PropertyCheck:
    """Largest ``|B(t, t^2) - f(t)| / (1 + |f(t)|)``."""
    bf = bc.graph.bf
    assert bf is not None
    lo, hi = view_range(bc)
    worst, where = 0.0, None
    for t in np.random.default_rng(seed).uniform(lo, hi, count):
        t = float(t)
        expected = float(bf(t))
        error = abs(bc(t, t * t) - expected) / (1 + abs(expected))
        if error > worst:
            worst, where = error, (t, t * t)
    return PropertyCheck("boundary", worst, 1e-10, count, where)


def _segment_inside(y: Point, z: Point, eps: float) -> bool:
    d1, d2 = z[0] - y[0], z[1] - y[1]
    linear = d2 - 2 * y[0] * d1
    quadratic = d1 * d1
    s = min(max(linear / (2 * quadratic), 0.0), 1.0) if quadratic > 0 else 0.0
    return y[1] - y[0] ** 2 + s * linear - s * s * quadratic <= eps * eps * (1 + 1e-12)


def midpoint_concavity(bc: BellmanCandidate, count: int = 1000, seed: int = 1) -> PropertyCheck:
    """Largest violation of ``B(mid) >= (B(y) + B(z)) / 2`` over random segments inside the strip."""
    rng = np.random.default_rng(seed)
    eps = bc.eps
    worst, where, tested = 0.0, None, 0
    while tested < count:
        y = random_points(bc, 1, rng)[0]
        angle = rng.uniform(0.0, math.pi)
        length = rng.uniform(0.0, 2 * eps)
        z = (y[0] + length * math.cos(angle), y[1] + length * math.sin(angle) * (1 + 2 * abs(y[0])))
        if z[1] < z[0] ** 2 or not _segment_inside(y, z, eps):
            continue
        tested += 1
        mid = (0.5 * (y[0] + z[0]), 0.5 * (y[1] + z[1]))
        value = bc(*mid)
        violation = (0.5 * (bc(*y) + bc(*z)) - value) / (1 + abs(value))
        if violation > worst:
            worst, where = violation, mid
    return PropertyCheck("midpoint_concavity", worst, 1e-9, count, where)


def _clamp(bc: BellmanCandidate, point: Point) -> Point:
    x1, x2 = point
    return x1, min(max(x2, x1 * x1), x1 * x1 + bc.eps**2)


def gradient_continuity(bc: BellmanCandidate, step: float = 1e-7, samples: int = 8) -> PropertyCheck:
    """Gradient jumps across the extremals bounding the tangent and chordal figures."""
    worst, where, tested = 0.0, None, 0
    for edge in bc.graph.edges.values():
        if edge.kind is not EdgeKind.CHORDAL and not float(edge.params["lo"]) < float(edge.params["hi"]):
            continue
        points = interface_points(bc.graph, edge, samples)
        pairs = [
            (points[index], points[index + 1])
            for start in range(0, len(points), samples)
            for index in range(start, min(start + samples, len(points)) - 1)
        ]
        for first, second in pairs:
            direction = np.array([second[0] - first[0], second[1] - first[1]])
            norm = float(np.hypot(*direction))
            if norm == 0:
                continue
            normal = np.array([-direction[1], direction[0]]) / norm
            middle = np.array([0.5 * (first[0] + second[0]), 0.5 * (first[1] + second[1])])
            one = _clamp(bc, (float(middle[0] + step * normal[0]), float(middle[1] + step * normal[1])))
            two = _clamp(bc, (float(middle[0] - step * normal[0]), float(middle[1] - step * normal[1])))
            try:
                _, a1, a2 = bc.eval(*one)
                _, b1, b2 = bc.eval(*two)
            except OutsideFigure:
                continue
            tested += 1
            jump = max(abs(a1 - b1), abs(a2 - b2)) / (1 + abs(a1) + abs(a2))
            if jump > worst:
                worst, where = jump, (float(middle[0]), float(middle[1]))
    return PropertyCheck("gradient_continuity", worst, 1e-6, tested, where)


def monge_ampere_residual(bc: BellmanCandidate, count: int = 200, step: float = 1e-5, seed: int = 2) -> PropertyCheck:
    """
    ``|det D^2 B| / |D^2 B|^2`` from differences of the exact gradient, at points whose stencil stays inside one
    figure.
    """
    rng = np.random.default_rng(seed)
    worst, where, tested = 0.0, None, 0
    for x1, x2 in random_points(bc, count, rng):
        stencil = [(x1 + step, x2), (x1 - step, x2), (x1, x2 + step), (x1, x2 - step)]
        if any(not p[0] ** 2 <= p[1] <= p[0] ** 2 + bc.eps**2 for p in stencil):
            continue
        figure = bc.locate(x1, x2)
        if any(bc.locate(*p) != figure for p in stencil):
            continue
        gradients = [bc.eval(*p)[1:] for p in stencil]
        hessian = np.array(
            [
                [(gradients[0][0] - gradients[1][0]) / (2 * step), (gradients[2][0] - gradients[3][0]) / (2 * step)],
                [(gradients[0][1] - gradients[1][1]) / (2 * step), (gradients[2][1] - gradients[3][1]) / (2 * step)],
            ]
        )
        tested += 1
        residual = abs(float(np.linalg.det(hessian))) / max(float(np.sum(hessian * hessian)), HESSIAN_FLOOR)
        if residual > worst:
            worst, where = residual, (x1, x2)
    return PropertyCheck("monge_ampere", worst, 1e-6, tested, where)


def transverse_concavity(bc: BellmanCandidate, samples: int = 32) -> PropertyCheck:
    worst, where, tested = 0.0, None, 0
    for figure in bc.figures:
        if not isinstance(figure, TangentsFigure):
            continue
        report = tangent_concavity(figure, samples)
        tested += report.points
        if report.worst > worst:
            worst, where = report.worst, (figure.lo, figure.hi)
    return PropertyCheck("transverse_concavity", worst, 1e-9, tested, where)


def coverage(bc: BellmanCandidate, count: int = 10000, seed: int = 3) -> PropertyCheck:
    """Share of random strip points no figure claims."""
    rng = np.random.default_rng(seed)
    missed, where = 0, None
    for point in random_points(bc, count, rng):
        try:
            bc.locate(*point)
        except OutsideFigure:
            missed += 1
            where = point
    return PropertyCheck("coverage", missed / count, 0.0, count, where)


def property_suite(bc: BellmanCandidate, samples: int = 1000) -> PropertyReport:
    report = PropertyReport(
        [
            boundary_error(bc, samples),
            midpoint_concavity(bc, samples),
            gradient_continuity(bc),
            monge_ampere_residual(bc, max(samples // 5, 20)),
            transverse_concavity(bc),
            coverage(bc, 10 * samples),
        ]
    )
    for check in report.failures:
        logger.warning(f"Property {check.name} fails: {check.value:.3e} > {check.threshold:.1e} at {check.location}")
    return report
