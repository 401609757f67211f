"""
Standard Bellman candidates on the figures of a foliation.

Every figure evaluates to a value and the gradient ``(dB/dx1, dB/dx2)``. On each extremal the gradient is constant,
so a figure is evaluated by finding the extremal through the point and the linear function carried by it.
"""

from __future__ import annotations

import math
from typing import Sequence, Tuple, Union

import numpy as np
from attr import define, field

from bellman.boundary_function import BoundaryFunction, eval_derivs
from bellman.chords import Chord, ChordalDomainTable, chord_at, chord_coefficients, chord_through
from bellman.constants import TOL_BALANCE, FigureKind, Side
from bellman.exceptions import Divergent, OutsideFigure, Unbalanced
from bellman.forces import AnyForce, Force, force_eval
from bellman.log import get_logger

logger = get_logger(__name__)

Evaluation = Tuple[float, float, float]
Coefficients = Tuple[float, float, float]

EDGE_TOLERANCE = 1e-9


def tangent_point(x1: float, x2: float, side: Side, eps: float) -> float:
    """
    Abscissa where the right (left) tangent through ``(x1, x2)`` meets the lower parabola.
    """
    root = math.sqrt(max(x1 * x1 + eps * eps - x2, 0.0))
    if side is Side.RIGHT:
        return x1 + eps - root
    return x1 - eps + root


def upper_point(u: float, side: Side, eps: float) -> tuple[float, float]:
    """Where the tangent at ``u`` touches the upper parabola."""
    s = u - eps if side is Side.RIGHT else u + eps
    return s, s * s + eps * eps


def plane_value(coefficients: Coefficients, x1: float, x2: float) -> Evaluation:
    g0, g1, g2 = coefficients
    return g0 + g1 * x1 + g2 * x2, g1, g2


@define(frozen=True, eq=False)
class SlopeFunction:
    """
    The slope ``m`` of the tangents of one family, driven by a force: ``eps m'' = F``.
    """

    force: AnyForce

    @property
    def side(self) -> Side:
        return self.force.side

    @property
    def eps(self) -> float:
        return self.force.eps

    @property
    def bf(self) -> BoundaryFunction:
        return self.force.bf

    @classmethod
    def from_anchor(cls, bf: BoundaryFunction, side: Side, eps: float, u0: float, m0: float) -> SlopeFunction:
        """
        Slope function with ``m(u0) = m0``. Neighbours prescribe the anchor: ``(f'(a) + f'(b)) / 2`` at the end of a
        chord, ``f'(u) -/+ 2 eps beta2`` at the side of a linearity domain.
        """
        _, f1, f2, _ = eval_derivs(bf, u0)
        if side is Side.RIGHT:
            start_value = (m0 - f1 + eps * f2) / eps
        else:
            start_value = (m0 - f1 - eps * f2) / eps
        return cls(Force(bf, side, eps, u0, start_value, origin="anchor"))

    @classmethod
    def from_infinity(cls, bf: BoundaryFunction, side: Side, eps: float) -> SlopeFunction:
        if eps >= bf.eps_inf:
            raise Divergent(f"Tangents from infinity diverge at eps={eps} >= eps_inf={bf.eps_inf}")
        return cls(Force.of_infinity(bf, side, eps))


def slope_eval(slope: SlopeFunction, u: float) -> tuple[float, float, float]:
    """Return ``(m, m', m'')`` at ``u``."""
    _, f1, f2, _ = eval_derivs(slope.bf, u)
    eps = slope.eps
    value = force_eval(slope.force, u, strict=False)
    if slope.side is Side.RIGHT:
        return f1 - eps * f2 + eps * value, f2 - value, value / eps
    return f1 + eps * f2 + eps * value, f2 + value, value / eps


def tangent_coefficients(slope: SlopeFunction, u: float) -> Coefficients:
    """Linear function carried by the tangent at ``u``."""
    m, m1, _ = slope_eval(slope, u)
    f = float(slope.bf(u))
    g2 = 0.5 * m1
    shift = slope.eps if slope.side is Side.RIGHT else -slope.eps
    g1 = m - (u - shift) * m1
    g0 = f - g1 * u - g2 * u * u
    return g0, g1, g2


def _slack(value: float, tol: float) -> float:
    return tol * (1 + abs(value))


@define(frozen=True, eq=False)
class TangentsFigure:
    """
    Tangents of one side at ``u`` in ``[lo, hi]``. Either end may be infinite.
    """

    slope: SlopeFunction
    lo: float
    hi: float
    ident: str = ""

    @property
    def kind(self) -> FigureKind:
        return FigureKind.TANGENTS_R if self.slope.side is Side.RIGHT else FigureKind.TANGENTS_L

    def contains(self, x1: float, x2: float, tol: float = 1e-12) -> bool:
        u = tangent_point(x1, x2, self.slope.side, self.slope.eps)
        return self.lo - _slack(self.lo, tol) <= u <= self.hi + _slack(self.hi, tol)

    def evaluate(self, x1: float, x2: float) -> Evaluation:
        u = tangent_point(x1, x2, self.slope.side, self.slope.eps)
        return plane_value(tangent_coefficients(self.slope, u), x1, x2)


@define(frozen=True, eq=False)
class ChordalFigure:
    """
    The chords of a table with lengths in ``[l_lo, l_hi]``.
    """

    table: ChordalDomainTable
    l_lo: float
    l_hi: float
    ident: str = ""

    @property
    def kind(self) -> FigureKind:
        return FigureKind.CHORDAL

    def chord(self, x1: float, x2: float, tol: float = 1e-12) -> Chord | None:
        """The chord through the point; points within ``tol`` of the bottom or top chord are put on it."""
        chord = chord_through(self.table, x1, x2, self.l_lo, self.l_hi)
        if chord is not None:
            return chord
        for length in (self.l_hi, self.l_lo):
            edge = chord_at(self.table, length)
            inside = edge.a - _slack(edge.a, tol) <= x1 <= edge.b + _slack(edge.b, tol)
            if inside and abs(edge.height(x1) - x2) <= _slack(x2, tol):
                return edge
        return None

    def contains(self, x1: float, x2: float, tol: float = 1e-12) -> bool:
        return self.chord(x1, x2, tol) is not None

    def evaluate(self, x1: float, x2: float) -> Evaluation:
        chord = self.chord(x1, x2, EDGE_TOLERANCE)
        if chord is None:
            raise OutsideFigure(f"({x1}, {x2}) is on no chord of figure {self.ident}")
        if chord.length == 0:
            _, f1, f2, _ = eval_derivs(self.table.bf, chord.a)
            return float(self.table.bf(chord.a)), f1 - chord.a * f2, 0.5 * f2
        return plane_value(chord_coefficients(self.table.bf, chord.a, chord.b), x1, x2)


@define(frozen=True)
class Region:
    """
    Geometric extent of a linearity domain.

    The tangent-point bounds are ``u_R(x) >= right_lo``, ``u_R(x) <= right_hi``, ``u_L(x) >= left_lo`` and
    ``u_L(x) <= left_hi``; ``floors`` are chords the point must lie on or above, ``ceiling`` a chord it must lie on or
    below.
    """

    right_lo: float = -math.inf
    right_hi: float = math.inf
    left_lo: float = -math.inf
    left_hi: float = math.inf
    floors: tuple[tuple[float, float], ...] = ()
    ceiling: tuple[float, float] | None = None


def _above(chord: tuple[float, float], x1: float, x2: float, tol: float) -> bool:
    a, b = chord
    if not a <= x1 <= b:
        return True
    return x2 >= (a + b) * x1 - a * b - _slack(x2, tol)


@define(frozen=True, eq=False)
class LinearityFigure:
    """
    A domain where the candidate is the linear function ``beta0 + beta1 x1 + beta2 x2``: angles, trolleybuses, birdies,
    multicups and closed multicups.
    """

    figure_kind: FigureKind
    beta: Coefficients
    region: Region
    eps: float
    ident: str = ""

    @property
    def kind(self) -> FigureKind:
        return self.figure_kind

    def contains(self, x1: float, x2: float, tol: float = 1e-12) -> bool:
        region = self.region
        u_r = tangent_point(x1, x2, Side.RIGHT, self.eps)
        u_l = tangent_point(x1, x2, Side.LEFT, self.eps)
        if u_r < region.right_lo - _slack(region.right_lo, tol) or u_r > region.right_hi + _slack(region.right_hi, tol):
            return False
        if u_l < region.left_lo - _slack(region.left_lo, tol) or u_l > region.left_hi + _slack(region.left_hi, tol):
            return False
        if not all(_above(chord, x1, x2, tol) for chord in region.floors):
            return False
        if region.ceiling is not None:
            a, b = region.ceiling
            if not a - _slack(a, tol) <= x1 <= b + _slack(b, tol):
                return False
            if x2 > (a + b) * x1 - a * b + _slack(x2, tol):
                return False
        return True

    def evaluate(self, x1: float, x2: float) -> Evaluation:
        return plane_value(self.beta, x1, x2)


FigureCandidate = Union[TangentsFigure, ChordalFigure, LinearityFigure]


def figure_eval(figure: FigureCandidate, x1: float, x2: float, tol: float = 1e-9) -> Evaluation:
    """Value and gradient of a figure's candidate at a point of the figure."""
    if not figure.contains(x1, x2, tol):
        raise OutsideFigure(f"({x1}, {x2}) is outside figure {figure.ident or figure.kind.value}")
    return figure.evaluate(x1, x2)


def quadratic_coefficients(bf: BoundaryFunction, w: float, beta2: float) -> Coefficients:
    """The linear function with quadratic coefficient ``beta2`` tangent to the boundary values at ``w``."""
    f, f1, _, _ = eval_derivs(bf, w)
    beta1 = f1 - 2 * beta2 * w
    beta0 = f - beta1 * w - beta2 * w * w
    return beta0, beta1, beta2


def angle_coefficients(
    bf: BoundaryFunction, w: float, m_right: float, m_left: float, eps: float, tol: float = TOL_BALANCE
) -> Coefficients:
    """
    Linear function of an angle at ``w`` from the slopes of the right and left tangents meeting there.
    """
    f1 = bf.derivative(w, 1)
    residual = abs(m_right + m_left - 2 * f1)
    if residual > tol * (1 + abs(m_right) + abs(m_left)):
        raise Unbalanced(f"Slopes {m_right} and {m_left} at w={w} are unbalanced (residual {residual:.3e})")
    return quadratic_coefficients(bf, w, (m_left - m_right) / (4 * eps))


def single_tangent_coefficients(bf: BoundaryFunction, w: float) -> Coefficients:
    """Linear function of a degenerate tangent domain at ``w``."""
    return quadratic_coefficients(bf, w, 0.5 * bf.derivative(w, 2))


def side_slope(bf: BoundaryFunction, beta2: float, u: float, side: Side, eps: float) -> float:
    """Slope of the tangents leaving a linearity domain at ``u`` on the given side."""
    return bf.derivative(u, 1) - side.sign * 2 * eps * beta2


def tangent_segment(u: float, side: Side, eps: float, samples: int = 8) -> np.ndarray:
    """Points of the tangent at ``u``, lower end excluded."""
    s, _ = upper_point(u, side, eps)
    ratios = np.linspace(0, 1, samples + 1)[1:]
    x1 = u + ratios * (s - u)
    x2 = u * u + ratios * (2 * u - 2 * side.sign * eps) * (s - u)
    return np.stack([x1, x2], axis=1)


def chord_segment(a: float, b: float, samples: int = 8) -> np.ndarray:
    """Interior points of the chord ``[a, b]``."""
    x1 = np.linspace(a, b, samples + 2)[1:-1]
    return np.stack([x1, (a + b) * x1 - a * b], axis=1)


def glue_check(first: FigureCandidate, second: FigureCandidate, interface: Sequence[Sequence[float]]) -> float:
    """
    Largest jump of ``dB/dx2`` between two figures over points of their common extremal.
    """
    residual = 0.0
    for point in interface:
        x1, x2 = float(point[0]), float(point[1])
        residual = max(residual, abs(first.evaluate(x1, x2)[2] - second.evaluate(x1, x2)[2]))
    return residual


@define(frozen=True)
class ConcavityReport:
    """Samples of the transverse second derivative of a tangent family."""

    figure: str
    worst: float
    points: int = field(default=0)

    @property
    def passed(self) -> bool:
        return self.worst <= 1e-9


def tangent_concavity(figure: TangentsFigure, samples: int = 32) -> ConcavityReport:
    """
    ``m''`` must be non-positive on right tangents and non-negative on left ones; reports the worst violation.
    """
    lo = figure.lo if math.isfinite(figure.lo) else (figure.hi - 10 * figure.slope.eps)
    hi = figure.hi if math.isfinite(figure.hi) else (lo + 10 * figure.slope.eps)
    if not (math.isfinite(lo) and math.isfinite(hi)):
        lo, hi = -10 * figure.slope.eps, 10 * figure.slope.eps
    worst = -math.inf
    for u in np.linspace(lo, hi, samples):
        _, _, m2 = slope_eval(figure.slope, float(u))
        worst = max(worst, figure.slope.side.sign * m2)
    return ConcavityReport(figure.ident, worst, samples)
