"""
Forces of chords, chordal domains, multicups and infinities, their tails and the balance equation.

Right forces are normalized so that ``F_R = eps m''`` for the slope function of the right tangents they drive:
``F_R' = f''' - F_R / eps`` off the chordal domain, and symmetrically ``F_L' = F_L / eps - f'''``.
"""

from __future__ import annotations

import math
from typing import Callable, Iterator, Union

import numpy as np
from attr import define, field
from scipy import optimize

from bellman import settings
from bellman.boundary_function import BoundaryFunction
from bellman.chords import Chord, ChordalDomainTable, chord_at, length_at_left_end, length_at_right_end
from bellman.constants import BALANCE_SCAN_POINTS, ROOT_RTOL, TAIL_SCAN_POINTS, Side, TableKind
from bellman.exceptions import BracketInvalid, OutOfDomain, OutOfRange
from bellman.log import get_logger

logger = get_logger(__name__)

BALANCE_XTOL = 1e-12


@define(frozen=True, eq=False)
class Force:
    """
    A force emitted from ``start`` towards the given side.

    The value at ``u`` is ``start_value e^{-|u - start| / eps}`` plus the exponentially weighted integral of f''' from
    ``start`` to ``u``. Infinity forces have an infinite ``start`` and no start value.

    :param bf: The boundary function
    :param side: ``Side.RIGHT`` for a force acting on right tangents (defined for ``u >= start``)
    :param eps: The BMO radius
    :param start: Where the force starts
    :param start_value: Value at ``start``
    :param origin: A short label of what emits the force, used in logs and reports
    """

    bf: BoundaryFunction
    side: Side
    eps: float
    start: float
    start_value: float = 0.0
    origin: str = "chord"
    _memo: dict[float, float] = field(factory=dict, init=False, repr=False)

    @classmethod
    def of_chord(cls, bf: BoundaryFunction, chord: Chord, side: Side, eps: float) -> Force:
        """Force of a chord satisfying the cup equation: ``D_R`` at ``b`` or ``-D_L`` at ``a``."""
        if side is Side.RIGHT:
            return cls(bf, side, eps, chord.b, chord.dr, origin="chord")
        return cls(bf, side, eps, chord.a, -chord.dl, origin="chord")

    @classmethod
    def of_infinity(cls, bf: BoundaryFunction, side: Side, eps: float, ray: float | None = None) -> Force:
        """
        The force of ``-inf`` (right) or ``+inf`` (left). With a ray of linearity ending at ``ray`` the force starts
        there, which gives the same values since f''' vanishes on the ray.
        """
        if ray is not None:
            return cls(bf, side, eps, ray, 0.0, origin="infinity")
        start = -math.inf if side is Side.RIGHT else math.inf
        return cls(bf, side, eps, start, 0.0, origin="infinity")

    @classmethod
    def of_multicup(
        cls, bf: BoundaryFunction, side: Side, eps: float, lo: float, hi: float, beta2: float
    ) -> Force:
        """Force of a multicup spanning ``[lo, hi]`` with quadratic coefficient ``beta2``."""
        if side is Side.RIGHT:
            return cls(bf, side, eps, hi, bf.derivative(hi, 2) - 2 * beta2, origin="multicup")
        return cls(bf, side, eps, lo, 2 * beta2 - bf.derivative(lo, 2), origin="multicup")

    def in_domain(self, u: float) -> bool:
        if self.side is Side.RIGHT:
            return u >= self.start
        return u <= self.start

    def value(self, u: float, strict: bool = True) -> float:
        if strict and not self.in_domain(u):
            raise OutOfDomain(f"{self.side.value} force starting at {self.start} evaluated at {u}")
        cached = self._memo.get(u)
        if cached is not None:
            return cached
        sign = self.side.sign
        if math.isfinite(self.start):
            head = self.start_value * math.exp(sign * (self.start - u) / self.eps)
        else:
            head = 0.0
        if self.side is Side.RIGHT:
            integral = self.bf.weighted_stieltjes(self.start, u, self.eps, 1, shift=u)
        else:
            integral = self.bf.weighted_stieltjes(u, self.start, self.eps, -1, shift=u)
        result = head + integral
        if len(self._memo) < 4096:
            self._memo[u] = result
        return result

    def derivative(self, u: float) -> float:
        """The right side of the force's differential equation at ``u``."""
        third = self.bf.derivative(u, 3)
        current = self.value(u, strict=False)
        if self.side is Side.RIGHT:
            return third - current / self.eps
        return current / self.eps - third

    def valid_sign(self, value: float) -> bool:
        """Right forces are negative on their tails, left forces positive."""
        return value < 0 if self.side is Side.RIGHT else value > 0


@define(frozen=True, eq=False)
class ChordalDomainForce:
    """
    Force of a chordal domain whose chords have lengths up to ``l_top``.

    Inside the domain, at ``u = b(l)`` (right) or ``u = a(l)`` (left), the value is the differential of the chord of
    length ``l``. Beyond the top chord it continues as the top chord's force.
    """

    table: ChordalDomainTable
    side: Side
    eps: float
    l_top: float

    @property
    def bf(self) -> BoundaryFunction:
        return self.table.bf

    @property
    def top(self) -> Chord:
        return chord_at(self.table, self.l_top)

    @property
    def start(self) -> float:
        """Bottom of the domain on the force's side."""
        return self.table.seed.b if self.side is Side.RIGHT else self.table.seed.a

    def outer(self) -> Force:
        return Force.of_chord(self.bf, self.top, self.side, self.eps)

    def in_domain(self, u: float) -> bool:
        if self.side is Side.RIGHT:
            return u > self.start or (self.table.kind is not TableKind.CUP and u >= self.start)
        return u < self.start or (self.table.kind is not TableKind.CUP and u <= self.start)

    def value(self, u: float, strict: bool = True) -> float:
        top = self.top
        if self.side is Side.RIGHT:
            if u >= top.b:
                return self.outer().value(u)
            if strict and not self.in_domain(u):
                raise OutOfDomain(f"Chordal domain force evaluated at {u} below its bottom {self.start}")
            return chord_at(self.table, length_at_right_end(self.table, u)).dr
        if u <= top.a:
            return self.outer().value(u)
        if strict and not self.in_domain(u):
            raise OutOfDomain(f"Chordal domain force evaluated at {u} above its bottom {self.start}")
        return -chord_at(self.table, length_at_left_end(self.table, u)).dl

    def derivative(self, u: float) -> float:
        top = self.top
        if (self.side is Side.RIGHT and u >= top.b) or (self.side is Side.LEFT and u <= top.a):
            return self.outer().derivative(u)
        length = (
            length_at_right_end(self.table, u) if self.side is Side.RIGHT else length_at_left_end(self.table, u)
        )
        third = self.bf.derivative(u, 3)
        return third - 2 * self.value(u) / length if self.side is Side.RIGHT else 2 * self.value(u) / length - third


AnyForce = Union[Force, ChordalDomainForce]


def force_eval(force: AnyForce, u: float, strict: bool = True) -> float:
    """
    Value of a force at ``u``. With ``strict=False`` a chord or infinity force is continued analytically past its
    start, which keeps event functions of the evolution smooth through crashes.
    """
    return force.value(u, strict=strict)


@define(frozen=True)
class Tail:
    """
    The interval next to a force's start where it keeps its strict sign.

    :param force: The force
    :param endpoint: First sign loss, or an infinity when none was found up to ``scanned_to``
    :param scanned_to: How far the scan went
    """

    force: AnyForce
    endpoint: float
    scanned_to: float

    def covers(self, point: float) -> bool:
        """Whether the closed tail reaches ``point``."""
        if self.force.side is Side.RIGHT:
            return point <= self.endpoint
        return point >= self.endpoint


def _scan_step(bf: BoundaryFunction, eps: float) -> float:
    gap = bf.roots.min_gap()
    return min(eps, gap if math.isfinite(gap) and gap > 0 else eps) / TAIL_SCAN_POINTS


def tail_endpoint(force: AnyForce, limit: float | None = None) -> Tail:
    """
    Scan from the force's start in its direction for the first point where it loses its sign.

    :param force: The force
    :param limit: Stop scanning there (the far end of the gap of interest), defaults to the truncation horizon
    """
    sign = force.side.sign
    horizon = settings.horizon
    far = sign * horizon if limit is None else max(-horizon, min(horizon, limit))
    start = force.start
    position = max(start, -horizon) if sign > 0 else min(start, horizon)
    step = _scan_step(force.bf, force.eps)
    # the origin of a cup is excluded from its own tail
    position += sign * min(step, 1e-9 * (1 + abs(position)))
    previous = position
    while sign * (far - position) > 0:
        value = force_eval(force, position, strict=False)
        if not _valid(force, value):
            if previous == position:
                return Tail(force, position, position)
            return Tail(force, _refine_sign_loss(force, previous, position), position)
        previous = position
        position = position + sign * step
        if sign * (position - far) > 0:
            position = far
        step = min(step * 1.05, force.eps)
        if previous == far:
            break
    value = force_eval(force, far, strict=False)
    if not _valid(force, value):
        return Tail(force, _refine_sign_loss(force, previous, far), far)
    return Tail(force, sign * math.inf, far)


def _valid(force: AnyForce, value: float) -> bool:
    return value < 0 if force.side is Side.RIGHT else value > 0


def _refine_sign_loss(force: AnyForce, good: float, bad: float) -> float:
    def value(u: float) -> float:
        return force_eval(force, u, strict=False)

    if value(bad) == 0:
        return bad
    return float(optimize.brentq(value, good, bad, xtol=BALANCE_XTOL))


def sum_of_forces(right: AnyForce, left: AnyForce) -> Callable[[float], float]:
    """The left side ``u -> F_R(u) + F_L(u)`` of the balance equation, continued past both starts."""

    def total(u: float) -> float:
        return force_eval(right, u, strict=False) + force_eval(left, u, strict=False)

    return total


def _clip(value: float) -> float:
    horizon = settings.horizon
    return max(-horizon, min(horizon, value))


def balance_root(
    right: AnyForce,
    left: AnyForce,
    bracket: tuple[float, float],
    guess: float | None = None,
) -> float | None:
    """
    Root of ``F_R(w) + F_L(w) = 0`` in ``bracket`` where the sum crosses from negative to positive.

    With a guess the sign change nearest to it is returned, otherwise the first one from the left. Infinite bracket
    ends are truncated at the horizon.
    """
    p, q = _clip(bracket[0]), _clip(bracket[1])
    if not (math.isfinite(p) and math.isfinite(q)) or not p < q:
        raise BracketInvalid(f"Invalid balance bracket {bracket}")
    total = sum_of_forces(right, left)

    def solve(lo: float, hi: float, f_lo: float, f_hi: float) -> float:
        if f_lo == 0:
            return lo
        if f_hi == 0:
            return hi
        return float(optimize.brentq(total, lo, hi, xtol=BALANCE_XTOL, rtol=ROOT_RTOL))

    if guess is not None and p <= guess <= q:
        delta = 1e-6 * (1 + abs(guess))
        lo, hi = guess, guess
        f_lo = f_hi = total(guess)
        if f_lo == 0:
            return guess
        while lo > p or hi < q:
            new_lo, new_hi = max(p, lo - delta), min(q, hi + delta)
            g_lo, g_hi = total(new_lo), total(new_hi)
            if g_lo <= 0 <= f_lo:
                return solve(new_lo, lo, g_lo, f_lo)
            if f_hi <= 0 <= g_hi:
                return solve(hi, new_hi, f_hi, g_hi)
            lo, hi, f_lo, f_hi = new_lo, new_hi, g_lo, g_hi
            delta *= 2
        return None

    grid = np.linspace(p, q, BALANCE_SCAN_POINTS + 1)
    values = [total(float(point)) for point in grid]
    for index in range(len(grid) - 1):
        if values[index] <= 0 <= values[index + 1] and not values[index] == values[index + 1] == 0:
            return solve(float(grid[index]), float(grid[index + 1]), values[index], values[index + 1])
    return None


def force_derivative_check(force: AnyForce, u: float, h: float = 1e-5) -> float:
    """
    Difference between a centered finite difference of the force at ``u`` and its differential equation.
    """
    try:
        forward = force_eval(force, u + h, strict=False)
        backward = force_eval(force, u - h, strict=False)
    except OutOfRange:
        forward = force_eval(force, u + h, strict=False)
        backward = force_eval(force, u, strict=False)
        return abs((forward - backward) / h - force.derivative(u))
    return abs((forward - backward) / (2 * h) - force.derivative(u))


def force_rows(right: AnyForce, left: AnyForce, points: np.ndarray) -> Iterator[tuple[float, float, float, float]]:
    """Rows ``(u, F_R, F_L, F_R + F_L)`` for the diagnostic dump."""
    for point in points:
        u = float(point)
        value_r = force_eval(right, u, strict=False)
        value_l = force_eval(left, u, strict=False)
        yield u, value_r, value_l, value_r + value_l
