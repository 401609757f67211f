"""
Chords satisfying the cup equation and the chordal domains they foliate.

A chordal domain is grown by numerical continuation in the chord length ``l``: the predictor follows
``a' = -D_R / (D_L + D_R)`` and ``b' = D_L / (D_L + D_R)``, the corrector is a one-dimensional Newton iteration on the
cup equation with the length held fixed.
"""

from __future__ import annotations

import math
from typing import Iterator, Union

import numpy as np
from attr import define, field
from scipy import optimize
from scipy.interpolate import PchipInterpolator

from bellman import settings
from bellman.boundary_function import BoundaryFunction, eval_derivs
from bellman.constants import CHORD_STEP, CUP_BIRTH_FACTOR, GAUSS_NODES, ROOT_RTOL, TOL_CUP, StopReason, TableKind
from bellman.exceptions import ContinuationStall, OutOfRange, SeedInvalid
from bellman.log import get_logger

logger = get_logger(__name__)

NEWTON_ITERATIONS = 40
NEWTON_XTOL = 1e-14
MIN_STEP = 1e-12
GAUSS_POINTS, GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(GAUSS_NODES)


@define(frozen=True)
class Chord:
    """
    A chord ``[a, b]`` of the lower parabola together with its differentials.
    """

    a: float
    b: float
    dl: float = 0.0
    dr: float = 0.0

    @property
    def length(self) -> float:
        return self.b - self.a

    @property
    def middle(self) -> float:
        return 0.5 * (self.a + self.b)

    def height(self, x1: float) -> float:
        """Height of the chord's line above abscissa ``x1``."""
        return (self.a + self.b) * x1 - self.a * self.b


def _averages(bf: BoundaryFunction, a: float, b: float) -> tuple[tuple[float, ...], tuple[float, ...], float, float]:
    left = eval_derivs(bf, a)
    right = eval_derivs(bf, b)
    mean_f1 = (right[0] - left[0]) / (b - a)
    mean_f2 = (right[1] - left[1]) / (b - a)
    return left, right, mean_f1, mean_f2


def cup_residual(bf: BoundaryFunction, a: float, b: float) -> float:
    """Return ``f'(a) + f'(b) - 2 <f'>`` over ``[a, b]``."""
    if not a < b:
        raise SeedInvalid(f"A chord needs a < b, got [{a}, {b}]")
    left, right, mean_f1, _ = _averages(bf, a, b)
    return left[1] + right[1] - 2 * mean_f1


def differentials(bf: BoundaryFunction, a: float, b: float) -> tuple[float, float]:
    """Return ``(D_L, D_R) = (f''(a) - <f''>, f''(b) - <f''>)`` over ``[a, b]``."""
    if a == b:
        return 0.0, 0.0
    left, right, _, mean_f2 = _averages(bf, a, b)
    return left[2] - mean_f2, right[2] - mean_f2


def chord_coefficients(bf: BoundaryFunction, a: float, b: float) -> tuple[float, float, float]:
    """
    Coefficients ``(g0, g1, g2)`` of the linear function ``g0 + g1 x1 + g2 x2`` that equals f at both ends of a chord.
    """
    fa, f1a, f2a, _ = eval_derivs(bf, a)
    if a == b:
        g2 = 0.5 * f2a
    else:
        g2 = (eval_derivs(bf, b)[1] - f1a) / (2 * (b - a))
    g1 = f1a - 2 * a * g2
    g0 = fa - g1 * a - g2 * a * a
    return g0, g1, g2


def cup_tolerance(bf: BoundaryFunction, a: float, b: float, tol_cup: float = TOL_CUP) -> float:
    return tol_cup * (1 + abs(eval_derivs(bf, a)[1]) + abs(eval_derivs(bf, b)[1]))


def make_chord(bf: BoundaryFunction, a: float, b: float) -> Chord:
    dl, dr = differentials(bf, a, b)
    return Chord(a, b, dl, dr)


def _third_integrals(bf: BoundaryFunction, a: float, b: float) -> tuple[float, float]:
    """
    ``(Phi, D_L + D_R)`` of ``[a, b]`` as integrals of f''' against ``(t - a)(b - t) / l`` and ``(2t - a - b) / l``.

    Both forms are free of the cancellation the difference quotients suffer on short chords.
    """
    length = b - a
    cuts = [a, *(t for t in bf.breaks if a < t < b), b]
    points, weights = [], []
    for lo, hi in zip(cuts, cuts[1:]):
        edges = np.linspace(lo, hi, max(1, math.ceil(hi - lo)) + 1)
        half = 0.5 * np.diff(edges)
        points.append((edges[:-1, None] + half[:, None] * (GAUSS_POINTS + 1)).ravel())
        weights.append((half[:, None] * GAUSS_WEIGHTS).ravel())
    t, w = np.concatenate(points), np.concatenate(weights)
    third = w * np.asarray(bf.derivative(t, 3), dtype=float)
    return float(np.sum(third * (t - a) * (b - t))) / length, float(np.sum(third * (2 * t - a - b))) / length


def _residual_and_slope(bf: BoundaryFunction, s: float, length: float) -> tuple[float, float, float]:
    """Cup residual of ``[s, s + length]`` and its derivative in ``s``, plus the tolerance at that chord."""
    a, b = s, s + length
    residual, slope = _third_integrals(bf, a, b)
    tolerance = TOL_CUP * (1 + abs(eval_derivs(bf, a)[1]) + abs(eval_derivs(bf, b)[1]))
    return residual, slope, tolerance


def correct(bf: BoundaryFunction, guess: float, length: float, tol_cup: float = TOL_CUP) -> float | None:
    """
    Newton iteration on ``Phi(s, s + length) = 0`` from ``guess``, run until the step stalls. Returns the left end or
    None on failure.
    """
    s = guess
    for _ in range(NEWTON_ITERATIONS):
        residual, slope, _ = _residual_and_slope(bf, s, length)
        if residual == 0:
            return s
        if slope == 0 or not math.isfinite(slope):
            break
        step = residual / slope
        if abs(step) > length + 1.0:
            return None
        s -= step
        if abs(step) <= NEWTON_XTOL * (1 + abs(s) + length):
            break
    residual, _, tolerance = _residual_and_slope(bf, s, length)
    return s if abs(residual) <= tolerance * tol_cup / TOL_CUP else None


@define(frozen=True, eq=False)
class ChordalDomainTable:
    """
    The continuation branch ``l -> (a(l), b(l))`` of a chordal domain.

    :param kind: What the domain was grown from
    :param seed: The origin point (as a degenerate chord) or the bottom chord
    :param lengths: Increasing chord lengths, the first one is ``l_min``
    :param left: ``a(l)``, decreasing
    :param right: ``b(l)``, increasing
    :param dl: ``D_L(a(l), b(l))``
    :param dr: ``D_R(a(l), b(l))``
    :param stop_reason: Why the continuation stopped at ``l_max``
    """

    bf: BoundaryFunction
    kind: TableKind
    seed: Chord
    lengths: np.ndarray
    left: np.ndarray
    right: np.ndarray
    dl: np.ndarray
    dr: np.ndarray
    stop_reason: StopReason = StopReason.L_MAX
    _interpolator: PchipInterpolator | None = field(default=None, init=False)

    @property
    def l_min(self) -> float:
        return float(self.lengths[0])

    @property
    def l_max(self) -> float:
        return float(self.lengths[-1])

    @property
    def origin(self) -> float | None:
        """The point root the cup grew from, None for domains grown over a chord."""
        return self.seed.a if self.kind is TableKind.CUP else None

    def interpolate_left(self, length: float | np.ndarray) -> float | np.ndarray:
        if self._interpolator is None:
            object.__setattr__(self, "_interpolator", PchipInterpolator(self.lengths, self.left))
        return self._interpolator(length)  # type: ignore[misc]

    def to_rows(self) -> Iterator[tuple[float, float, float, float, float]]:
        """Rows ``(l, a, b, D_L, D_R)`` of the table."""
        for row in zip(self.lengths, self.left, self.right, self.dl, self.dr):
            yield tuple(float(value) for value in row)  # type: ignore[misc]

    def __len__(self) -> int:
        return len(self.lengths)


Seed = Union[float, Chord]


def _root_gap_near(bf: BoundaryFunction, c: float) -> float:
    others = [
        point
        for root in bf.roots.ordered()
        for point in (root.lo, root.hi)
        if math.isfinite(point) and abs(point - c) > 0
    ]
    return min((abs(point - c) for point in others), default=1.0)


def _cup_birth(bf: BoundaryFunction, c: float, tol_cup: float) -> Chord:
    """The first chord of a cup at a point root, bracketed by ``Phi(c - l0, c) > 0 > Phi(c, c + l0)``."""
    length = CUP_BIRTH_FACTOR * min(_root_gap_near(bf, c), 1.0)
    lower = _third_integrals(bf, c - length, c)[0]
    upper = _third_integrals(bf, c, c + length)[0]
    scale = float(np.max(np.abs(bf.derivative(np.linspace(c - length, c + length, 9), 3))))
    noise = 1e-12 * scale * length * length
    if lower > noise and upper < -noise:
        s = optimize.brentq(
            lambda s: _third_integrals(bf, s, s + length)[0], c - length, c, xtol=1e-16, rtol=ROOT_RTOL
        )
    elif lower >= -noise and upper <= noise:
        s = c - 0.5 * length
    else:
        raise SeedInvalid(f"{c} is not the origin of a cup: Phi changes from {lower:.3e} to {upper:.3e}")
    corrected = correct(bf, s, length, tol_cup)
    s = s if corrected is None else corrected
    return make_chord(bf, s, s + length)


def _differentials_negative(chord: Chord) -> bool:
    return chord.dl < 0 and chord.dr < 0


def _locate_stop(bf: BoundaryFunction, low: Chord, high_length: float, tol_cup: float) -> Chord:
    """Bisect in the length between a chord with negative differentials and one where they fail."""
    lo_length, lo_chord = low.length, low
    hi_length = high_length
    for _ in range(60):
        if hi_length - lo_length <= 1e-13 * (1 + hi_length):
            break
        mid = 0.5 * (lo_length + hi_length)
        ratio = (mid - low.length) / (high_length - low.length)
        s = correct(bf, low.a - ratio * (high_length - low.length) * 0.5, mid, tol_cup)
        if s is None:
            hi_length = mid
            continue
        chord = make_chord(bf, s, s + mid)
        if _differentials_negative(chord) and chord.a < lo_chord.a:
            lo_length, lo_chord = mid, chord
        else:
            hi_length = mid
    return lo_chord


def grow_chordal_domain(
    bf: BoundaryFunction,
    seed: Seed,
    l_max: float,
    kind: TableKind | None = None,
    tol_cup: float = TOL_CUP,
) -> ChordalDomainTable:
    """
    Grow a chordal domain from a point root of f''' (a cup) or above a chord, up to the chord length ``l_max``.

    :param seed: A point root ``c`` or a chord satisfying the cup equation
    :param l_max: Largest chord length to reach
    :param kind: ``TableKind.OVER_HULL`` for the hull chord of a closed multicup; inferred otherwise
    """
    if isinstance(seed, Chord):
        kind = kind or TableKind.OVER_CHORD
        if not seed.a < seed.b:
            raise SeedInvalid(f"Seed chord [{seed.a}, {seed.b}] is degenerate.")
        residual = cup_residual(bf, seed.a, seed.b)
        if abs(residual) > 1e3 * cup_tolerance(bf, seed.a, seed.b, tol_cup):
            raise SeedInvalid(f"Seed chord [{seed.a}, {seed.b}] violates the cup equation (residual {residual:.3e}).")
        start = make_chord(bf, seed.a, seed.b)
        if start.dl > 1e-9 or start.dr > 1e-9:
            raise SeedInvalid(f"Seed chord [{seed.a}, {seed.b}] has a positive differential.")
        origin = start
        chords = [start]
    else:
        kind = TableKind.CUP
        c = float(seed)
        origin = Chord(c, c, 0.0, 0.0)
        chords = [origin, _cup_birth(bf, c, tol_cup)]

    stop_reason = StopReason.L_MAX
    step = CHORD_STEP * (1 + chords[-1].length)
    horizon = settings.horizon
    while chords[-1].length < l_max:
        current = chords[-1]
        step = min(step, l_max - current.length)
        total = current.dl + current.dr
        if abs(total) > 1e-14 and _differentials_negative(current):
            slope = -current.dr / total
        elif len(chords) > 1 and chords[-2].length < current.length:
            previous = chords[-2]
            slope = (current.a - previous.a) / (current.length - previous.length)
        else:
            slope = -0.5
        new_length = current.length + step
        s = correct(bf, current.a + slope * step, new_length, tol_cup)
        if s is None or not (s < current.a and s + new_length > current.b):
            step *= 0.5
            if step < MIN_STEP * (1 + current.length):
                if len(chords) <= 2 and kind is TableKind.CUP or len(chords) == 1:
                    raise ContinuationStall(f"Continuation from {origin} stalled at l={current.length:.6g}")
                logger.warning(f"Continuation stalled at l={current.length:.6g}, closing the table there.")
                stop_reason = StopReason.STALL
                break
            continue
        chord = make_chord(bf, s, s + new_length)
        if not _differentials_negative(chord):
            if _differentials_negative(current) or len(chords) == 1:
                stopped = current
                if _differentials_negative(current):
                    stopped = _locate_stop(bf, current, new_length, tol_cup)
                if stopped is not current:
                    chords.append(stopped)
            stop_reason = StopReason.DIFFERENTIAL
            break
        chords.append(chord)
        if chord.a < -horizon or chord.b > horizon:
            stop_reason = StopReason.STALL
            break
        step = min(step * 1.5, CHORD_STEP * (1 + new_length))

    table = ChordalDomainTable(
        bf=bf,
        kind=kind,
        seed=origin,
        lengths=np.array([chord.length for chord in chords]),
        left=np.array([chord.a for chord in chords]),
        right=np.array([chord.b for chord in chords]),
        dl=np.array([chord.dl for chord in chords]),
        dr=np.array([chord.dr for chord in chords]),
        stop_reason=stop_reason,
    )
    logger.debug(
        f"Grew {kind.value} table from [{origin.a:.6g}, {origin.b:.6g}] with {len(table)} chords up to "
        f"l={table.l_max:.6g} ({stop_reason.value})"
    )
    return table


def chord_at(table: ChordalDomainTable, length: float, tol_cup: float = TOL_CUP) -> Chord:
    """
    The chord of length ``length`` of a table: monotone interpolation of the samples, then Newton on the cup equation.
    """
    slack = 1e-12 * (1 + table.l_max)
    if not table.l_min - slack <= length <= table.l_max + slack:
        raise OutOfRange(f"Length {length} outside the table range [{table.l_min}, {table.l_max}]")
    length = min(max(length, table.l_min), table.l_max)
    index = int(np.searchsorted(table.lengths, length))
    if index < len(table) and table.lengths[index] == length:
        return Chord(
            float(table.left[index]), float(table.right[index]), float(table.dl[index]), float(table.dr[index])
        )
    if length == 0:
        return table.seed
    guess = float(table.interpolate_left(length))
    s = correct(table.bf, guess, length, tol_cup)
    if s is None:
        s = guess
    return make_chord(table.bf, s, s + length)


def length_at_right_end(table: ChordalDomainTable, u: float) -> float:
    """The length ``l`` with ``b(l) = u``."""
    if not table.right[0] <= u <= table.right[-1]:
        raise OutOfRange(f"{u} is not a right end of the table's chords")
    guess = float(np.interp(u, table.right, table.lengths))
    low, high = guess, guess
    index = int(np.searchsorted(table.right, u))
    low = float(table.lengths[max(index - 1, 0)])
    high = float(table.lengths[min(index, len(table) - 1)])
    if low == high:
        return low
    return float(optimize.brentq(lambda length: chord_at(table, length).b - u, low, high, xtol=1e-15))


def length_at_left_end(table: ChordalDomainTable, u: float) -> float:
    """The length ``l`` with ``a(l) = u``."""
    if not table.left[-1] <= u <= table.left[0]:
        raise OutOfRange(f"{u} is not a left end of the table's chords")
    reversed_left = table.left[::-1]
    index = len(table) - int(np.searchsorted(reversed_left, u))
    low = float(table.lengths[max(index - 1, 0)])
    high = float(table.lengths[min(index, len(table) - 1)])
    if low == high:
        return low
    return float(optimize.brentq(lambda length: chord_at(table, length).a - u, low, high, xtol=1e-15))


def chord_through(table: ChordalDomainTable, x1: float, x2: float, l_lo: float, l_hi: float) -> Chord | None:
    """
    The chord of the table passing through ``(x1, x2)`` with length in ``[l_lo, l_hi]``, None if there is none.
    """
    nodes = (table.lengths >= l_lo) & (table.lengths <= l_hi)
    lengths = np.concatenate([[l_lo], table.lengths[nodes], [l_hi]])
    lefts = np.concatenate([[chord_at(table, l_lo).a], table.left[nodes], [chord_at(table, l_hi).a]])
    rights = lefts + lengths
    heights = (x1 - lefts) * (rights - x1) - (x2 - x1 * x1)

    def gap(length: float) -> float:
        chord = chord_at(table, length)
        return (x1 - chord.a) * (chord.b - x1) - (x2 - x1 * x1)

    scale = 1e-12 * (1 + abs(x2))
    if heights[0] > scale or heights[-1] < -scale:
        return None
    crossing = int(np.argmax(heights >= 0))
    if crossing == 0:
        chord = chord_at(table, float(lengths[0]))
    else:
        low, high = float(lengths[crossing - 1]), float(lengths[crossing])
        if gap(low) >= 0:
            chord = chord_at(table, low)
        elif gap(high) <= 0:
            chord = chord_at(table, high)
        else:
            chord = chord_at(table, float(optimize.brentq(gap, low, high, xtol=1e-15)))
    if not chord.a - scale <= x1 <= chord.b + scale:
        return None
    return chord
