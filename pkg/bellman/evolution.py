"""
Evolution of the foliation in the BMO radius.

The figures of a foliation are kept as a chain of knots ordered along the lower boundary. Between two consecutive
knots lies a gap foliated by tangents; exactly one of the two knots emits the force that drives them. The chain is
solved at every radius (chord lengths, trolleybus bases, angle vertices), monitored through event functions that stay
positive while the chain is valid, and modified at the radii where some event crosses zero.
"""

from __future__ import annotations

import math
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Set, Tuple

import attr
import numpy as np
from attr import define, field
from scipy import optimize

from bellman import settings
from bellman.boundary_function import BoundaryFunction, EssentialRoot, root_gap
from bellman.candidates import quadratic_coefficients
from bellman.chords import (
    Chord,
    ChordalDomainTable,
    chord_at,
    chord_coefficients,
    grow_chordal_domain,
    make_chord,
)
from bellman.constants import (
    CHORD_STEP,
    MAX_EPS_STEP,
    ROOT_RTOL,
    SIMPLE_PICTURE_HALVINGS,
    TOL_BISECT,
    TOL_EVENT,
    EdgeKind,
    EventKind,
    KnotKind,
    RootKind,
    Side,
    StopReason,
    TableKind,
    VertexKind,
)
from bellman.exceptions import (
    BellmanError,
    ContinuationStall,
    Divergent,
    EpsTooLarge,
    IterationCapExceeded,
    OutOfRange,
    SeedInvalid,
    StepTooLarge,
    UnknownConfiguration,
)
from bellman.foliation import BellmanCandidate, FoliationGraph, assemble
from bellman.foliation.entities import Vertex
from bellman.forces import Force, balance_root, force_eval, tail_endpoint
from bellman.log import get_logger

logger = get_logger(__name__)

Coefficients = Tuple[float, float, float]
ROOT_SCAN_POINTS = 64
SPLIT_TOLERANCE = 1e-8
DESINTEGRATION_OFFSET = 1e-7


@define
class ChordalStack:
    """
    A chordal domain table and what lies under it: the closed multicup of a domain grown over its hull, or the stack
    a domain grown over a chord continues.
    """

    table: ChordalDomainTable
    base: Optional[ClosedMulticup] = None
    below: Optional[ChordalStack] = None


@define(frozen=True)
class InnerChord:
    """A chord frozen inside a multicup, with the stack it was cut from."""

    stack: ChordalStack
    length: float
    chord: Chord


@define(frozen=True)
class ClosedMulticup:
    arcs: Tuple[Tuple[float, float], ...]
    inner: Tuple[InnerChord, ...]
    beta: Coefficients

    @property
    def hull(self) -> Tuple[float, float]:
        return self.arcs[0][0], self.arcs[-1][1]


@define
class Knot:
    """
    One figure of the chain. Which fields are used depends on ``kind``:

    - infinities: ``emits`` and an optional ``ray`` where f is quadratic beyond;
    - full chordal domains, trolleybuses and birdies: ``stack``, ``length`` and ``chord``;
    - angles: ``w``;
    - multicups: ``arcs``, ``inner`` and ``beta``.
    """

    kind: KnotKind
    stack: Optional[ChordalStack] = None
    emits: bool = False
    ray: Optional[float] = None
    w: float = math.nan
    length: float = math.nan
    chord: Optional[Chord] = None
    arcs: Tuple[Tuple[float, float], ...] = ()
    inner: Tuple[InnerChord, ...] = ()
    beta: Optional[Coefficients] = None
    l_right: float = math.nan
    l_left: float = math.nan

    @property
    def left_end(self) -> float:
        if self.kind is KnotKind.NEG_INF:
            return -math.inf
        if self.kind is KnotKind.POS_INF:
            return math.inf if self.ray is None else self.ray
        if self.kind is KnotKind.ANGLE:
            return self.w
        if self.kind is KnotKind.MULTICUP:
            return self.arcs[0][0]
        assert self.chord is not None
        return self.chord.a

    @property
    def right_end(self) -> float:
        if self.kind is KnotKind.NEG_INF:
            return -math.inf if self.ray is None else self.ray
        if self.kind is KnotKind.POS_INF:
            return math.inf
        if self.kind is KnotKind.ANGLE:
            return self.w
        if self.kind is KnotKind.MULTICUP:
            return self.arcs[-1][1]
        assert self.chord is not None
        return self.chord.b

    @property
    def emits_right(self) -> bool:
        if self.kind is KnotKind.NEG_INF:
            return self.emits
        return self.kind in (KnotKind.FULL_CHORDAL, KnotKind.MULTICUP, KnotKind.TROLLEYBUS_R)

    @property
    def emits_left(self) -> bool:
        if self.kind is KnotKind.POS_INF:
            return self.emits
        return self.kind in (KnotKind.FULL_CHORDAL, KnotKind.MULTICUP, KnotKind.TROLLEYBUS_L)

    @property
    def is_chordal(self) -> bool:
        return self.kind in (KnotKind.FULL_CHORDAL, KnotKind.TROLLEYBUS_R, KnotKind.TROLLEYBUS_L, KnotKind.BIRDIE)

    def copy(self) -> Knot:
        return attr.evolve(self)

    def describe(self) -> str:
        if self.kind is KnotKind.ANGLE:
            return f"angle(w={self.w:.6g})"
        if self.kind is KnotKind.MULTICUP:
            return f"multicup[{self.left_end:.6g}, {self.right_end:.6g}]"
        if self.kind in (KnotKind.NEG_INF, KnotKind.POS_INF):
            return f"{self.kind.value}({'emits' if self.emits else 'absorbs'})"
        return f"{self.kind.value}[{self.left_end:.6g}, {self.right_end:.6g}]"


@define(frozen=True)
class Event:
    """
    A monitored quantity of a solved chain, positive while the chain is valid.

    :param position: Index of the knot, or of the gap (between knots ``position`` and ``position + 1``) when ``on_gap``
    """

    kind: EventKind
    position: int
    value: float
    on_gap: bool = False

    @property
    def key(self) -> Tuple[str, int, bool]:
        return self.kind.value, self.position, self.on_gap


class _Unsolvable(BellmanError):
    """A knot of the chain has no solution at the requested radius."""

    def __init__(self, message: str, position: int) -> None:
        super().__init__(message)
        self.position = position


def _nearest_root(
    function: Callable[[float], float], lo: float, hi: float, guess: float | None, samples: int = ROOT_SCAN_POINTS
) -> float | None:
    """Sign change of ``function`` on ``[lo, hi]`` closest to ``guess`` (or the rightmost one), refined with brentq."""
    if not lo < hi:
        value = function(hi)
        return hi if abs(value) <= 1e-12 else None
    grid = np.linspace(lo, hi, samples + 1)
    values = [function(float(point)) for point in grid]
    candidates: List[Tuple[float, float]] = []
    for index in range(samples):
        left, right = values[index], values[index + 1]
        if left == 0:
            candidates.append((float(grid[index]), float(grid[index])))
        elif left * right < 0:
            candidates.append((float(grid[index]), float(grid[index + 1])))
    if values[-1] == 0:
        candidates.append((hi, hi))
    if not candidates:
        tiny = [point for point, value in zip(grid, values) if abs(value) <= 1e-12]
        return float(tiny[-1]) if tiny else None
    if guess is None:
        bracket = candidates[-1]
    else:
        bracket = min(candidates, key=lambda pair: abs(0.5 * (pair[0] + pair[1]) - guess))
    if bracket[0] == bracket[1]:
        return bracket[0]
    return float(optimize.brentq(function, bracket[0], bracket[1], xtol=1e-14, rtol=ROOT_RTOL))


@define
class Chain:
    """
    The knots of a foliation, solved at radius ``eps``.

    :param formed: Figures that existed only at the critical radius the chain was modified at
    """

    bf: BoundaryFunction
    eps: float
    knots: List[Knot]
    l_max: float
    formed: Tuple[VertexKind, ...] = ()

    def copy(self) -> Chain:
        return Chain(self.bf, self.eps, [knot.copy() for knot in self.knots], self.l_max)

    def emitted(self, index: int, side: Side) -> Force:
        """Force emitted by knot ``index`` towards ``side``."""
        knot = self.knots[index]
        bf, eps = self.bf, self.eps
        if knot.kind in (KnotKind.NEG_INF, KnotKind.POS_INF):
            return Force.of_infinity(bf, side, eps, knot.ray)
        if knot.kind is KnotKind.MULTICUP:
            assert knot.beta is not None
            return Force.of_multicup(bf, side, eps, knot.left_end, knot.right_end, knot.beta[2])
        assert knot.chord is not None
        return Force.of_chord(bf, knot.chord, side, eps)

    def emitter(self, gap: int) -> Tuple[int, Side]:
        """Index of the knot emitting into a gap and the side of the tangents there."""
        left, right = self.knots[gap], self.knots[gap + 1]
        if left.emits_right and not right.emits_left:
            return gap, Side.RIGHT
        if right.emits_left and not left.emits_right:
            return gap + 1, Side.LEFT
        problem = "two emitters" if left.emits_right else "no emitter"
        raise UnknownConfiguration(f"The gap between {left.describe()} and {right.describe()} has {problem}")

    def gap_force(self, gap: int) -> Force:
        index, side = self.emitter(gap)
        return self.emitted(index, side)

    def signature(self) -> Tuple[Any, ...]:
        """The chordal part of the chain: changes of it make a critical point essential."""
        parts: List[Any] = []
        for knot in self.knots:
            if knot.is_chordal:
                assert knot.stack is not None
                parts.append(("chordal", _table_key(knot.stack.table)))
            elif knot.kind is KnotKind.MULTICUP:
                parts.append(("multicup", knot.arcs, tuple(_table_key(inner.stack.table) for inner in knot.inner)))
            elif knot.kind in (KnotKind.NEG_INF, KnotKind.POS_INF):
                parts.append((knot.kind.value, knot.ray))
        return tuple(parts)

    def describe(self) -> str:
        return " ".join(knot.describe() for knot in self.knots)


def _table_key(table: ChordalDomainTable) -> Tuple[str, float, float]:
    return table.kind.value, round(table.seed.a, 9), round(table.seed.b, 9)


def _full_chord(chain: Chain, index: int, knot: Knot) -> None:
    assert knot.stack is not None
    try:
        knot.chord = chord_at(knot.stack.table, 2 * chain.eps)
    except OutOfRange as error:
        raise _Unsolvable(str(error), index) from error
    knot.length = 2 * chain.eps


def _trolleybus_condition(chain: Chain, index: int, side: Side) -> Callable[[float], float]:
    """
    Zero where the base of a trolleybus balances the force of its neighbour: ``F_R(a) = D_L`` for a right
    trolleybus, ``D_R + F_L(b) = 0`` for a left one.
    """
    knot = chain.knots[index]
    assert knot.stack is not None
    table = knot.stack.table
    if side is Side.RIGHT:
        force = chain.gap_force(index - 1)

        def condition(length: float) -> float:
            chord = chord_at(table, length)
            return force_eval(force, chord.a, strict=False) - chord.dl

    else:
        force = chain.gap_force(index)

        def condition(length: float) -> float:
            chord = chord_at(table, length)
            return chord.dr + force_eval(force, chord.b, strict=False)

    return condition


def _solve_base(chain: Chain, index: int, side: Side, guess: float) -> float:
    knot = chain.knots[index]
    assert knot.stack is not None
    table = knot.stack.table
    hi = min(2 * chain.eps, table.l_max)
    guess_or_none = None if math.isnan(guess) else guess
    root = _nearest_root(_trolleybus_condition(chain, index, side), table.l_min, hi, guess_or_none)
    if root is None:
        raise _Unsolvable(f"No base for {knot.describe()} at eps={chain.eps}", index)
    return root


def _solve_knot(chain: Chain, index: int) -> None:
    knot = chain.knots[index]
    if knot.kind in (KnotKind.TROLLEYBUS_R, KnotKind.TROLLEYBUS_L):
        side = Side.RIGHT if knot.kind is KnotKind.TROLLEYBUS_R else Side.LEFT
        knot.length = _solve_base(chain, index, side, knot.length)
        assert knot.stack is not None
        knot.chord = chord_at(knot.stack.table, knot.length)
    elif knot.kind is KnotKind.BIRDIE:
        knot.l_right = _solve_base(chain, index, Side.RIGHT, knot.length)
        knot.l_left = _solve_base(chain, index, Side.LEFT, knot.length)
        knot.length = min(knot.l_right, knot.l_left)
        assert knot.stack is not None
        knot.chord = chord_at(knot.stack.table, knot.length)
    elif knot.kind is KnotKind.ANGLE:
        left, right = chain.knots[index - 1], chain.knots[index + 1]
        p, q = left.right_end, right.left_end
        span = max(chain.eps, q - p) if math.isfinite(q - p) else chain.eps
        w = balance_root(
            chain.gap_force(index - 1),
            chain.gap_force(index),
            (p - span, q + span),
            guess=None if math.isnan(knot.w) else knot.w,
        )
        if w is None:
            raise _Unsolvable(f"The balance equation of {knot.describe()} has no root at eps={chain.eps}", index)
        knot.w = w


def _requirements(chain: Chain, index: int) -> List[int]:
    kind = chain.knots[index].kind
    needed = []
    if kind in (KnotKind.TROLLEYBUS_R, KnotKind.BIRDIE, KnotKind.ANGLE):
        needed.append(index - 1)
    if kind in (KnotKind.TROLLEYBUS_L, KnotKind.BIRDIE, KnotKind.ANGLE):
        needed.append(index + 1)
    return needed


def solve_chain(chain: Chain, eps: float) -> Chain:
    """
    Solve a copy of the chain at ``eps``, using the current parameters as guesses. Raises ``_Unsolvable``.
    """
    solved = chain.copy()
    solved.eps = eps
    pending = set()
    for index, knot in enumerate(solved.knots):
        if knot.kind is KnotKind.FULL_CHORDAL:
            _full_chord(solved, index, knot)
        elif knot.kind not in (KnotKind.NEG_INF, KnotKind.POS_INF, KnotKind.MULTICUP):
            pending.add(index)
    while pending:
        ready = [index for index in sorted(pending) if not set(_requirements(solved, index)) & pending]
        if not ready:
            raise UnknownConfiguration(f"Cyclic dependencies in chain {solved.describe()}")
        for index in ready:
            _solve_knot(solved, index)
            pending.discard(index)
    return solved


def chain_events(chain: Chain) -> List[Event]:
    """The event functions of a solved chain."""
    events: List[Event] = []
    horizon = settings.horizon
    knots = chain.knots
    for gap in range(len(knots) - 1):
        left, right = knots[gap], knots[gap + 1]
        length = right.left_end - left.right_end
        if math.isfinite(length):
            touches_chord = {left.kind, right.kind} & {KnotKind.FULL_CHORDAL, KnotKind.MULTICUP}
            kind = (
                EventKind.ANGLE_HITS_CHORD_END
                if KnotKind.ANGLE in (left.kind, right.kind) and touches_chord
                else EventKind.EDGE_LENGTH_ZERO
            )
            events.append(Event(kind, gap, length, on_gap=True))
    for index, knot in enumerate(knots):
        if knot.kind is KnotKind.FULL_CHORDAL:
            assert knot.stack is not None
            events.append(Event(EventKind.DIFFERENTIAL_ZERO, index, knot.stack.table.l_max - 2 * chain.eps))
        elif knot.kind is KnotKind.MULTICUP:
            width = knot.right_end - knot.left_end
            events.append(Event(EventKind.MULTICUP_FILLS, index, width - 2 * chain.eps))
        elif knot.kind is KnotKind.ANGLE:
            events.append(Event(EventKind.ANGLE_ESCAPES, index, 0.5 * horizon - abs(knot.w)))
        elif knot.kind in (KnotKind.TROLLEYBUS_R, KnotKind.TROLLEYBUS_L, KnotKind.BIRDIE):
            events.append(Event(EventKind.TROLLEYBUS_BASE_ZERO, index, _base_margin(chain, index)))
            if knot.kind is KnotKind.BIRDIE:
                split = SPLIT_TOLERANCE * (1 + knot.length) - abs(knot.l_right - knot.l_left)
                events.append(Event(EventKind.BIRDIE_SPLITS, index, split))
    return events


def _base_margin(chain: Chain, index: int) -> float:
    """
    Positive while a trolleybus or birdie keeps a base: the neighbour's force has not reached the cup's origin yet.
    """
    knot = chain.knots[index]
    assert knot.stack is not None
    table = knot.stack.table
    origin = table.origin
    if origin is None:
        return knot.length - table.l_min
    margins = []
    if knot.kind in (KnotKind.TROLLEYBUS_R, KnotKind.BIRDIE):
        margins.append(force_eval(chain.gap_force(index - 1), origin, strict=False))
    if knot.kind in (KnotKind.TROLLEYBUS_L, KnotKind.BIRDIE):
        margins.append(-force_eval(chain.gap_force(index), origin, strict=False))
    return min(margins)


@define
class Attempt:
    """Outcome of solving a chain at one radius."""

    eps: float
    chain: Optional[Chain]
    events: List[Event]
    failed: Optional[int] = None

    @property
    def ok(self) -> bool:
        return self.chain is not None and all(event.value > 0 for event in self.events)


def attempt(chain: Chain, eps: float) -> Attempt:
    try:
        solved = solve_chain(chain, eps)
    except _Unsolvable as error:
        logger.debug(f"Chain unsolvable at eps={eps:.12g}: {error}")
        return Attempt(eps, None, [Event(EventKind.SOLVE_FAILED, error.position, -1.0)], failed=error.position)
    return Attempt(eps, solved, chain_events(solved))


def step_first_kind(chain: Chain, eps: float) -> Chain:
    """
    Continue a valid chain to ``eps`` without a change of its figures. Raises ``StepTooLarge`` when an event fires.
    """
    result = attempt(chain, eps)
    if not result.ok:
        fired = ", ".join(event.kind.value for event in result.events if event.value <= 0)
        raise StepTooLarge(f"Events fired between eps={chain.eps:.12g} and {eps:.12g}: {fired}")
    assert result.chain is not None
    return result.chain


@define
class CriticalBracket:
    """A critical radius located between a valid chain ``lower`` and the attempt just above it."""

    lower: Attempt
    upper: Attempt
    events: List[Event]
    iterations: int = 0

    @property
    def eps(self) -> float:
        return 0.5 * (self.lower.eps + self.upper.eps)


def _flagged(lower: Attempt, upper: Attempt) -> List[Event]:
    fired = [event for event in upper.events if event.value <= 0]
    keys = {event.key for event in fired}
    for event in lower.events:
        if event.kind is EventKind.BIRDIE_SPLITS or event.key in keys:
            continue
        if event.value <= TOL_EVENT:
            fired.append(event)
            keys.add(event.key)
    return fired


def detect_critical(lower: Attempt, upper: Attempt, tol: float = TOL_BISECT) -> CriticalBracket | None:
    """
    Bisect between a valid solved chain and a failed attempt until the bracket is narrower than ``tol``.
    """
    if upper.ok:
        return None
    assert lower.chain is not None
    iterations = 0
    while upper.eps - lower.eps > tol:
        middle = attempt(lower.chain, 0.5 * (lower.eps + upper.eps))
        iterations += 1
        if middle.ok:
            lower = middle
        else:
            upper = middle
    return CriticalBracket(lower, upper, _flagged(lower, upper), iterations)


def _stack_for_cup(bf: BoundaryFunction, c: float, l_max: float) -> ChordalStack:
    return ChordalStack(grow_chordal_domain(bf, c, l_max))


def _stack_over_hull(bf: BoundaryFunction, closed: ClosedMulticup, l_max: float) -> ChordalStack:
    lo, hi = closed.hull
    table = grow_chordal_domain(bf, make_chord(bf, lo, hi), l_max, kind=TableKind.OVER_HULL)
    return ChordalStack(table, base=closed)


def _pieces(knot: Knot, eps: float) -> Tuple[List[Tuple[float, float]], List[InnerChord]]:
    if knot.kind is KnotKind.MULTICUP:
        return list(knot.arcs), list(knot.inner)
    assert knot.chord is not None and knot.stack is not None
    length = 2 * eps if knot.kind is KnotKind.FULL_CHORDAL else knot.length
    chord = knot.chord
    return [(chord.a, chord.a), (chord.b, chord.b)], [InnerChord(knot.stack, length, chord)]


def _merge_multicup(bf: BoundaryFunction, left: Knot, right: Knot, eps: float) -> Knot:
    left_arcs, left_inner = _pieces(left, eps)
    right_arcs, right_inner = _pieces(right, eps)
    joined = (left_arcs[-1][0], right_arcs[0][1])
    arcs = tuple(left_arcs[:-1] + [joined] + right_arcs[1:])
    inner = tuple(left_inner + right_inner)
    first = inner[0].chord
    beta = chord_coefficients(bf, first.a, first.b)
    logger.info(f"Multicup formed on [{arcs[0][0]:.8g}, {arcs[-1][1]:.8g}] with {len(inner)} inner chords")
    return Knot(KnotKind.MULTICUP, arcs=arcs, inner=inner, beta=beta)


def _parade(inner: Sequence[InnerChord], kind: KnotKind) -> List[Knot]:
    return [Knot(kind, stack=chord.stack, length=chord.length, chord=chord.chord) for chord in inner]


def _is_point(arc: Tuple[float, float]) -> bool:
    return arc[1] - arc[0] <= SPLIT_TOLERANCE * (1 + abs(arc[0]))


def _multitrolleybus(
    arcs: Sequence[Tuple[float, float]], inner: Sequence[InnerChord], kind: KnotKind, formed: List[VertexKind]
) -> List[Knot]:
    """
    A multitrolleybus splits at once into a parade of trolleybuses over its inner chords. Inner arcs that are points
    leave single tangents; a multitrolleybus on one arc leaves the tangents crossing it.
    """
    formed.append(VertexKind.MULTITROLLEYBUS_R if kind is KnotKind.TROLLEYBUS_R else VertexKind.MULTITROLLEYBUS_L)
    formed.extend(VertexKind.FICTIOUS_5 for arc in arcs[1:-1] if _is_point(arc))
    logger.info(f"Multitrolleybus on [{arcs[0][0]:.8g}, {arcs[-1][1]:.8g}] splits into {len(inner)} trolleybuses")
    return _parade(inner, kind)


def _solve_upstream(chain: Chain, index: int, done: Set[int]) -> None:
    """Solve knot ``index`` after the knots its equations read."""
    if index in done:
        return
    done.add(index)
    for needed in _requirements(chain, index):
        _solve_upstream(chain, needed, done)
    knot = chain.knots[index]
    if knot.kind is KnotKind.FULL_CHORDAL:
        _full_chord(chain, index, knot)
    elif knot.kind not in (KnotKind.NEG_INF, KnotKind.POS_INF, KnotKind.MULTICUP):
        _solve_knot(chain, index)


def _flow_bases(chain: Chain, lo: int, hi: int, flow: List[Knot], eps: float) -> Optional[List[float]]:
    """
    Bases at ``eps`` of a trolleybus parade put between knots ``lo`` and ``hi``, or None when the parade has no
    solution. A right parade is driven from ``lo``, a left one from ``hi``.
    """
    knots = [knot.copy() for knot in chain.knots[: lo + 1] + flow + chain.knots[hi:]]
    trial = Chain(chain.bf, eps, knots, chain.l_max)
    span = range(lo + 1, lo + 1 + len(flow))
    last = span[-1] if flow[0].kind is KnotKind.TROLLEYBUS_R else span[0]
    try:
        _solve_upstream(trial, last, set())
    except (_Unsolvable, OutOfRange, UnknownConfiguration) as error:
        logger.debug(f"No {flow[0].kind.value} parade at eps={eps:.12g}: {error}")
        return None
    return [trial.knots[index].length for index in span]


def crossover_index(right: Optional[List[float]], left: Optional[List[float]], count: int) -> int:
    """
    Number of leading inner chords of a splitting multibirdie that keep right trolleybuses: those whose right base is
    strictly the smaller one. ``None`` stands for a parade without solution.
    """
    if left is None:
        return count
    if right is None:
        return 0
    j = 0
    while j < count and right[j] < left[j]:
        j += 1
    return j


def _multibirdie(
    chain: Chain,
    lo: int,
    hi: int,
    arcs: Sequence[Tuple[float, float]],
    inner: Sequence[InnerChord],
    eps: float,
    formed: List[VertexKind],
) -> List[Knot]:
    """
    A multibirdie between knots ``lo`` and ``hi`` splits into right trolleybuses, an angle and left trolleybuses.
    Both parades are solved just after ``eps``; the angle sits on the first arc where the left base is not larger.
    """
    formed.append(VertexKind.MULTIBIRDIE)
    after = eps + DESINTEGRATION_OFFSET * (1 + eps)
    right = _flow_bases(chain, lo, hi, _parade(inner, KnotKind.TROLLEYBUS_R), after) if inner else []
    left = _flow_bases(chain, lo, hi, _parade(inner, KnotKind.TROLLEYBUS_L), after) if inner else []
    if right is None and left is None:
        raise UnknownConfiguration(f"Neither trolleybus parade exists after eps={eps:.10g} on {len(inner)} chords")
    j = crossover_index(right, left, len(inner))
    arc = arcs[j]
    if not _is_point(arc):
        raise UnknownConfiguration(f"A multibirdie splits on the solid arc [{arc[0]:.8g}, {arc[1]:.8g}]")
    formed.extend(VertexKind.FICTIOUS_5 for index, point in enumerate(arcs[1:-1], 1) if index != j and _is_point(point))
    logger.info(f"Multibirdie on [{arcs[0][0]:.8g}, {arcs[-1][1]:.8g}] splits at arc {j} at eps={eps:.10g}")
    return (
        _parade(inner[:j], KnotKind.TROLLEYBUS_R)
        + [Knot(KnotKind.ANGLE, w=0.5 * (arc[0] + arc[1]))]
        + _parade(inner[j:], KnotKind.TROLLEYBUS_L)
    )


def _fold(bf: BoundaryFunction, left: Knot, right: Knot, eps: float, formed: List[VertexKind]) -> List[Knot]:
    """The figure two knots merge into when the gap between them vanishes."""
    kinds = (left.kind, right.kind)
    if kinds == (KnotKind.ANGLE, KnotKind.FULL_CHORDAL):
        return [Knot(KnotKind.TROLLEYBUS_R, stack=right.stack, length=2 * eps, chord=right.chord)]
    if kinds == (KnotKind.FULL_CHORDAL, KnotKind.ANGLE):
        return [Knot(KnotKind.TROLLEYBUS_L, stack=left.stack, length=2 * eps, chord=left.chord)]
    if kinds == (KnotKind.TROLLEYBUS_R, KnotKind.ANGLE):
        return [Knot(KnotKind.BIRDIE, stack=left.stack, length=left.length, chord=left.chord)]
    if kinds == (KnotKind.ANGLE, KnotKind.TROLLEYBUS_L):
        return [Knot(KnotKind.BIRDIE, stack=right.stack, length=right.length, chord=right.chord)]
    if kinds == (KnotKind.ANGLE, KnotKind.MULTICUP):
        return _multitrolleybus(right.arcs, right.inner, KnotKind.TROLLEYBUS_R, formed)
    if kinds == (KnotKind.MULTICUP, KnotKind.ANGLE):
        return _multitrolleybus(left.arcs, left.inner, KnotKind.TROLLEYBUS_L, formed)
    if left.kind in (KnotKind.FULL_CHORDAL, KnotKind.MULTICUP) and right.kind is KnotKind.TROLLEYBUS_R:
        return [_merge_multicup(bf, left, right, eps)]
    if left.kind is KnotKind.TROLLEYBUS_L and right.kind in (KnotKind.FULL_CHORDAL, KnotKind.MULTICUP):
        return [_merge_multicup(bf, left, right, eps)]
    if left.kind is KnotKind.TROLLEYBUS_L and right.kind is KnotKind.TROLLEYBUS_R:
        return [_merge_multicup(bf, left, right, eps)]
    raise UnknownConfiguration(f"No concatenation rule for {left.describe()} meeting {right.describe()}")


def _lose_base(chain: Chain, index: int, eps: float, formed: List[VertexKind]) -> List[Knot]:
    """
    A trolleybus or birdie whose base shrank to the bottom of its chordal domain: it dies over a cup, goes on in the
    domain under a pasted chord, or joins a closed multicup into a multitrolleybus or multibirdie.
    """
    knot = chain.knots[index]
    stack = knot.stack
    assert stack is not None
    if stack.base is not None:
        closed = stack.base
        if knot.kind is KnotKind.BIRDIE:
            return _multibirdie(chain, index - 1, index + 1, closed.arcs, closed.inner, eps, formed)
        return _multitrolleybus(closed.arcs, closed.inner, knot.kind, formed)
    if stack.below is not None:
        seed = stack.table.seed
        logger.info(f"{knot.describe()} passes the chord [{seed.a:.8g}, {seed.b:.8g}] at eps={eps:.10g}")
        return [attr.evolve(knot, stack=stack.below)]
    origin = stack.table.origin
    if origin is None:
        raise UnknownConfiguration(f"{knot.describe()} lost its base above a chord")
    if knot.kind is KnotKind.BIRDIE:
        logger.info(f"Birdie over the cup at {origin:.8g} dies into an angle at eps={eps:.10g}")
        return [Knot(KnotKind.ANGLE, w=origin)]
    formed.append(VertexKind.FICTIOUS_5)
    logger.info(f"{knot.describe()} dies at eps={eps:.10g}")
    return []


def _knot_replacement(
    chain: Chain, index: int, events: List[Event], eps: float, formed: List[VertexKind]
) -> List[Knot]:
    knot = chain.knots[index]
    kinds = {event.kind for event in events}
    bf = chain.bf
    if EventKind.TROLLEYBUS_BASE_ZERO in kinds:
        return _lose_base(chain, index, eps, formed)
    if EventKind.BIRDIE_SPLITS in kinds:
        assert knot.chord is not None
        if knot.l_right < knot.l_left:
            trolleybus = Knot(KnotKind.TROLLEYBUS_R, stack=knot.stack, length=knot.l_right, chord=knot.chord)
            return [trolleybus, Knot(KnotKind.ANGLE, w=knot.chord.b)]
        trolleybus = Knot(KnotKind.TROLLEYBUS_L, stack=knot.stack, length=knot.l_left, chord=knot.chord)
        return [Knot(KnotKind.ANGLE, w=knot.chord.a), trolleybus]
    if EventKind.MULTICUP_FILLS in kinds:
        assert knot.beta is not None
        closed = ClosedMulticup(knot.arcs, knot.inner, knot.beta)
        logger.info(f"Multicup on [{knot.left_end:.8g}, {knot.right_end:.8g}] closes at eps={eps:.10g}")
        stack = _stack_over_hull(bf, closed, chain.l_max)
        chord = chord_at(stack.table, stack.table.l_min)
        return [Knot(KnotKind.FULL_CHORDAL, stack=stack, length=2 * eps, chord=chord)]
    if EventKind.DIFFERENTIAL_ZERO in kinds:
        assert knot.stack is not None and knot.chord is not None
        table = knot.stack.table
        if table.stop_reason is StopReason.L_MAX:
            seed = table.origin if table.kind is TableKind.CUP else table.seed
            kind = None if table.kind is TableKind.CUP else table.kind
            grown = grow_chordal_domain(bf, seed, 2 * table.l_max, kind=kind)
            stack = ChordalStack(grown, knot.stack.base, knot.stack.below)
            return [Knot(KnotKind.FULL_CHORDAL, stack=stack, chord=knot.chord)]
        try:
            grown = grow_chordal_domain(bf, knot.chord, chain.l_max, kind=TableKind.OVER_CHORD)
        except (SeedInvalid, ContinuationStall) as error:
            message = f"The chordal domain {knot.describe()} ends at eps={eps:.10g}: {error}"
            raise UnknownConfiguration(message) from error
        if grown.l_max <= knot.chord.length:
            raise UnknownConfiguration(f"The chordal domain {knot.describe()} cannot grow past eps={eps:.10g}")
        return [Knot(KnotKind.FULL_CHORDAL, stack=ChordalStack(grown, below=knot.stack), chord=knot.chord)]
    if kinds & {EventKind.ANGLE_ESCAPES, EventKind.SOLVE_FAILED} and knot.kind is KnotKind.ANGLE:
        return _escape(chain, index)
    return [knot]


def _escape(chain: Chain, index: int) -> List[Knot]:
    knot = chain.knots[index]
    neighbour = chain.knots[index + 1] if knot.w > 0 else chain.knots[index - 1]
    if neighbour.kind not in (KnotKind.NEG_INF, KnotKind.POS_INF) or abs(knot.w) < 0.25 * settings.horizon:
        raise UnknownConfiguration(f"{knot.describe()} lost its balance root away from infinity")
    logger.info(f"{knot.describe()} escapes to {neighbour.kind.value}, which now absorbs")
    neighbour.emits = False
    return []


def _simultaneous_birdies(chain: Chain, gaps: Set[int]) -> List[int]:
    """Multicups hit by angles from both sides at once."""
    knots = chain.knots
    return [
        index
        for index in range(1, len(knots) - 1)
        if knots[index].kind is KnotKind.MULTICUP
        and {index - 1, index} <= gaps
        and knots[index - 1].kind is KnotKind.ANGLE
        and knots[index + 1].kind is KnotKind.ANGLE
    ]


def modify_at_critical(chain: Chain, events: Sequence[Event], eps: float) -> Chain:
    """
    Replace the figures that crashed at a critical radius by the figures they merge into.
    """
    by_knot: Dict[int, List[Event]] = {}
    gaps = set()
    for event in events:
        if event.on_gap:
            gaps.add(event.position)
        else:
            by_knot.setdefault(event.position, []).append(event)
    modified = chain.copy()
    modified.eps = eps
    formed: List[VertexKind] = []
    replacements = [
        _knot_replacement(modified, index, by_knot.get(index, []), eps, formed)
        for index in range(len(modified.knots))
    ]
    for index in _simultaneous_birdies(modified, gaps):
        knot = modified.knots[index]
        replacements[index] = _multibirdie(modified, index - 2, index + 2, knot.arcs, knot.inner, eps, formed)
        replacements[index - 1] = replacements[index + 1] = []
        gaps -= {index - 1, index}
    result: List[Knot] = []
    for index, replacement in enumerate(replacements):
        if not replacement:
            continue
        if index > 0 and (index - 1) in gaps and result:
            folded = _fold(chain.bf, result[-1], replacement[0], eps, formed)
            result[-1:] = folded
            result.extend(replacement[1:])
        else:
            result.extend(replacement)
    unexplained = [
        event for event in events if event.kind is EventKind.SOLVE_FAILED and not _explained(event, events, chain)
    ]
    if unexplained:
        raise UnknownConfiguration(
            f"Solving failed at eps={eps:.10g} for {chain.knots[unexplained[0].position].describe()} with no crash"
        )
    return Chain(chain.bf, eps, result, chain.l_max, tuple(formed))


def _explained(failure: Event, events: Sequence[Event], chain: Chain) -> bool:
    position = failure.position
    if chain.knots[position].kind is KnotKind.ANGLE:
        return True
    for event in events:
        if event is failure:
            continue
        if not event.on_gap and event.position == position:
            return True
        if event.on_gap and event.position in (position - 1, position):
            return True
    return False


def _ray_of(root: EssentialRoot) -> float | None:
    if root.is_left_ray:
        return root.hi
    if root.is_right_ray:
        return root.lo
    return None


def _simple_chain(bf: BoundaryFunction, eps: float, l_max: float) -> Chain:
    negative = Knot(KnotKind.NEG_INF)
    positive = Knot(KnotKind.POS_INF)
    knots = [negative]
    for root in bf.roots.ordered():
        if root.kind is RootKind.V:
            knots.append(Knot(KnotKind.ANGLE, w=root.center))
        elif root.lo == -math.inf:
            negative.emits, negative.ray = True, _ray_of(root)
        elif root.hi == math.inf:
            positive.emits, positive.ray = True, _ray_of(root)
        elif root.is_point:
            knots.append(Knot(KnotKind.FULL_CHORDAL, stack=_stack_for_cup(bf, root.lo, l_max)))
        else:
            beta = quadratic_coefficients(bf, root.lo, 0.5 * bf.derivative(root.lo, 2))
            if root.hi - root.lo > 2 * eps:
                knots.append(Knot(KnotKind.MULTICUP, arcs=((root.lo, root.hi),), beta=beta))
            else:
                closed = ClosedMulticup(((root.lo, root.hi),), (), beta)
                knots.append(Knot(KnotKind.FULL_CHORDAL, stack=_stack_over_hull(bf, closed, l_max)))
    if not len(bf.roots):
        # f is quadratic: zero forces, right tangents from -inf carry its own linear function
        negative.emits = True
    knots.append(positive)
    return Chain(bf, eps, knots, l_max)


def _certify(chain: Chain) -> Chain:
    result = attempt(chain, chain.eps)
    if not result.ok:
        raise EpsTooLarge(f"The simple picture is not valid at eps={chain.eps}")
    solved = result.chain
    assert solved is not None
    for index, knot in enumerate(solved.knots):
        if knot.kind is KnotKind.ANGLE:
            if not solved.knots[index - 1].right_end < knot.w < solved.knots[index + 1].left_end:
                raise EpsTooLarge(f"{knot.describe()} is not between its neighbours at eps={chain.eps}")
    for gap in range(len(solved.knots) - 1):
        emitter, side = solved.emitter(gap)
        far = solved.knots[gap + 1].left_end if side is Side.RIGHT else solved.knots[gap].right_end
        if not math.isfinite(far):
            continue
        tail = tail_endpoint(solved.emitted(emitter, side), limit=far)
        if not tail.covers(far):
            raise EpsTooLarge(f"The tail of {solved.knots[emitter].describe()} ends at {tail.endpoint} before {far}")
    return solved


def _table_length(eps_target: float) -> float:
    return 2.1 * eps_target + CHORD_STEP


def simple_chain(bf: BoundaryFunction, eps: float, l_max: float | None = None) -> Chain:
    """Solved and certified chain of the simple picture at ``eps``. Raises ``EpsTooLarge``."""
    try:
        return _certify(_simple_chain(bf, eps, l_max or _table_length(eps)))
    except (SeedInvalid, ContinuationStall, UnknownConfiguration) as error:
        raise EpsTooLarge(f"No simple picture at eps={eps}: {error}") from error


def simple_picture(bf: BoundaryFunction, eps: float) -> FoliationGraph:
    """
    The simple foliation of small radii: a cup or multicup on every c-root, an angle near every v-root, tangents in
    between.
    """
    return chain_graph(simple_chain(bf, eps))


def _attach_stack(graph: FoliationGraph, stack: ChordalStack, top: Vertex, l_hi: float) -> None:
    table = stack.table
    if table.kind is TableKind.CUP:
        base = graph.add_vertex(VertexKind.FICTIOUS_2, t=table.seed.a)
    elif table.kind is TableKind.OVER_HULL and stack.base is not None:
        closed = stack.base
        base = graph.add_vertex(
            VertexKind.CLOSED_MULTICUP,
            arcs=[list(arc) for arc in closed.arcs],
            beta=list(closed.beta),
            hull=list(closed.hull),
        )
        for inner in closed.inner:
            _attach_stack(graph, inner.stack, base, inner.length)
    else:
        base = graph.add_vertex(VertexKind.FICTIOUS_3, a=table.seed.a, b=table.seed.b)
        if stack.below is not None:
            _attach_stack(graph, stack.below, base, table.l_min)
    graph.add_edge(
        EdgeKind.CHORDAL,
        base,
        top,
        table=table,
        seed_kind=table.kind.value,
        seed=[table.seed.a, table.seed.b],
        l_lo=table.l_min,
        l_hi=l_hi,
    )


_KNOT_VERTICES = {
    KnotKind.TROLLEYBUS_R: VertexKind.TROLLEYBUS_R,
    KnotKind.TROLLEYBUS_L: VertexKind.TROLLEYBUS_L,
    KnotKind.BIRDIE: VertexKind.BIRDIE,
}


def chain_graph(chain: Chain) -> FoliationGraph:
    """The foliation graph of a solved chain."""
    graph = FoliationGraph(eps=chain.eps, bf=chain.bf)
    vertices: List[Vertex] = []
    for knot in chain.knots:
        if knot.kind in (KnotKind.NEG_INF, KnotKind.POS_INF):
            side = "-inf" if knot.kind is KnotKind.NEG_INF else "inf"
            vertex = graph.add_vertex(VertexKind.FICTIOUS_4, side=side, ray=knot.ray, emits=knot.emits)
        elif knot.kind is KnotKind.ANGLE:
            vertex = graph.add_vertex(VertexKind.ANGLE, w=knot.w)
        elif knot.kind is KnotKind.MULTICUP:
            assert knot.beta is not None
            vertex = graph.add_vertex(VertexKind.MULTICUP, arcs=[list(arc) for arc in knot.arcs], beta=list(knot.beta))
            for inner in knot.inner:
                _attach_stack(graph, inner.stack, vertex, inner.length)
        else:
            assert knot.chord is not None and knot.stack is not None
            kind = _KNOT_VERTICES.get(knot.kind, VertexKind.FICTIOUS_1)
            vertex = graph.add_vertex(kind, a=knot.chord.a, b=knot.chord.b, l=knot.length)
            _attach_stack(graph, knot.stack, vertex, knot.length)
        vertices.append(vertex)
    for gap in range(len(chain.knots) - 1):
        emitter, side = chain.emitter(gap)
        force = chain.emitted(emitter, side)
        lo, hi = chain.knots[gap].right_end, chain.knots[gap + 1].left_end
        kind = EdgeKind.TANGENT_R if side is Side.RIGHT else EdgeKind.TANGENT_L
        source, target = vertices[gap], vertices[gap + 1]
        if side is Side.LEFT:
            source, target = target, source
        params = dict(start=force.start, start_value=force.start_value)
        pair = {chain.knots[gap].kind, chain.knots[gap + 1].kind}
        if pair in ({KnotKind.TROLLEYBUS_R}, {KnotKind.TROLLEYBUS_L}) and _is_point((lo, hi)):
            # a parade of trolleybuses touching at one point: a single tangent between them
            u = lo if side is Side.RIGHT else hi
            single = graph.add_vertex(VertexKind.FICTIOUS_5, u=u, side=side.value)
            graph.add_edge(kind, source, single, lo=u, hi=u, **params)
            source = single
        graph.add_edge(kind, source, target, lo=lo, hi=hi, **params)
    return graph


@define
class TraceSample:
    eps: float
    graph: FoliationGraph
    chain: Optional[Chain] = field(default=None, repr=False)


@define
class TraceSegment:
    """Radii over which the figures of the foliation do not change."""

    eps_lo: float
    eps_hi: float
    samples: List[TraceSample] = field(factory=list)

    def contains(self, eps: float) -> bool:
        return self.eps_lo - 1e-15 <= eps <= self.eps_hi + 1e-15


@define
class CriticalPoint:
    """
    A radius where figures crash, with the graphs just before and just after the modification.

    :param formed: Vertex kinds of the figures that lived only at this radius (multitrolleybuses, multibirdies,
        single tangents)
    """

    eps: float
    kinds: Tuple[str, ...]
    subjects: Tuple[str, ...]
    essential: bool
    before: FoliationGraph
    after: FoliationGraph
    formed: Tuple[str, ...] = ()

    def as_dict(self) -> Dict[str, Any]:
        return {
            "eps": self.eps,
            "kinds": list(self.kinds),
            "subjects": list(self.subjects),
            "essential": self.essential,
            "formed": list(self.formed),
            "before": self.before.as_dict(),
            "after": self.after.as_dict(),
        }


@define
class EvolutionTrace:
    """
    Foliations from the simple picture up to the target radius.

    :param segments: Consecutive ranges of radii with a fixed combinatorial type
    :param critical_points: The radii where the type changes
    :param coarsened: Whether the per-unit cap on reported critical points was reached
    """

    bf: BoundaryFunction
    eps_target: float
    segments: List[TraceSegment] = field(factory=list)
    critical_points: List[CriticalPoint] = field(factory=list)
    coarsened: bool = False

    @property
    def eps_start(self) -> float:
        return self.segments[0].eps_lo

    @property
    def essential_critical_points(self) -> List[CriticalPoint]:
        return [point for point in self.critical_points if point.essential]

    @property
    def final_graph(self) -> FoliationGraph:
        return self.segments[-1].samples[-1].graph

    def record(self, chain: Chain) -> None:
        segment = self.segments[-1]
        segment.eps_hi = chain.eps
        segment.samples.append(TraceSample(chain.eps, chain_graph(chain), chain))

    def open_segment(self, chain: Chain) -> None:
        self.segments.append(TraceSegment(chain.eps, chain.eps))
        self.record(chain)

    def graph_at(self, eps: float) -> FoliationGraph:
        """The foliation at any radius up to the target."""
        if eps <= 0:
            raise OutOfRange(f"Radius {eps} must be positive")
        if self.segments and eps < self.eps_start:
            return chain_graph(simple_chain(self.bf, eps))
        for segment in reversed(self.segments):
            if not segment.contains(eps):
                continue
            below = [sample for sample in segment.samples if sample.eps <= eps + 1e-15]
            sample = below[-1] if below else segment.samples[0]
            if abs(sample.eps - eps) <= 1e-15 * (1 + eps):
                return sample.graph
            if sample.chain is None:
                raise OutOfRange(f"Radius {eps} is between the stored samples of a loaded trace")
            result = attempt(sample.chain, eps)
            if result.chain is None:
                raise UnknownConfiguration(
                    f"The chain of the segment [{segment.eps_lo}, {segment.eps_hi}] fails at {eps}"
                )
            return chain_graph(result.chain)
        raise OutOfRange(f"Radius {eps} is outside the trace (0, {self.segments[-1].eps_hi if self.segments else 0}]")

    def candidate_at(self, eps: float) -> BellmanCandidate:
        return assemble(self.graph_at(eps))

    def as_dict(self) -> Dict[str, Any]:
        return {
            "bf": self.bf.as_document().as_dict(),
            "eps_target": self.eps_target,
            "coarsened": self.coarsened,
            "segments": [
                {
                    "eps_lo": segment.eps_lo,
                    "eps_hi": segment.eps_hi,
                    "samples": [{"eps": sample.eps, "graph": sample.graph.as_dict()} for sample in segment.samples],
                }
                for segment in self.segments
            ],
            "critical_points": [point.as_dict() for point in self.critical_points],
        }

    @classmethod
    def from_dict(cls, content: Dict[str, Any], bf: BoundaryFunction) -> EvolutionTrace:
        trace = cls(bf=bf, eps_target=float(content["eps_target"]), coarsened=bool(content.get("coarsened", False)))
        for item in content["segments"]:
            segment = TraceSegment(float(item["eps_lo"]), float(item["eps_hi"]))
            for sample in item["samples"]:
                graph = FoliationGraph.from_dict(sample["graph"], bf)
                segment.samples.append(TraceSample(float(sample["eps"]), graph))
            trace.segments.append(segment)
        for item in content["critical_points"]:
            trace.critical_points.append(
                CriticalPoint(
                    eps=float(item["eps"]),
                    kinds=tuple(item["kinds"]),
                    subjects=tuple(item["subjects"]),
                    essential=bool(item["essential"]),
                    before=FoliationGraph.from_dict(item["before"], bf),
                    after=FoliationGraph.from_dict(item["after"], bf),
                    formed=tuple(item.get("formed", ())),
                )
            )
        return trace


def _start_radius(bf: BoundaryFunction, eps_target: float, l_max: float) -> Chain:
    gap = root_gap(bf.roots)
    eps = min(eps_target, 0.25 * gap) if math.isfinite(gap) and gap > 0 else eps_target
    last: EpsTooLarge | None = None
    for _ in range(SIMPLE_PICTURE_HALVINGS):
        try:
            chain = simple_chain(bf, eps, l_max)
        except EpsTooLarge as error:
            logger.debug(f"{error}; halving")
            last = error
            eps *= 0.5
            continue
        logger.info(f"Simple picture certified at eps={eps:.8g}: {chain.describe()}")
        return chain
    raise EpsTooLarge(f"No simple picture found down to eps={eps:.3e}: {last}")


def _subjects(chain: Chain, events: Iterable[Event]) -> Tuple[str, ...]:
    subjects = []
    for event in events:
        if event.on_gap:
            subjects.append(f"gap {event.position}")
        elif event.position < len(chain.knots):
            subjects.append(chain.knots[event.position].describe())
    return tuple(subjects)


def _after_critical(modified: Chain, eps: float) -> Attempt:
    for offset in (0.0, 1e-9, 1e-8, 1e-7):
        result = attempt(modified, eps + offset * (1 + eps))
        if result.ok:
            return result
    raise UnknownConfiguration(f"The modified chain {modified.describe()} is not valid after eps={eps:.10g}")


def evolve(bf: BoundaryFunction, eps_target: float) -> EvolutionTrace:
    """
    Evolve the foliation from the simple picture up to ``eps_target``, through every critical radius.
    """
    if not 0 < eps_target < bf.eps_inf:
        raise Divergent(f"Target radius {eps_target} must be in (0, {bf.eps_inf})")
    l_max = _table_length(eps_target)
    chain = _start_radius(bf, eps_target, l_max)
    trace = EvolutionTrace(bf=bf, eps_target=eps_target)
    trace.open_segment(chain)
    gap = root_gap(bf.roots)
    gap = gap if math.isfinite(gap) and gap > 0 else math.inf
    iterations = 0
    recent: List[float] = []
    current = attempt(chain, chain.eps)
    while chain.eps < eps_target:
        step = min(chain.eps / 8, gap / 4, MAX_EPS_STEP, eps_target - chain.eps)
        if eps_target - (chain.eps + step) < 1e-12 * eps_target:
            step = eps_target - chain.eps
        upper = attempt(chain, chain.eps + step)
        iterations += 1
        if upper.ok:
            assert upper.chain is not None
            chain, current = upper.chain, upper
            trace.record(chain)
        else:
            bracket = detect_critical(current, upper)
            assert bracket is not None
            iterations += bracket.iterations
            lower_chain = bracket.lower.chain
            assert lower_chain is not None
            if bracket.lower.eps > chain.eps:
                trace.record(lower_chain)
            modified = modify_at_critical(lower_chain, bracket.events, bracket.eps)
            after = _after_critical(modified, bracket.upper.eps)
            assert after.chain is not None
            kinds = tuple(sorted({event.kind.value for event in bracket.events}))
            essential = lower_chain.signature() != after.chain.signature()
            recent = [eps for eps in recent if eps > bracket.eps - 1.0] + [bracket.eps]
            if len(recent) > settings.event_cap:
                if not trace.coarsened:
                    logger.warning(f"More than {settings.event_cap} critical points per unit of radius; coarsening")
                trace.coarsened = True
            if essential or not trace.coarsened:
                trace.critical_points.append(
                    CriticalPoint(
                        eps=bracket.eps,
                        kinds=kinds,
                        subjects=_subjects(lower_chain, bracket.events),
                        essential=essential,
                        before=chain_graph(lower_chain),
                        after=chain_graph(after.chain),
                        formed=tuple(kind.value for kind in modified.formed),
                    )
                )
            logger.info(
                f"Critical point at eps={bracket.eps:.10g} ({', '.join(kinds)}): {after.chain.describe()}"
            )
            chain, current = after.chain, after
            trace.open_segment(chain)
        if iterations > settings.max_iterations:
            message = f"Evolution stopped after {iterations} iterations at eps={chain.eps}"
            raise IterationCapExceeded(message, trace=trace)
    return trace


def sweep(bf: BoundaryFunction, eps_values: Sequence[float]) -> List[FoliationGraph]:
    """Foliation graphs at several radii from one evolution."""
    trace = evolve(bf, max(eps_values))
    return [trace.graph_at(eps) for eps in eps_values]
