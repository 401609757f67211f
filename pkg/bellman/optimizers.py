"""
Optimizers: test functions on ``[0, 1]`` attaining the Bellman candidate.

An optimizer is a concatenation of constant pieces and logarithmic pieces ``offset + sign * scale * log(t - tau0)``.
Its moments are computed in closed form, the average of ``f`` by quadrature in the value variable.
"""

from __future__ import annotations

import math
from typing import Any, Dict, Iterator, List, Sequence, Tuple, Union

import numpy as np
from attr import define, field
from scipy import integrate, optimize

from bellman.boundary_function import BoundaryFunction
from bellman.candidates import (
    ChordalFigure,
    FigureCandidate,
    LinearityFigure,
    TangentsFigure,
    tangent_point,
    upper_point,
)
from bellman.constants import TOL_OPT_BMO, TOL_OPT_MOMENT, TOL_OPT_VALUE, EdgeKind, FigureKind, Side
from bellman.exceptions import BellmanConfigException, BellmanValueError, SynthesisFailure
from bellman.foliation import BellmanCandidate
from bellman.foliation.candidate import boundary_figure
from bellman.foliation.entities import Edge
from bellman.foliation.graph import TANGENT_SIDES
from bellman.log import get_logger

logger = get_logger(__name__)

Point = Tuple[float, float]
BMO_GRID_PER_PIECE = 24
BMO_LOG_DECADES = 12
EXP_LIMIT = 700.0


def _log_primitive(s: float) -> float:
    return 0.0 if s <= 0 else s * math.log(s) - s


def _log_square_primitive(s: float) -> float:
    if s <= 0:
        return 0.0
    log_s = math.log(s)
    return s * (log_s * log_s - 2 * log_s + 2)


def _quad(function: Any, lo: float, hi: float, breaks: Sequence[float]) -> float:
    points = [lo] + [point for point in breaks if lo < point < hi] + [hi]
    total = 0.0
    for start, stop in zip(points, points[1:]):
        total += integrate.quad(function, start, stop, epsabs=1e-14, epsrel=1e-12, limit=400)[0]
    return total


@define(frozen=True)
class ConstPiece:
    lo: float
    hi: float
    value: float

    def __call__(self, tau: float) -> float:
        return self.value

    def moments(self, a: float, b: float) -> Tuple[float, float]:
        width = b - a
        return self.value * width, self.value * self.value * width

    def f_integral(self, bf: BoundaryFunction, a: float, b: float) -> float:
        return float(bf(self.value)) * (b - a)

    def placed(self, start: float, weight: float) -> ConstPiece:
        return ConstPiece(start + weight * self.lo, start + weight * self.hi, self.value)

    def as_dict(self) -> Dict[str, Any]:
        return {"type": "const", "lo": self.lo, "hi": self.hi, "value": self.value}


@define(frozen=True)
class LogPiece:
    """
    ``offset + sign * scale * log(tau - tau0)`` on ``(lo, hi]`` with ``tau0 <= lo``.
    """

    lo: float
    hi: float
    sign: int
    scale: float
    tau0: float
    offset: float

    @property
    def factor(self) -> float:
        return self.sign * self.scale

    def __call__(self, tau: float) -> float:
        s = tau - self.tau0
        if s <= 0:
            return -self.sign * math.inf
        return self.offset + self.factor * math.log(s)

    def moments(self, a: float, b: float) -> Tuple[float, float]:
        k, o = self.factor, self.offset
        sa, sb = a - self.tau0, b - self.tau0
        first = _log_primitive(sb) - _log_primitive(sa)
        second = _log_square_primitive(sb) - _log_square_primitive(sa)
        width = b - a
        return o * width + k * first, o * o * width + 2 * o * k * first + k * k * second

    def f_integral(self, bf: BoundaryFunction, a: float, b: float) -> float:
        """Integrate ``f(phi(tau))`` over ``(a, b]``; the logarithmic end at ``tau0`` is left to the quadrature."""
        a = max(a, self.tau0)
        if b <= a:
            return 0.0
        k, o = self.factor, self.offset
        breaks = [self.tau0 + math.exp((t - o) / k) for t in bf.breaks if abs((t - o) / k) < EXP_LIMIT]
        return _quad(lambda tau: float(bf(self(tau))), a, b, breaks)

    def placed(self, start: float, weight: float) -> LogPiece:
        return LogPiece(
            lo=start + weight * self.lo,
            hi=start + weight * self.hi,
            sign=self.sign,
            scale=self.scale,
            tau0=start + weight * self.tau0,
            offset=self.offset - self.factor * math.log(weight),
        )

    def as_dict(self) -> Dict[str, Any]:
        return {
            "type": "log",
            "lo": self.lo,
            "hi": self.hi,
            "sign": self.sign,
            "scale": self.scale,
            "tau0": self.tau0,
            "offset": self.offset,
        }


Piece = Union[ConstPiece, LogPiece]


def _piece_from_dict(content: Dict[str, Any]) -> Piece:
    kind = content.get("type")
    if kind == "const":
        return ConstPiece(float(content["lo"]), float(content["hi"]), float(content["value"]))
    if kind == "log":
        return LogPiece(
            lo=float(content["lo"]),
            hi=float(content["hi"]),
            sign=int(content["sign"]),
            scale=float(content["scale"]),
            tau0=float(content["tau0"]),
            offset=float(content["offset"]),
        )
    raise BellmanConfigException(f"Unknown optimizer piece type {kind!r}")


@define(frozen=True)
class Optimizer:
    """
    A test function on ``[0, 1]`` given by pieces over consecutive subintervals.

    :param pieces: Pieces in increasing order of their intervals
    :param provenance: Figures visited while synthesizing it
    """

    pieces: Tuple[Piece, ...] = field(converter=tuple)
    provenance: Tuple[str, ...] = field(default=(), converter=tuple)

    @classmethod
    def constant(cls, value: float, provenance: Sequence[str] = ()) -> Optimizer:
        return cls((ConstPiece(0.0, 1.0, value),), provenance)

    @classmethod
    def concat(cls, parts: Sequence[Tuple[float, Optimizer]], provenance: Sequence[str] = ()) -> Optimizer:
        """Place each optimizer on a subinterval of length equal to its weight, left to right."""
        pieces: List[Piece] = []
        trail: List[str] = list(provenance)
        start = 0.0
        for weight, part in parts:
            if weight <= 0:
                continue
            pieces.extend(piece.placed(start, weight) for piece in part.pieces)
            trail.extend(ident for ident in part.provenance if ident not in trail)
            start += weight
        return cls(tuple(pieces), trail)

    def __call__(self, tau: float) -> float:
        for piece in self.pieces:
            if tau <= piece.hi:
                return piece(tau)
        return self.pieces[-1](tau)

    @property
    def breakpoints(self) -> List[float]:
        return [self.pieces[0].lo] + [piece.hi for piece in self.pieces]

    @property
    def is_step(self) -> bool:
        return all(isinstance(piece, ConstPiece) for piece in self.pieces)

    def moments(self, a: float = 0.0, b: float = 1.0) -> Tuple[float, float]:
        """Integrals of the function and its square over ``[a, b]``."""
        first = second = 0.0
        for piece in self.pieces:
            lo, hi = max(piece.lo, a), min(piece.hi, b)
            if lo < hi:
                m1, m2 = piece.moments(lo, hi)
                first += m1
                second += m2
        return first, second

    @property
    def point(self) -> Point:
        """The Bellman point ``(<phi>, <phi^2>)``."""
        return self.moments()

    def f_integral(self, bf: BoundaryFunction, a: float = 0.0, b: float = 1.0) -> float:
        total = 0.0
        for piece in self.pieces:
            lo, hi = max(piece.lo, a), min(piece.hi, b)
            if lo < hi:
                total += piece.f_integral(bf, lo, hi)
        return total

    def f_average(self, bf: BoundaryFunction) -> float:
        return self.f_integral(bf)

    def as_dict(self) -> Dict[str, Any]:
        return {"pieces": [piece.as_dict() for piece in self.pieces], "provenance": list(self.provenance)}

    @classmethod
    def from_dict(cls, content: Dict[str, Any]) -> Optimizer:
        try:
            pieces = tuple(_piece_from_dict(item) for item in content["pieces"])
        except (KeyError, TypeError, ValueError) as error:
            raise BellmanConfigException(f"Malformed optimizer document: {error}") from error
        return cls(pieces, content.get("provenance", ()))

    def to_rows(self, samples: int = 64) -> Iterator[Tuple[float, float]]:
        """``(tau, phi(tau))`` on a grid refined inside every piece."""
        for piece in self.pieces:
            for tau in np.linspace(piece.lo, piece.hi, samples)[1:]:
                yield float(tau), piece(float(tau))


def rearranged(phi: Optimizer) -> Optimizer:
    """The non-decreasing rearrangement of a step optimizer."""
    if not phi.is_step:
        raise BellmanValueError("Only step optimizers can be rearranged exactly.")
    ordered = sorted(phi.pieces, key=lambda piece: piece.value)  # type: ignore[union-attr]
    pieces: List[Piece] = []
    start = 0.0
    for piece in ordered:
        width = piece.hi - piece.lo
        pieces.append(ConstPiece(start, start + width, piece.value))  # type: ignore[union-attr]
        start += width
    return Optimizer(tuple(pieces), phi.provenance)


def _bmo_grid(phi: Optimizer) -> np.ndarray:
    points: List[float] = []
    for piece in phi.pieces:
        points.extend(np.linspace(piece.lo, piece.hi, BMO_GRID_PER_PIECE))
        if isinstance(piece, LogPiece):
            offsets = (piece.hi - piece.tau0) * np.logspace(-BMO_LOG_DECADES, 0, 2 * BMO_LOG_DECADES + 1)
            points.extend(point for point in piece.tau0 + offsets if piece.lo <= point <= piece.hi)
    return np.unique(np.asarray(points, dtype=float))


def _variance(phi: Optimizer, a: float, b: float, shift: float) -> float:
    if b - a <= 1e-15:
        return 0.0
    m1, m2 = phi.moments(a, b)
    width = b - a
    mean = m1 / width
    return max((m2 - 2 * shift * m1 + shift * shift * width) / width - (mean - shift) ** 2, 0.0)


def bmo_norm(phi: Optimizer) -> float:
    """
    ``sup_J sqrt(<phi^2>_J - <phi>_J^2)`` over subintervals J of ``[0, 1]``: a grid over the breakpoints and the
    log singularities, refined by alternating bounded scalar searches on the two endpoints.
    """
    if phi.is_step and len({piece.value for piece in phi.pieces}) == 1:  # type: ignore[union-attr]
        return 0.0
    shift = phi.moments()[0]
    grid = _bmo_grid(phi)
    cumulative = np.array([phi.moments(0.0, tau) for tau in grid])
    m1 = cumulative[:, 0] - shift * grid
    m2 = cumulative[:, 1] - 2 * shift * cumulative[:, 0] + shift * shift * grid
    width = grid[None, :] - grid[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        mean = (m1[None, :] - m1[:, None]) / width
        variance = (m2[None, :] - m2[:, None]) / width - mean * mean
    variance[~(width > 1e-15)] = -np.inf
    i, j = np.unravel_index(int(np.argmax(variance)), variance.shape)
    best = float(variance[i, j])
    a, b = float(grid[i]), float(grid[j])
    lo_a, hi_a = float(grid[max(i - 1, 0)]), float(grid[min(i + 1, len(grid) - 1)])
    lo_b, hi_b = float(grid[max(j - 1, 0)]), float(grid[min(j + 1, len(grid) - 1)])
    for _ in range(4):
        if lo_a < min(hi_a, b):
            result = optimize.minimize_scalar(
                lambda t: -_variance(phi, t, b, shift), bounds=(lo_a, min(hi_a, b)), method="bounded"
            )
            if -result.fun > best:
                best, a = -result.fun, float(result.x)
        if max(lo_b, a) < hi_b:
            result = optimize.minimize_scalar(
                lambda t: -_variance(phi, a, t, shift), bounds=(max(lo_b, a), hi_b), method="bounded"
            )
            if -result.fun > best:
                best, b = -result.fun, float(result.x)
    logger.debug(f"BMO sup attained on [{a:.6g}, {b:.6g}]")
    return math.sqrt(max(best, 0.0))


@define(frozen=True)
class OptimizerReport:
    """
    Identities of an optimizer at a point: the Bellman point, the average of ``f`` and the BMO norm.
    """

    x1: float
    x2: float
    eps: float
    mean_error: float
    square_error: float
    value: float
    f_average: float
    bmo: float
    tol_moment: float = TOL_OPT_MOMENT
    tol_value: float = TOL_OPT_VALUE
    tol_bmo: float = TOL_OPT_BMO

    @property
    def value_error(self) -> float:
        return abs(self.f_average - self.value)

    @property
    def bmo_excess(self) -> float:
        return self.bmo * self.bmo - self.eps * self.eps

    @property
    def passed(self) -> bool:
        return (
            self.mean_error <= self.tol_moment
            and self.square_error <= self.tol_moment * (1 + abs(self.x2))
            and self.value_error <= self.tol_value * (1 + abs(self.value))
            and self.bmo <= self.eps * (1 + self.tol_bmo)
        )

    def as_dict(self) -> Dict[str, Any]:
        return {
            "x1": self.x1,
            "x2": self.x2,
            "mean_error": self.mean_error,
            "square_error": self.square_error,
            "value_error": self.value_error,
            "bmo": self.bmo,
            "bmo_excess": self.bmo_excess,
            "passed": self.passed,
        }


def verify_optimizer(phi: Optimizer, x: Point, bc: BellmanCandidate) -> OptimizerReport:
    bf = bc.graph.bf
    assert bf is not None
    x1, x2 = x
    mean, square = phi.point
    return OptimizerReport(
        x1=x1,
        x2=x2,
        eps=bc.eps,
        mean_error=abs(mean - x1),
        square_error=abs(square - x2),
        value=bc(x1, x2),
        f_average=phi.f_average(bf),
        bmo=bmo_norm(phi),
    )


@define(frozen=True)
class DeliveryCurve:
    """
    Samples of ``gamma(tau) = (<phi>, <phi^2>)`` over ``[0, tau]`` with the running average of ``f``.
    """

    taus: np.ndarray
    points: np.ndarray
    averages: np.ndarray

    def inside(self, eps: float, tol: float = 1e-9) -> bool:
        gap = self.points[:, 1] - self.points[:, 0] ** 2
        return bool(np.all(gap >= -tol * (1 + np.abs(self.points[:, 1]))) and np.all(gap <= eps * eps * (1 + tol)))

    def mismatch(self, bc: BellmanCandidate) -> float:
        """Largest ``|B(gamma(tau)) - running average|`` along the curve."""
        values = [bc(float(x1), float(x2)) for x1, x2 in self.points]
        return float(np.max(np.abs(np.asarray(values) - self.averages)))

    def is_convex(self, tol: float = 1e-10) -> bool:
        """Whether the curve turns one way only."""
        steps = np.diff(self.points, axis=0)
        turns = steps[:-1, 0] * steps[1:, 1] - steps[:-1, 1] * steps[1:, 0]
        scale = tol * (1 + float(np.max(np.abs(self.points))))
        return bool(np.all(turns >= -scale) or np.all(turns <= scale))

    def to_rows(self) -> Iterator[Tuple[float, float, float, float]]:
        for tau, (x1, x2), average in zip(self.taus, self.points, self.averages):
            yield float(tau), float(x1), float(x2), float(average)


def delivery_curve(phi: Optimizer, bf: BoundaryFunction, samples: int = 64) -> DeliveryCurve:
    taus = np.unique(np.concatenate([np.geomspace(1e-6, 1.0, samples), np.asarray(phi.breakpoints[1:])]))
    taus = taus[taus > 0]
    points = np.array([phi.moments(0.0, float(tau)) for tau in taus]) / taus[:, None]
    averages = np.array([phi.f_integral(bf, 0.0, float(tau)) for tau in taus]) / taus
    return DeliveryCurve(taus, points, averages)


def _edge_of(bc: BellmanCandidate, ident: str) -> Edge:
    return bc.graph.edges[ident]


def _upper_optimizer(bc: BellmanCandidate, edge: Edge, u: float) -> Optimizer:
    """
    Optimizer of the point where the tangent at ``u`` of an edge's family touches the upper parabola: a log piece
    running back to the emitter, preceded by the optimizer of the emitter's own tangent point.
    """
    side = TANGENT_SIDES[edge.kind]
    eps = bc.eps
    lo, hi = float(edge.params["lo"]), float(edge.params["hi"])
    start = lo if side is Side.RIGHT else hi
    if side is Side.RIGHT:
        log = LogPiece(0.0, 1.0, 1, eps, 0.0, u)
        ratio = math.exp((start - u) / eps) if math.isfinite(start) else 0.0
    else:
        log = LogPiece(0.0, 1.0, -1, eps, 0.0, u)
        ratio = math.exp((u - start) / eps) if math.isfinite(start) else 0.0
    if ratio <= 0.0:
        return Optimizer((log,), (edge.id,))
    emitter = boundary_figure(bc, edge.source)
    if emitter is None:
        raise SynthesisFailure(f"The emitter of {edge.id} has no figure", figure_id=edge.id)
    inner = _optimizer_in(bc, emitter, upper_point(start, side, eps))
    if ratio >= 1.0:
        return inner
    tail = LogPiece(ratio, 1.0, log.sign, eps, 0.0, u)
    pieces = tuple(piece.placed(0.0, ratio) for piece in inner.pieces) + (tail,)
    return Optimizer(pieces, inner.provenance + (edge.id,))


def _tangent_optimizer(bc: BellmanCandidate, figure: TangentsFigure, x: Point) -> Optimizer:
    x1, x2 = x
    eps = bc.eps
    side = figure.slope.side
    u = tangent_point(x1, x2, side, eps)
    share = min(max((u - x1) / eps if side is Side.RIGHT else (x1 - u) / eps, 0.0), 1.0)
    if share <= 1e-15:
        return Optimizer.constant(u, (figure.ident,))
    upper = _upper_optimizer(bc, _edge_of(bc, figure.ident), u)
    return Optimizer.concat([(share, upper), (1 - share, Optimizer.constant(u))], (figure.ident,))


def _chordal_optimizer(figure: ChordalFigure, x: Point) -> Optimizer:
    chord = figure.chord(*x)
    if chord is None:
        raise SynthesisFailure(f"No chord of {figure.ident} through {x}", figure_id=figure.ident)
    if chord.length <= 1e-15:
        return Optimizer.constant(chord.a, (figure.ident,))
    share_b = min(max((x[0] - chord.a) / chord.length, 0.0), 1.0)
    return Optimizer.concat(
        [(share_b, Optimizer.constant(chord.b)), (1 - share_b, Optimizer.constant(chord.a))], (figure.ident,)
    )


def _barycentric(x: Point, corners: Sequence[Point]) -> np.ndarray | None:
    (p1, p2), (q1, q2), (r1, r2) = corners
    matrix = np.array([[q1 - p1, r1 - p1], [q2 - p2, r2 - p2]])
    if abs(np.linalg.det(matrix)) < 1e-300:
        return None
    beta, gamma = np.linalg.solve(matrix, np.array([x[0] - p1, x[1] - p2]))
    weights = np.array([1 - beta - gamma, beta, gamma])
    if np.any(weights < -1e-10):
        return None
    weights = np.clip(weights, 0.0, None)
    return weights / weights.sum()


def _incoming_tangent(bc: BellmanCandidate, vertex_id: str, kind: EdgeKind) -> Edge:
    edges = bc.graph.incoming(vertex_id, kind)
    if len(edges) != 1:
        raise SynthesisFailure(f"{vertex_id} has {len(edges)} incoming {kind.value} edges", figure_id=vertex_id)
    return edges[0]


def _anchor_optimizers(bc: BellmanCandidate, figure: LinearityFigure) -> List[Tuple[Point, Any]]:
    """
    Corners of the polygon covering an angle, trolleybus or birdie, ordered by the values of their optimizers, each
    with a factory of its optimizer.
    """
    vertex = bc.graph.vertices[figure.ident]
    eps = bc.eps
    if figure.figure_kind is FigureKind.ANGLE:
        a = b = float(vertex.params["w"])
    else:
        a, b = float(vertex.params["a"]), float(vertex.params["b"])
    anchors: List[Tuple[Point, Any]] = []
    if figure.figure_kind in (FigureKind.ANGLE, FigureKind.TROLLEYBUS_R, FigureKind.BIRDIE):
        edge = _incoming_tangent(bc, figure.ident, EdgeKind.TANGENT_R)
        anchors.append((upper_point(a, Side.RIGHT, eps), lambda: _upper_optimizer(bc, edge, a)))
    anchors.append(((a, a * a), lambda: Optimizer.constant(a)))
    if b != a:
        anchors.append(((b, b * b), lambda: Optimizer.constant(b)))
    if figure.figure_kind in (FigureKind.ANGLE, FigureKind.TROLLEYBUS_L, FigureKind.BIRDIE):
        edge_left = _incoming_tangent(bc, figure.ident, EdgeKind.TANGENT_L)
        anchors.append((upper_point(b, Side.LEFT, eps), lambda: _upper_optimizer(bc, edge_left, b)))
    return anchors


def _single_tangent_optimizer(bc: BellmanCandidate, figure: LinearityFigure, x: Point) -> Optimizer:
    vertex = bc.graph.vertices[figure.ident]
    u = float(vertex.params["u"])
    side = Side(vertex.params["side"])
    edge = _incoming_tangent(bc, figure.ident, EdgeKind.TANGENT_R if side is Side.RIGHT else EdgeKind.TANGENT_L)
    top = upper_point(u, side, bc.eps)
    weight = min(max((x[0] - u) / (top[0] - u), 0.0), 1.0)
    parts = [(1.0 - weight, Optimizer.constant(u)), (weight, _upper_optimizer(bc, edge, u))]
    return Optimizer.concat([part for part in parts if part[0] > 0], (figure.ident,))


def _polygon_optimizer(bc: BellmanCandidate, figure: LinearityFigure, x: Point) -> Optimizer:
    anchors = _anchor_optimizers(bc, figure)
    count = len(anchors)
    for first in range(count):
        for second in range(first + 1, count):
            for third in range(second + 1, count):
                chosen = (anchors[first], anchors[second], anchors[third])
                weights = _barycentric(x, [corner for corner, _ in chosen])
                if weights is None:
                    continue
                parts = [(float(weight), build()) for weight, (_, build) in zip(weights, chosen) if weight > 0]
                return Optimizer.concat(parts, (figure.ident,))
    raise SynthesisFailure(f"{x} is in no triangle of the corners of {figure.ident}", figure_id=figure.ident)


def _lower_boundary(figure: LinearityFigure) -> Tuple[List[Tuple[float, float]], List[Tuple[float, float]]]:
    """Arcs of the lower parabola and floor chords bounding a multicup, a closed multicup or a quadratic ray."""
    region = figure.region
    if region.ceiling is not None:
        lo, hi = region.ceiling
    else:
        lo, hi = region.left_lo, region.right_hi
    floors = sorted(region.floors)
    arcs = []
    start = lo
    for a, b in floors:
        arcs.append((start, a))
        start = b
    arcs.append((start, hi))
    return arcs, floors


def _two_step(s: float, t: float, x1: float) -> List[Tuple[float, float]]:
    """Values and weights of the two-step function on the chord ``[s, t]`` averaging to ``x1``."""
    if t - s <= 1e-15:
        return [(s, 1.0)]
    share_t = min(max((x1 - s) / (t - s), 0.0), 1.0)
    return [(s, 1 - share_t), (t, share_t)]


def _on_arcs(t: float, arcs: Sequence[Tuple[float, float]], tol: float) -> bool:
    return any(lo - tol <= t <= hi + tol for lo, hi in arcs)


def _hits(
    x: Point, direction: Tuple[float, float], arcs: Sequence[Tuple[float, float]], floors: Sequence[Tuple[float, float]]
) -> List[Tuple[float, List[Tuple[float, float]]]] | None:
    """
    Nearest points of the lower boundary along the line through ``x`` in both directions, as ``(r, steps)`` with the
    step values and weights of the hit point.
    """
    x1, x2 = x
    d1, d2 = direction
    found: Dict[int, Tuple[float, List[Tuple[float, float]]]] = {}

    def offer(r: float, steps: List[Tuple[float, float]]) -> None:
        key = 1 if r >= 0 else -1
        if key not in found or abs(r) < abs(found[key][0]):
            found[key] = (r, steps)

    a2, a1, a0 = d1 * d1, 2 * x1 * d1 - d2, x1 * x1 - x2
    if a2 > 0:
        disc = math.sqrt(max(a1 * a1 - 4 * a2 * a0, 0.0))
        for r in ((-a1 - disc) / (2 * a2), (-a1 + disc) / (2 * a2)):
            t = x1 + r * d1
            if _on_arcs(t, arcs, 1e-12 * (1 + abs(t))):
                offer(r, [(t, 1.0)])
    for a, b in floors:
        # chord line: y2 = (a + b) y1 - a b
        denominator = d2 - (a + b) * d1
        if abs(denominator) < 1e-300:
            continue
        r = ((a + b) * x1 - a * b - x2) / denominator
        t = x1 + r * d1
        if a - 1e-12 <= t <= b + 1e-12:
            offer(r, _two_step(a, b, t))
    if 1 not in found or -1 not in found:
        return None
    return [found[-1], found[1]]


def separating_slopes(x: Point, eps: float, ends: Sequence[float]) -> Tuple[float, float]:
    """
    Range of slopes of the lines through ``x`` that leave the region above the upper parabola and the boundary points
    at ``ends`` on one side, empty when ``lo > hi``.
    """
    x1, x2 = x
    reach = 2 * math.sqrt(max(x1 * x1 + eps * eps - x2, 0.0))
    lo, hi = 2 * x1 - reach, 2 * x1 + reach
    for t in ends:
        if not math.isfinite(t):
            continue
        run, rise = t - x1, t * t - x2
        if abs(run) <= 1e-15 * (1 + abs(t)):
            if rise < 0:
                return math.inf, -math.inf
            continue
        if run < 0:
            lo = max(lo, rise / run)
        else:
            hi = min(hi, rise / run)
    return lo, hi


def _quadratic_region_optimizer(figure: LinearityFigure, x: Point) -> Optimizer:
    """
    Optimizer in a domain where the candidate is quadratic on the lower boundary: the steps at the two points where a
    line through ``x`` meets the lower boundary. In a closed multicup the line is parallel to the ceiling chord,
    otherwise it separates ``x`` from the upper parabola and the ends of the outer arcs.
    """
    eps = figure.eps
    region = figure.region
    arcs, floors = _lower_boundary(figure)
    if region.ceiling is not None:
        lo, hi = region.ceiling
        k_lo = k_hi = lo + hi
    else:
        k_lo, k_hi = separating_slopes(x, eps, (region.left_lo, region.right_hi))
    if k_lo > k_hi + 1e-12 * (1 + abs(k_lo) + abs(k_hi)):
        message = f"No line through {x} separates it from the upper parabola in {figure.ident}"
        raise SynthesisFailure(message, figure_id=figure.ident)
    slope = 0.5 * (k_lo + k_hi) if k_lo <= k_hi else k_lo
    hits = _hits(x, (1.0, slope), arcs, floors)
    if hits is None:
        message = f"The line of slope {slope:.6g} through {x} leaves {figure.ident} off its lower boundary"
        raise SynthesisFailure(message, figure_id=figure.ident)
    (r_lo, steps_lo), (r_hi, steps_hi) = hits
    total = r_hi - r_lo
    if total <= 0:
        return _steps_optimizer(steps_lo, figure.ident)
    steps = [(value, weight * r_hi / total) for value, weight in steps_lo]
    steps += [(value, weight * -r_lo / total) for value, weight in steps_hi]
    values = [value for value, weight in steps if weight > 0]
    width = max(values) - min(values)
    if width > 2 * eps * (1 + 1e-9):
        message = f"Steps at {x} in {figure.ident} spread over {width:.6g} > 2 eps"
        raise SynthesisFailure(message, figure_id=figure.ident)
    return _steps_optimizer(steps, figure.ident)


def _steps_optimizer(steps: Sequence[Tuple[float, float]], ident: str) -> Optimizer:
    ordered = sorted((value, weight) for value, weight in steps if weight > 0)
    return Optimizer.concat([(weight, Optimizer.constant(value)) for value, weight in ordered], (ident,))


def _optimizer_in(bc: BellmanCandidate, figure: FigureCandidate, x: Point) -> Optimizer:
    x1, x2 = x
    if x2 - x1 * x1 <= 1e-15 * (1 + abs(x2)):
        return Optimizer.constant(x1, (figure.ident,))
    if isinstance(figure, TangentsFigure):
        return _tangent_optimizer(bc, figure, x)
    if isinstance(figure, ChordalFigure):
        return _chordal_optimizer(figure, x)
    if figure.figure_kind in (FigureKind.ANGLE, FigureKind.TROLLEYBUS_R, FigureKind.TROLLEYBUS_L, FigureKind.BIRDIE):
        return _polygon_optimizer(bc, figure, x)
    if figure.figure_kind is FigureKind.SINGLE_TANGENT:
        return _single_tangent_optimizer(bc, figure, x)
    return _quadratic_region_optimizer(figure, x)


def optimizer_at(bc: BellmanCandidate, x1: float, x2: float) -> Optimizer:
    """
    An optimizer of the candidate at ``(x1, x2)``, built along the figures that feed the one containing the point.
    """
    if x2 - x1 * x1 <= 1e-15 * (1 + abs(x2)):
        return Optimizer.constant(x1)
    figure = bc.figure(bc.locate(x1, x2))
    try:
        return _optimizer_in(bc, figure, (x1, x2))
    except RecursionError as error:
        raise SynthesisFailure(f"Optimizer synthesis at ({x1}, {x2}) does not terminate", figure.ident) from error
