"""
Boundary functions given in closed form per piece.

A boundary function is a C2 function on the real line, split into pieces. Each piece is a sum of polynomial,
exponential ``a exp(bt)`` and trigonometric ``a cos(bt + c)`` terms, so that every derivative and every integral of
f''' against ``exp(+-t/eps)`` has a closed form.
"""

from __future__ import annotations

import bisect
import math
from functools import cached_property
from typing import Any, Sequence, Union

import numpy as np
from attr import define, field
from numpy.polynomial import Polynomial
from scipy import integrate, optimize

from bellman import settings
from bellman.config import BoundaryFunctionDocument, ExpTermDocument, PieceDocument, RootDocument, TrigTermDocument
from bellman.constants import (
    GAUSS_NODES,
    ROOT_MAX_SAMPLES,
    ROOT_MIN_SAMPLES,
    ROOT_SAMPLES_PER_UNIT,
    TOL_JUNCTION,
    TOL_ROOT,
    RootKind,
)
from bellman.exceptions import DegenerateTransform, Divergent, NonAlternatingSigns
from bellman.log import get_logger

logger = get_logger(__name__)

ArrayLike = Union[float, np.ndarray]

# Below this value of (|k| + max |b|) * length the closed-form primitives lose digits to cancellation and a fixed
# Gauss-Legendre rule is exact to rounding instead.
SHORT_INTERVAL = 0.5


@define(frozen=True)
class ExpTerm:
    """Term ``a * exp(b t)``."""

    a: float
    b: float

    def derivative(self, t: ArrayLike, order: int) -> ArrayLike:
        return self.a * self.b**order * np.exp(self.b * t)

    @property
    def is_constant(self) -> bool:
        return self.a == 0 or self.b == 0


@define(frozen=True)
class TrigTerm:
    """Term ``a * cos(b t + c)``."""

    a: float
    b: float
    c: float = 0.0

    def derivative(self, t: ArrayLike, order: int) -> ArrayLike:
        return self.a * self.b**order * np.cos(self.b * t + self.c + order * np.pi / 2)

    @property
    def is_constant(self) -> bool:
        return self.a == 0 or self.b == 0


def _check_decay(rate: float, lo: float, hi: float) -> None:
    """Raise unless ``exp(rate * t)`` decays toward the infinite ends of ``[lo, hi]``."""
    if lo == -math.inf and not rate > 0:
        raise Divergent(f"exp({rate:.6g} t) does not decay at -inf")
    if hi == math.inf and not rate < 0:
        raise Divergent(f"exp({rate:.6g} t) does not decay at +inf")


@define(frozen=True, eq=False, slots=False)
class PieceSpec:
    """
    One piece of a boundary function on the closed interval ``[lo, hi]`` (ends may be infinite).

    :param lo: Left end
    :param hi: Right end
    :param poly: Polynomial coefficients, constant term first
    :param exp: Exponential terms
    :param trig: Trigonometric terms
    """

    lo: float
    hi: float
    poly: tuple[float, ...] = field(default=(), converter=lambda value: tuple(float(c) for c in value))
    exp: tuple[ExpTerm, ...] = field(default=(), converter=tuple)
    trig: tuple[TrigTerm, ...] = field(default=(), converter=tuple)

    @cached_property
    def polynomials(self) -> list[Polynomial]:
        """The polynomial part and its first four derivatives."""
        base = Polynomial(self.poly if self.poly else (0.0,))
        return [base.deriv(order) if order else base for order in range(5)]

    @cached_property
    def third_vanishes(self) -> bool:
        """True when f''' is identically zero on the piece."""
        return (
            not np.any(self.polynomials[3].coef)
            and all(term.is_constant for term in self.exp)
            and all(term.is_constant for term in self.trig)
        )

    @property
    def is_pure_polynomial(self) -> bool:
        return all(term.is_constant for term in self.exp) and all(term.is_constant for term in self.trig)

    def derivative(self, t: ArrayLike, order: int) -> ArrayLike:
        value = self.polynomials[order](t) if order < 5 else self.polynomials[0].deriv(order)(t)
        for term in self.exp:
            value = value + term.derivative(t, order)
        for term in self.trig:
            value = value + term.derivative(t, order)
        return value

    def damped_third(self, t: float, eps: float) -> float:
        """Return ``exp(-|t| / eps) f'''(t)``, combining the exponent of every exponential term with the weight."""
        decay = -abs(t) / eps
        weight = math.exp(decay)
        value = 0.0
        if weight > 0:
            value = float(self.polynomials[3](t)) * weight
            for term in self.trig:
                value += float(term.derivative(t, 3)) * weight
        for term in self.exp:
            if not term.is_constant:
                value += term.a * term.b**3 * math.exp(term.b * t + decay)
        return value

    def contains(self, t: float) -> bool:
        return self.lo <= t <= self.hi

    def weighted_third(self, p: float, q: float, k: float, shift: float) -> float:
        """
        Return the integral of ``exp(k (t - shift)) f'''(t)`` over ``[p, q]``, a sub-interval of the piece.
        """
        if not p < q or self.third_vanishes:
            return 0.0
        finite = math.isfinite(p) and math.isfinite(q)
        rate = abs(k) + max([abs(term.b) for term in (*self.exp, *self.trig)], default=0.0)
        if finite and rate * (q - p) < SHORT_INTERVAL:
            value, _ = integrate.fixed_quad(
                lambda t: np.exp(k * (t - shift)) * self.derivative(t, 3), p, q, n=GAUSS_NODES
            )
            return float(value)
        return (
            self._poly_weighted(p, q, k, shift)
            + self._exp_weighted(p, q, k, shift)
            + self._trig_weighted(p, q, k, shift)
        )

    def _poly_weighted(self, p: float, q: float, k: float, shift: float) -> float:
        third = self.polynomials[3]
        if not np.any(third.coef):
            return 0.0
        _check_decay(k, p, q)

        def primitive(t: float) -> float:
            total, current, sign = 0.0, third, 1.0
            for power in range(1, third.degree() + 2):
                total += sign * current(t) / k**power
                current = current.deriv()
                sign = -sign
            return math.exp(k * (t - shift)) * total

        upper = primitive(q) if math.isfinite(q) else 0.0
        lower = primitive(p) if math.isfinite(p) else 0.0
        return upper - lower

    def _exp_weighted(self, p: float, q: float, k: float, shift: float) -> float:
        total = 0.0
        for term in self.exp:
            if term.is_constant:
                continue
            amplitude = term.a * term.b**3
            rate = k + term.b
            if abs(rate) <= 1e-14 * (abs(k) + abs(term.b)):
                if not (math.isfinite(p) and math.isfinite(q)):
                    raise Divergent(f"exp({term.b} t) is not integrable against exp({k:.6g} t) on [{p}, {q}]")
                total += amplitude * math.exp(-k * shift) * (q - p)
                continue
            _check_decay(rate, p, q)
            if math.isfinite(p) and math.isfinite(q):
                total += amplitude * math.exp(rate * p - k * shift) * math.expm1(rate * (q - p)) / rate
            elif math.isfinite(q):
                total += amplitude * math.exp(rate * q - k * shift) / rate
            elif math.isfinite(p):
                total -= amplitude * math.exp(rate * p - k * shift) / rate
        return total

    def _trig_weighted(self, p: float, q: float, k: float, shift: float) -> float:
        total = 0.0
        for term in self.trig:
            if term.is_constant:
                continue
            # f''' of the term is amplitude * cos(b t + phase)
            amplitude = term.a * term.b**3
            phase = term.c + 1.5 * math.pi
            _check_decay(k, p, q)

            def primitive(t: float, term: TrigTerm = term, phase: float = phase) -> float:
                angle = term.b * t + phase
                return (
                    math.exp(k * (t - shift))
                    * (k * math.cos(angle) + term.b * math.sin(angle))
                    / (k * k + term.b * term.b)
                )

            upper = primitive(q) if math.isfinite(q) else 0.0
            lower = primitive(p) if math.isfinite(p) else 0.0
            total += amplitude * (upper - lower)
        return total

    def affine(self, a: float, b: float, c: float, d: float, alpha: float, beta: float) -> PieceSpec:
        """Piece of ``a f(alpha t + beta) + b t^2 + c t + d``."""
        inner = Polynomial([beta, alpha])
        composed = a * self.polynomials[0](inner) + Polynomial([d, c, b])
        ends = sorted(((self.lo - beta) / alpha, (self.hi - beta) / alpha))
        return PieceSpec(
            lo=ends[0],
            hi=ends[1],
            poly=tuple(composed.coef),
            exp=tuple(ExpTerm(a * term.a * math.exp(term.b * beta), term.b * alpha) for term in self.exp),
            trig=tuple(TrigTerm(a * term.a, term.b * alpha, term.b * beta + term.c) for term in self.trig),
        )

    def as_document(self) -> PieceDocument:
        return PieceDocument(
            lo=self.lo,
            hi=self.hi,
            poly=list(self.poly),
            exp=[ExpTermDocument(a=term.a, b=term.b) for term in self.exp],
            trig=[TrigTermDocument(a=term.a, b=term.b, c=term.c) for term in self.trig],
        )


@define(frozen=True)
class EssentialRoot:
    """
    An essential root of f''': a point, a closed interval or a ray. A root at infinity has ``lo == hi == +-inf``.
    """

    kind: RootKind
    lo: float
    hi: float

    @property
    def is_point(self) -> bool:
        return self.lo == self.hi

    @property
    def is_at_infinity(self) -> bool:
        return self.is_point and math.isinf(self.lo)

    @property
    def is_left_ray(self) -> bool:
        return self.lo == -math.inf and math.isfinite(self.hi)

    @property
    def is_right_ray(self) -> bool:
        return self.hi == math.inf and math.isfinite(self.lo)

    @property
    def is_finite(self) -> bool:
        return math.isfinite(self.lo) and math.isfinite(self.hi)

    @property
    def center(self) -> float:
        return 0.5 * (self.lo + self.hi) if self.is_finite else (self.lo if self.is_point else math.nan)

    def as_dict(self) -> dict[str, Any]:
        return {"kind": self.kind.value, "lo": self.lo, "hi": self.hi}


@define(frozen=True)
class RootStructure:
    """
    The alternating essential roots ``c0 < v1 < c1 < ... < vn < cn`` of f'''.
    """

    c: tuple[EssentialRoot, ...] = ()
    v: tuple[EssentialRoot, ...] = ()

    def ordered(self) -> list[EssentialRoot]:
        merged: list[EssentialRoot] = []
        for index, root in enumerate(self.c):
            if index:
                merged.append(self.v[index - 1])
            merged.append(root)
        return merged

    def validate(self) -> None:
        if not self.c and not self.v:
            return
        if len(self.c) != len(self.v) + 1:
            raise NonAlternatingSigns(f"Expected one more c-root than v-roots, got {len(self.c)} and {len(self.v)}")
        if any(root.kind is not RootKind.C for root in self.c) or any(root.kind is not RootKind.V for root in self.v):
            raise NonAlternatingSigns("Root kinds do not match their lists.")
        ordered = self.ordered()
        for root in ordered:
            if root.lo > root.hi:
                raise NonAlternatingSigns(f"Empty root [{root.lo}, {root.hi}]")
        for left, right in zip(ordered, ordered[1:]):
            if not left.hi < right.lo:
                raise NonAlternatingSigns(f"Roots [{left.lo}, {left.hi}] and [{right.lo}, {right.hi}] do not alternate")
        for root in self.v:
            if not root.is_finite:
                raise NonAlternatingSigns("A v-root must be finite.")

    def min_gap(self) -> float:
        """Smallest distance between consecutive roots or length of a finite solid root, ``inf`` if there is none."""
        gaps = [right.lo - left.hi for left, right in zip(self.ordered(), self.ordered()[1:])]
        gaps += [root.hi - root.lo for root in self.ordered() if root.is_finite and not root.is_point]
        finite = [gap for gap in gaps if math.isfinite(gap)]
        return min(finite, default=math.inf)

    def __len__(self) -> int:
        return len(self.c) + len(self.v)


@define(frozen=True)
class ConditionEntry:
    name: str
    passed: bool
    value: float = math.nan
    message: str = ""


@define(frozen=True)
class ConditionReport:
    """
    Result of :func:`check_conditions`. Never raised, always returned.
    """

    entries: tuple[ConditionEntry, ...]
    roots: RootStructure | None = None

    @property
    def passed(self) -> bool:
        return all(entry.passed for entry in self.entries)

    def entry(self, name: str) -> ConditionEntry:
        for entry in self.entries:
            if entry.name == name:
                return entry
        raise KeyError(name)

    def as_dict(self) -> dict[str, Any]:
        return {
            "passed": self.passed,
            "essential_roots": None if self.roots is None else len(self.roots),
            "roots": None if self.roots is None else [root.as_dict() for root in self.roots.ordered()],
            "entries": [
                {"name": entry.name, "passed": entry.passed, "value": entry.value, "message": entry.message}
                for entry in self.entries
            ],
        }


@define(frozen=True)
class AffineTransform:
    """
    Record of ``g(t) = a f(alpha t + beta) + b t^2 + c t + d``.

    The Bellman function of g at radius eps is ``|a| B(T x) + b x2 + c x1 + d`` where B is the Bellman function of
    ``sign(a) f`` at radius ``|alpha| eps`` and
    ``T(x1, x2) = (alpha x1 + beta, alpha^2 x2 + 2 alpha beta x1 + beta^2)``.
    """

    a: float = 1.0
    b: float = 0.0
    c: float = 0.0
    d: float = 0.0
    alpha: float = 1.0
    beta: float = 0.0

    def point(self, x1: float, x2: float) -> tuple[float, float]:
        """Map a Bellman point of g to the Bellman point of f."""
        return (
            self.alpha * x1 + self.beta,
            self.alpha**2 * x2 + 2 * self.alpha * self.beta * x1 + self.beta**2,
        )

    def inverse_point(self, y1: float, y2: float) -> tuple[float, float]:
        """Map a Bellman point of f back to the Bellman point of g."""
        x1 = (y1 - self.beta) / self.alpha
        return x1, (y2 - 2 * self.alpha * self.beta * x1 - self.beta**2) / self.alpha**2

    def radius(self, eps: float) -> float:
        """Radius of f's Bellman function matching radius ``eps`` for g."""
        return abs(self.alpha) * eps

    def forward_value(self, x1: float, x2: float, value_f: float) -> float:
        """Bellman value of g at ``x`` given the value of the ``sign(a) f`` problem at ``T x``."""
        return abs(self.a) * value_f + self.b * x2 + self.c * x1 + self.d

    def recover(self, y1: float, y2: float, value_g: float) -> float:
        """Bellman value of the ``sign(a) f`` problem at ``y`` given the value of g at ``T^-1 y``."""
        x1, x2 = self.inverse_point(y1, y2)
        return (value_g - self.b * x2 - self.c * x1 - self.d) / abs(self.a)

    def apply(self, x1: float, x2: float, evaluation: tuple[float, float, float]) -> tuple[float, float, float]:
        """Value and gradient of g at ``x`` from the value and gradient of the ``sign(a) f`` problem at ``T x``."""
        value, d1, d2 = evaluation
        scale = abs(self.a)
        return (
            self.forward_value(x1, x2, value),
            scale * self.alpha * (d1 + 2 * self.beta * d2) + self.c,
            scale * self.alpha**2 * d2 + self.b,
        )


@define(frozen=True, eq=False, slots=False)
class BoundaryFunction:
    """
    A piecewise closed-form boundary function.

    :param pieces: Pieces partitioning the real line in increasing order
    :param eps_inf: Summability radius
    :param roots_override: Essential roots replacing the sign analysis of f'''
    :param name: Label used in reports
    """

    pieces: tuple[PieceSpec, ...] = field(converter=tuple)
    eps_inf: float = math.inf
    roots_override: RootStructure | None = None
    name: str = ""

    @classmethod
    def from_document(cls, document: BoundaryFunctionDocument) -> BoundaryFunction:
        pieces = tuple(
            PieceSpec(
                lo=piece.lo,
                hi=piece.hi,
                poly=tuple(piece.poly),
                exp=tuple(ExpTerm(term.a, term.b) for term in piece.exp),
                trig=tuple(TrigTerm(term.a, term.b, term.c) for term in piece.trig),
            )
            for piece in document.pieces
        )
        override = None
        if document.roots_override is not None:
            override = _structure_from_list(
                [EssentialRoot(RootKind(root.kind), root.lo, root.hi) for root in document.roots_override]
            )
        return cls(pieces=pieces, eps_inf=document.eps_inf, roots_override=override, name=document.name)

    @classmethod
    def polynomial(cls, coefficients: Sequence[float], eps_inf: float = math.inf, name: str = "") -> BoundaryFunction:
        return cls(pieces=(PieceSpec(-math.inf, math.inf, poly=tuple(coefficients)),), eps_inf=eps_inf, name=name)

    def as_document(self) -> BoundaryFunctionDocument:
        override = None
        if self.roots_override is not None:
            override = [
                RootDocument(kind=root.kind.value, lo=root.lo, hi=root.hi) for root in self.roots_override.ordered()
            ]
        return BoundaryFunctionDocument(
            pieces=[piece.as_document() for piece in self.pieces],
            eps_inf=self.eps_inf,
            roots_override=override,
            name=self.name,
        )

    @cached_property
    def version(self) -> str:
        return self.as_document().version

    @cached_property
    def breaks(self) -> list[float]:
        return [piece.hi for piece in self.pieces[:-1]]

    def piece_index(self, t: float) -> int:
        return bisect.bisect_right(self.breaks, t)

    def derivative(self, t: ArrayLike, order: int) -> ArrayLike:
        """
        The derivative of the given order. At a junction the right piece is used, which for f''' is the
        right-sided density.
        """
        if np.ndim(t) == 0:
            return float(self.pieces[self.piece_index(float(t))].derivative(float(t), order))
        points = np.asarray(t, dtype=float)
        indices = np.searchsorted(np.asarray(self.breaks), points, side="right")
        values = np.empty_like(points)
        for index in np.unique(indices):
            mask = indices == index
            values[mask] = self.pieces[index].derivative(points[mask], order)
        return values

    def __call__(self, t: ArrayLike) -> ArrayLike:
        return self.derivative(t, 0)

    def weighted_stieltjes(self, p: float, q: float, eps: float, sign: int, shift: float = 0.0) -> float:
        """
        Return the integral of ``exp(sign (t - shift) / eps) f'''(t)`` over ``[p, q]``. Ends may be infinite.
        """
        if p > q:
            return -self.weighted_stieltjes(q, p, eps, sign, shift)
        k = sign / eps
        total = 0.0
        for piece in self.pieces:
            lo, hi = max(piece.lo, p), min(piece.hi, q)
            if lo < hi:
                total += piece.weighted_third(lo, hi, k, shift)
        return total

    @cached_property
    def roots(self) -> RootStructure:
        return find_roots(self)

    def affine(
        self, a: float = 1.0, b: float = 0.0, c: float = 0.0, d: float = 0.0, alpha: float = 1.0, beta: float = 0.0
    ) -> tuple[BoundaryFunction, AffineTransform]:
        return affine_normalize(self, a, b, c, d, alpha, beta)

    def negated(self) -> BoundaryFunction:
        return self.affine(a=-1.0)[0]

    def junction_jumps(self) -> list[tuple[float, float, float, float]]:
        """Jumps ``(t0, |df|, |df'|, |df''|)`` at every piece junction."""
        jumps = []
        for left, right in zip(self.pieces, self.pieces[1:]):
            t0 = left.hi
            jumps.append((t0, *(abs(left.derivative(t0, order) - right.derivative(t0, order)) for order in range(3))))
        return jumps


def _structure_from_list(roots: list[EssentialRoot]) -> RootStructure:
    structure = RootStructure(
        c=tuple(root for root in roots if root.kind is RootKind.C),
        v=tuple(root for root in roots if root.kind is RootKind.V),
    )
    structure.validate()
    return structure


def _sample_window(piece: PieceSpec) -> tuple[float, float]:
    horizon = settings.horizon
    lo = piece.lo if math.isfinite(piece.lo) else min(-horizon, piece.hi - horizon)
    hi = piece.hi if math.isfinite(piece.hi) else max(horizon, piece.lo + horizon)
    return lo, hi


def _piece_zeros(piece: PieceSpec) -> list[float]:
    """Sign changes of f''' inside a piece: exact for polynomials, bracketed Brent for mixed terms."""
    if piece.is_pure_polynomial:
        third = piece.polynomials[3]
        if not np.any(third.coef):
            return []
        zeros = []
        for root in third.roots():
            if abs(root.imag) <= 1e-9 * (1 + abs(root.real)) and piece.lo < root.real < piece.hi:
                zeros.append(float(root.real))
        return sorted(zeros)

    lo, hi = _sample_window(piece)
    count = int(np.clip(math.ceil((hi - lo) * ROOT_SAMPLES_PER_UNIT), ROOT_MIN_SAMPLES, ROOT_MAX_SAMPLES))
    grid = np.linspace(lo, hi, count)
    values = piece.derivative(grid, 3)
    zeros = []
    for index in range(count - 1):
        left, right = values[index], values[index + 1]
        if left == 0.0 and lo < grid[index] < hi:
            zeros.append(float(grid[index]))
        elif left * right < 0:
            zeros.append(
                optimize.brentq(lambda t: piece.derivative(t, 3), grid[index], grid[index + 1], xtol=TOL_ROOT)
            )
    return zeros


def _sign_at(piece: PieceSpec, lo: float, hi: float) -> int:
    if math.isfinite(lo) and math.isfinite(hi):
        samples = [lo + (hi - lo) * fraction for fraction in (0.5, 0.25, 0.75, 0.1, 0.9)]
    elif math.isfinite(hi):
        samples = [hi - 1.0, hi - 0.5, hi - 2.0, hi - 10.0]
    elif math.isfinite(lo):
        samples = [lo + 1.0, lo + 0.5, lo + 2.0, lo + 10.0]
    else:
        samples = [0.0, 1.0, -1.0, 10.0]
    for sample in samples:
        value = piece.derivative(sample, 3)
        if value != 0.0:
            return 1 if value > 0 else -1
    return 0


def sign_runs(bf: BoundaryFunction) -> list[tuple[float, float, int]]:
    """
    Maximal runs ``(lo, hi, sign)`` of constant sign of f''' over the real line.
    """
    segments: list[tuple[float, float, int]] = []
    for piece in bf.pieces:
        if piece.third_vanishes:
            segments.append((piece.lo, piece.hi, 0))
            continue
        cuts = [piece.lo, *_piece_zeros(piece), piece.hi]
        for lo, hi in zip(cuts, cuts[1:]):
            if lo < hi:
                segments.append((lo, hi, _sign_at(piece, lo, hi)))
    runs: list[tuple[float, float, int]] = []
    for lo, hi, sign in segments:
        if runs and runs[-1][2] == sign:
            runs[-1] = (runs[-1][0], hi, sign)
        else:
            runs.append((lo, hi, sign))
    return runs


def _validate_override(bf: BoundaryFunction, override: RootStructure) -> RootStructure:
    override.validate()
    ordered = override.ordered()
    for left, right in zip([None, *ordered], [*ordered, None]):
        lo = -settings.horizon if left is None else left.hi
        hi = settings.horizon if right is None else right.lo
        lo, hi = max(lo, -settings.horizon), min(hi, settings.horizon)
        if not lo < hi:
            continue
        rising = (right is not None and right.kind is RootKind.C) or (left is not None and left.kind is RootKind.V)
        expected = 1 if rising else -1
        samples = np.linspace(lo, hi, 1002)[1:-1]
        values = np.asarray(bf.derivative(samples, 3))
        if np.any(values * expected < -1e-12 * (1 + np.abs(values).max())):
            raise NonAlternatingSigns(f"f''' does not keep the sign {expected:+d} between {lo} and {hi}")
    return override


def find_roots(bf: BoundaryFunction) -> RootStructure:
    """
    Locate the essential roots of f'''.

    f''' is taken positive before -inf and negative after +inf, so that ``c0 = -inf`` when f''' < 0 near -inf and
    ``cn = +inf`` when f''' > 0 near +inf. An identically vanishing f''' has no roots.
    """
    if bf.roots_override is not None:
        return _validate_override(bf, bf.roots_override)

    runs = sign_runs(bf)
    if all(sign == 0 for _, _, sign in runs):
        return RootStructure()

    signed = [(-math.inf, -math.inf, 1)] + [run for run in runs if run[2] != 0] + [(math.inf, math.inf, -1)]
    roots: list[EssentialRoot] = []
    for (_, left_end, left_sign), (right_start, _, right_sign) in zip(signed, signed[1:]):
        if left_sign == right_sign:
            continue
        kind = RootKind.C if left_sign > 0 else RootKind.V
        roots.append(EssentialRoot(kind, left_end, right_start))

    structure = _structure_from_list(roots)
    logger.debug(f"Essential roots of {bf.name or 'f'}: {[root.as_dict() for root in structure.ordered()]}")
    return structure


def _growth_violations(bf: BoundaryFunction, eps: float) -> list[str]:
    """Exponential terms of infinite pieces that outgrow ``exp(|t| / eps)``."""
    messages = []
    for piece in bf.pieces:
        for term in piece.exp:
            if term.is_constant:
                continue
            if piece.hi == math.inf and term.b - 1 / eps >= 0:
                messages.append(f"exp({term.b} t) outgrows exp(t/{eps:.6g}) at +inf")
            if piece.lo == -math.inf and term.b + 1 / eps <= 0:
                messages.append(f"exp({term.b} t) outgrows exp(-t/{eps:.6g}) at -inf")
    return messages


def _oscillating_tails(bf: BoundaryFunction) -> list[str]:
    messages = []
    for piece in bf.pieces:
        if math.isfinite(piece.lo) and math.isfinite(piece.hi):
            continue
        oscillating = any(not term.is_constant for term in piece.trig)
        dominated = bool(np.any(piece.polynomials[3].coef)) or any(not term.is_constant for term in piece.exp)
        if oscillating and not dominated:
            messages.append(f"f''' oscillates on the infinite piece [{piece.lo}, {piece.hi}]")
    return messages


def weighted_variation(bf: BoundaryFunction, eps: float) -> float:
    """
    The integral of ``exp(-|t| / eps) |f'''(t)|`` over the real line, ``inf`` when it diverges.
    """
    if _growth_violations(bf, eps):
        return math.inf
    total = 0.0
    for piece in bf.pieces:
        if piece.third_vanishes:
            continue
        cuts = [piece.lo, *(t for t in (0.0,) if piece.lo < t < piece.hi), piece.hi]
        for lo, hi in zip(cuts, cuts[1:]):
            value, _ = integrate.quad(lambda t: abs(piece.damped_third(t, eps)), lo, hi, limit=200)
            total += value
    return total


def check_conditions(bf: BoundaryFunction, eps_inf: float | None = None) -> ConditionReport:
    """
    Check the regularity and summability conditions. Failures are returned as entries, never raised.
    """
    eps_inf = bf.eps_inf if eps_inf is None else eps_inf
    check_eps = min(eps_inf, 1e6)
    entries: list[ConditionEntry] = []

    worst = 0.0
    for t0, *jumps in bf.junction_jumps():
        scale = 1 + abs(bf(t0))
        worst = max(worst, max(jumps) / scale)
    entries.append(
        ConditionEntry(
            "c2_junctions",
            worst <= TOL_JUNCTION,
            worst,
            "" if worst <= TOL_JUNCTION else "f is not twice continuously differentiable at a junction",
        )
    )

    oscillations = _oscillating_tails(bf)
    entries.append(
        ConditionEntry("finite_monotonicity", not oscillations, float(len(oscillations)), "; ".join(oscillations))
    )

    roots: RootStructure | None = None
    try:
        roots = find_roots(bf)
        entries.append(ConditionEntry("essential_roots", True, float(len(roots))))
    except NonAlternatingSigns as error:
        entries.append(ConditionEntry("essential_roots", False, math.nan, str(error)))

    variation = weighted_variation(bf, check_eps)
    entries.append(
        ConditionEntry(
            "summability",
            math.isfinite(variation),
            variation,
            "" if math.isfinite(variation) else f"weighted variation diverges for eps_inf={eps_inf}",
        )
    )

    growth = _growth_violations(bf, check_eps)
    entries.append(ConditionEntry("derivative_decay", not growth, float(len(growth)), "; ".join(growth)))
    return ConditionReport(entries=tuple(entries), roots=roots)


def eval_derivs(bf: BoundaryFunction, t: float) -> tuple[float, float, float, float]:
    """Return ``(f, f', f'', f''')`` at a finite ``t``."""
    piece = bf.pieces[bf.piece_index(t)]
    return tuple(float(piece.derivative(t, order)) for order in range(4))  # type: ignore[return-value]


def _transformed_override(roots: RootStructure, a: float, alpha: float, beta: float) -> RootStructure:
    """
    Essential roots of ``a f(alpha t + beta)``: g''' = a alpha^3 f'''(alpha t + beta), so the kinds swap iff ``a < 0``.
    The roots at infinity only mark the sign of f''' at the ends and are rebuilt.
    """
    if not len(roots):
        return roots
    mapped = []
    for root in roots.ordered():
        if root.is_point and not root.is_finite:
            continue
        lo, hi = sorted(((root.lo - beta) / alpha, (root.hi - beta) / alpha))
        kind = root.kind
        if a < 0:
            kind = RootKind.V if kind is RootKind.C else RootKind.C
        mapped.append(EssentialRoot(kind, lo, hi))
    mapped.sort(key=lambda root: root.lo)
    if not mapped:
        # a single root at infinity: f''' keeps one sign, positive iff the root is at +inf
        positive = roots.ordered()[0].lo > 0
        if (a < 0) != (alpha < 0):
            positive = not positive
        end = math.inf if positive else -math.inf
        return _structure_from_list([EssentialRoot(RootKind.C, end, end)])
    if mapped[0].kind is RootKind.V:
        mapped.insert(0, EssentialRoot(RootKind.C, -math.inf, -math.inf))
    if mapped[-1].kind is RootKind.V:
        mapped.append(EssentialRoot(RootKind.C, math.inf, math.inf))
    return _structure_from_list(mapped)


def affine_normalize(
    bf: BoundaryFunction,
    a: float = 1.0,
    b: float = 0.0,
    c: float = 0.0,
    d: float = 0.0,
    alpha: float = 1.0,
    beta: float = 0.0,
) -> tuple[BoundaryFunction, AffineTransform]:
    """
    Return ``g(t) = a f(alpha t + beta) + b t^2 + c t + d`` and the record carrying Bellman values between f and g.
    """
    if a == 0:
        raise DegenerateTransform("The scaling factor a must not vanish.")
    if alpha == 0:
        raise DegenerateTransform("The variable change factor alpha must not vanish.")
    pieces = [piece.affine(a, b, c, d, alpha, beta) for piece in bf.pieces]
    if alpha < 0:
        pieces.reverse()
    override = None
    if bf.roots_override is not None:
        override = _transformed_override(bf.roots_override, a, alpha, beta)
    transformed = BoundaryFunction(
        pieces=tuple(pieces),
        eps_inf=bf.eps_inf / abs(alpha),
        roots_override=override,
        name=bf.name,
    )
    return transformed, AffineTransform(a=a, b=b, c=c, d=d, alpha=alpha, beta=beta)


def root_gap(roots: RootStructure) -> float:
    """Smallest distance between consecutive essential roots, ``inf`` for fewer than two finite ones."""
    return roots.min_gap()
