"""
Brute-force oracle: the minimal locally concave function on a grid over the parabolic strip, by value iteration over
chords.
"""

from __future__ import annotations

import math
from typing import Callable, Iterator, List, Optional, Tuple

import numpy as np
from attr import define, field

from bellman import settings
from bellman.boundary_function import BoundaryFunction
from bellman.config import GridConfig
from bellman.constants import TOL_GRID
from bellman.exceptions import BellmanValueError, NoConvergence
from bellman.foliation import BellmanCandidate
from bellman.log import get_logger

logger = get_logger(__name__)

UNSET = -1e300
EDGE_COLUMNS = 2


@define
class GridDomain:
    """
    Columns of points from the lower to the upper parabola of radius ``eps``.

    :param x1: Abscissas of the columns
    :param x2: ``x2[i, j] = x1[i]^2 + eps^2 j / (n2 - 1)``
    """

    eps: float
    x1: np.ndarray
    x2: np.ndarray

    @classmethod
    def from_config(cls, eps: float, grid: GridConfig) -> GridDomain:
        x1 = np.linspace(grid.x1_min, grid.x1_max, grid.n1)
        rows = np.linspace(0.0, 1.0, grid.n2)
        return cls(eps, x1, x1[:, None] ** 2 + eps * eps * rows[None, :])

    @property
    def shape(self) -> Tuple[int, int]:
        return self.x2.shape  # type: ignore[return-value]

    @property
    def step(self) -> float:
        return float(self.x1[1] - self.x1[0])


@define
class GridValues:
    """
    Values of the oracle on a grid; points no chord reached are ``nan``.

    :param sweeps: Jacobi sweeps until the largest update fell below ``tol``
    :param window: Column window the values were computed with
    :param caveats: Notes on truncation at the grid edges
    """

    domain: GridDomain
    values: np.ndarray
    sweeps: int
    window: int
    tol: float
    caveats: List[str] = field(factory=list)

    @property
    def eps(self) -> float:
        return self.domain.eps

    def to_rows(self, bc: Optional[BellmanCandidate] = None) -> Iterator[Tuple[float, ...]]:
        """``(x1, x2, V)`` per point, with ``B`` and ``V - B`` appended when a candidate is given."""
        n1, n2 = self.domain.shape
        for i in range(n1):
            for j in range(n2):
                x1, x2, value = float(self.domain.x1[i]), float(self.domain.x2[i, j]), float(self.values[i, j])
                if bc is None:
                    yield x1, x2, value
                else:
                    reference = bc(x1, x2)
                    yield x1, x2, value, reference, value - reference


def _interpolate(column_values: np.ndarray, position: np.ndarray) -> np.ndarray:
    """
    Interpolation along columns at fractional row ``position``; ``UNSET`` where a neighbour is unset.

    Takes the larger of the interpolants linear in ``x2`` and linear in the square root of the distance to the upper
    parabola, which follows the square-root profile of the candidates under the upper boundary.
    """
    n2 = column_values.shape[1]
    position = np.clip(position, 0.0, n2 - 1)
    below = np.minimum(np.floor(position).astype(int), n2 - 2)
    weight = position - below
    depth = np.sqrt(np.maximum(1 - position / (n2 - 1), 0.0))
    depth_below = np.sqrt(1 - below / (n2 - 1))
    depth_above = np.sqrt(np.maximum(1 - (below + 1) / (n2 - 1), 0.0))
    root_weight = (depth_below - depth) / (depth_below - depth_above)
    rows = np.arange(column_values.shape[0])[:, None]
    lower = column_values[rows, below]
    upper = column_values[rows, below + 1]
    result = np.maximum((1 - weight) * lower + weight * upper, (1 - root_weight) * lower + root_weight * upper)
    unset = ((lower <= 0.5 * UNSET) & (weight < 1)) | ((upper <= 0.5 * UNSET) & (weight > 0))
    return np.where(unset, UNSET, result)


def _segment_inside(y1: np.ndarray, y2: np.ndarray, z1: np.ndarray, z2: np.ndarray, eps: float) -> np.ndarray:
    """Whether segments stay under the upper parabola; the lower one is convex and never crossed."""
    d1, d2 = z1 - y1, z2 - y2
    gap0 = y2 - y1 * y1
    linear = d2 - 2 * y1 * d1
    quadratic = d1 * d1
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.clip(np.where(quadratic > 0, linear / (2 * quadratic), 0.0), 0.0, 1.0)
    peak = gap0 + s * linear - s * s * quadratic
    return peak <= eps * eps * (1 + 1e-12)


def _sweep(domain: GridDomain, values: np.ndarray, window: int, pinned: np.ndarray) -> np.ndarray:
    """One Jacobi sweep: every point takes the best midpoint of a chord with both ends on the grid columns."""
    eps = domain.eps
    x1, x2 = domain.x1, domain.x2
    n1, n2 = values.shape
    scale = (n2 - 1) / (eps * eps)
    updated = values.copy()
    # vertical chords
    for k in range(1, n2 // 2 + 1):
        mid = 0.5 * (values[:, : n2 - 2 * k] + values[:, 2 * k :])
        valid = (values[:, : n2 - 2 * k] > 0.5 * UNSET) & (values[:, 2 * k :] > 0.5 * UNSET)
        target = updated[:, k : n2 - k]
        updated[:, k : n2 - k] = np.where(valid, np.maximum(target, mid), target)
    for d in range(1, min(window, (n1 - 1) // 2) + 1):
        centre = slice(d, n1 - d)
        left, right = slice(0, n1 - 2 * d), slice(2 * d, n1)
        point2 = x2[centre]
        y1 = x1[left][:, None]
        z1 = x1[right][:, None]
        for k in range(n2):
            y2 = x2[left][:, k : k + 1]
            z2 = 2 * point2 - y2
            position = (z2 - z1 * z1) * scale
            reachable = (position >= -1e-9) & (position <= n2 - 1 + 1e-9)
            shape = point2.shape
            inside = _segment_inside(
                np.broadcast_to(y1, shape), np.broadcast_to(y2, shape), np.broadcast_to(z1, shape), z2, eps
            )
            far = _interpolate(values[right], position)
            near = values[left][:, k : k + 1]
            ok = reachable & inside & (far > 0.5 * UNSET) & (near > 0.5 * UNSET)
            candidate = 0.5 * (near + far)
            target = updated[centre]
            updated[centre] = np.where(ok, np.maximum(target, candidate), target)
    return np.where(pinned, values, updated)


def chord_reach(domain: GridDomain) -> int:
    """Half-width in columns of the widest chord of the strip; a chord of radius ``eps`` spans at most ``2 eps``."""
    return max(int(math.floor(domain.eps / domain.step * (1 + 1e-9))), 1)


def _iterate(
    domain: GridDomain, values: np.ndarray, window: int, pinned: np.ndarray, tol: float
) -> Tuple[np.ndarray, int, bool]:
    for sweep in range(1, settings.oracle_max_sweeps + 1):
        updated = _sweep(domain, values, window, pinned)
        was_set = values > 0.5 * UNSET
        newly_set = (updated > 0.5 * UNSET) & ~was_set
        change = np.where(was_set, updated - values, 0.0)
        values = updated
        if not newly_set.any() and float(np.max(change)) < tol:
            return values, sweep, True
    return values, settings.oracle_max_sweeps, False


def grid_minimal_concave(
    bf: BoundaryFunction,
    eps: float,
    grid: GridConfig,
    edge_values: Optional[Callable[[float, float], float]] = None,
    tol_grid: float = TOL_GRID,
) -> GridValues:
    """
    Value iteration from ``V = f`` on the lower parabola and unset elsewhere, until no update exceeds
    ``tol_grid * (1 + max |f|)``.

    :param edge_values: Values pinned on the first and last column, typically a candidate's; without them the edge
        columns are only reached by vertical chords and the nearest columns are truncated
    """
    domain = GridDomain.from_config(eps, grid)
    n1, n2 = domain.shape
    boundary = np.array([float(bf(float(t))) for t in domain.x1])
    tol = tol_grid * (1 + float(np.max(np.abs(boundary))))
    values = np.full((n1, n2), UNSET)
    values[:, 0] = boundary
    pinned = np.zeros((n1, n2), dtype=bool)
    pinned[:, 0] = True
    caveats: List[str] = []
    if edge_values is not None:
        for i in (0, n1 - 1):
            for j in range(n2):
                values[i, j] = edge_values(float(domain.x1[i]), float(domain.x2[i, j]))
            pinned[i, :] = True
        caveats.append("edge columns pinned to the supplied values")
    else:
        caveats.append("edge columns truncated: only chords inside the grid are used")
    window = grid.window or chord_reach(domain)
    values, sweeps, converged = _iterate(domain, values, window, pinned, tol)
    if not converged:
        logger.warning(f"Oracle did not converge with window {window} after {sweeps} sweeps; doubling the window")
        window *= 2
        values, more, converged = _iterate(domain, values, window, pinned, tol)
        sweeps += more
        if not converged:
            raise NoConvergence(f"Oracle did not converge after {sweeps} sweeps with window {window}")
    logger.info(f"Oracle converged after {sweeps} sweeps on a {n1}x{n2} grid")
    result = np.where(values > 0.5 * UNSET, values, np.nan)
    return GridValues(domain, result, sweeps, window, tol, caveats)


@define(frozen=True)
class Comparison:
    max_abs: float
    max_rel: float
    location: Tuple[float, float]
    points: int

    def as_dict(self) -> dict:
        return {
            "max_abs": self.max_abs,
            "max_rel": self.max_rel,
            "location": list(self.location),
            "points": self.points,
        }


def compare(bc: BellmanCandidate, grid_values: GridValues, edge_columns: int = EDGE_COLUMNS) -> Comparison:
    """
    Deviation of the oracle from a candidate over the interior points, away from the truncated edge columns and the
    upper parabola.
    """
    if not math.isclose(bc.eps, grid_values.eps, rel_tol=1e-12):
        raise BellmanValueError(f"Candidate radius {bc.eps} differs from the grid radius {grid_values.eps}")
    domain = grid_values.domain
    n1, n2 = domain.shape
    max_abs = max_rel = 0.0
    location = (math.nan, math.nan)
    count = 0
    for i in range(edge_columns, n1 - edge_columns):
        for j in range(n2 - 1):
            value = grid_values.values[i, j]
            if math.isnan(value):
                continue
            x1, x2 = float(domain.x1[i]), float(domain.x2[i, j])
            reference = bc(x1, x2)
            deviation = abs(value - reference)
            count += 1
            if deviation > max_abs:
                max_abs, location = deviation, (x1, x2)
            max_rel = max(max_rel, deviation / (1 + abs(reference)))
    return Comparison(max_abs, max_rel, location, count)
