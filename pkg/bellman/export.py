"""
Writers of the files produced by the command line: CSV tables, JSON documents and SVG pictures of foliations.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Any, Iterable, List, Sequence, Tuple

import jinja2
import numpy as np

from bellman.candidates import ChordalFigure, LinearityFigure, TangentsFigure, upper_point
from bellman.constants import FLOAT_DIGITS, SVG_SAMPLES, FigureKind, Side
from bellman.exceptions import BellmanConfigException
from bellman.foliation import BellmanCandidate
from bellman.log import get_logger

logger = get_logger(__name__)

SVG_WIDTH = 960
SVG_HEIGHT = 540
SVG_MARGIN = 24
EXTREMALS_PER_FIGURE = 12

_environment = jinja2.Environment(
    loader=jinja2.PackageLoader("bellman", "templates"),
    autoescape=jinja2.select_autoescape(["svg", "j2"]),
    trim_blocks=True,
    lstrip_blocks=True,
)


def format_float(value: float) -> str:
    if isinstance(value, float) and math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return f"{value:.{FLOAT_DIGITS}g}"


def _cell(value: Any) -> Any:
    if isinstance(value, (float, np.floating)):
        return format_float(float(value))
    return value


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    """Write rows with floats printed to 17 significant digits, creating the parent directory."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(value) for value in row])
    logger.debug(f"Wrote {path}")
    return path


def write_json(path: Path, content: Any) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(content, indent=2, sort_keys=True, default=_cell) + "\n")
    logger.debug(f"Wrote {path}")
    return path


class _Frame:
    """Maps Bellman points to SVG coordinates."""

    def __init__(self, x1_min: float, x1_max: float, eps: float) -> None:
        self.x1_min, self.x1_max = x1_min, x1_max
        self.x2_min = 0.0 if x1_min <= 0 <= x1_max else min(x1_min**2, x1_max**2)
        self.x2_max = max(x1_min**2, x1_max**2) + eps * eps
        self.sx = (SVG_WIDTH - 2 * SVG_MARGIN) / (x1_max - x1_min)
        self.sy = (SVG_HEIGHT - 2 * SVG_MARGIN) / max(self.x2_max - self.x2_min, 1e-12)

    def __call__(self, x1: float, x2: float) -> Tuple[float, float]:
        return (
            round(SVG_MARGIN + (x1 - self.x1_min) * self.sx, 3),
            round(SVG_HEIGHT - SVG_MARGIN - (x2 - self.x2_min) * self.sy, 3),
        )

    def clip(self, value: float) -> float:
        return min(max(value, self.x1_min), self.x1_max)

    def points(self, pairs: Iterable[Tuple[float, float]]) -> str:
        return " ".join(f"{x},{y}" for x, y in (self(x1, x2) for x1, x2 in pairs))


def _parabola(lo: float, hi: float, lift: float = 0.0) -> List[Tuple[float, float]]:
    return [(float(t), float(t * t + lift)) for t in np.linspace(lo, hi, SVG_SAMPLES)]


def _view(bc: BellmanCandidate) -> Tuple[float, float]:
    eps = bc.eps
    marks: List[float] = []
    for figure in bc.figures:
        if isinstance(figure, TangentsFigure):
            marks.extend(value for value in (figure.lo, figure.hi) if math.isfinite(value))
        elif isinstance(figure, ChordalFigure):
            marks.extend((float(figure.table.left[-1]), float(figure.table.right[-1])))
        else:
            region = figure.region
            marks.extend(
                value
                for value in (region.right_lo, region.right_hi, region.left_lo, region.left_hi)
                if math.isfinite(value)
            )
    if not marks:
        return -3.0, 3.0
    return min(marks) - 3 * eps, max(marks) + 3 * eps


def _linearity_outline(figure: LinearityFigure, frame: _Frame) -> List[Tuple[float, float]]:
    eps = figure.eps
    region = figure.region
    kind = figure.figure_kind
    if kind is FigureKind.CLOSED_MULTICUP and region.ceiling is not None:
        lo, hi = region.ceiling
        return _parabola(lo, hi)
    if kind is FigureKind.SINGLE_TANGENT:
        u = region.right_lo if math.isfinite(region.right_lo) else region.left_lo
        side = Side.RIGHT if math.isfinite(region.right_lo) else Side.LEFT
        return [(u, u * u), upper_point(u, side, eps)]
    if kind is FigureKind.MULTICUP:
        lo = region.left_lo if math.isfinite(region.left_lo) else frame.x1_min
        hi = region.right_hi if math.isfinite(region.right_hi) else frame.x1_max
        upper_lo = lo + eps if math.isfinite(region.left_lo) else lo
        upper_hi = hi - eps if math.isfinite(region.right_hi) else hi
        return _parabola(lo, hi) + _parabola(upper_hi, upper_lo, eps * eps)
    a = region.right_lo if math.isfinite(region.right_lo) else region.left_lo
    b = region.left_hi if math.isfinite(region.left_hi) else region.right_hi
    outline: List[Tuple[float, float]] = []
    top_left = a - eps if kind in (FigureKind.ANGLE, FigureKind.TROLLEYBUS_R, FigureKind.BIRDIE) else a + eps
    top_right = b + eps if kind in (FigureKind.ANGLE, FigureKind.TROLLEYBUS_L, FigureKind.BIRDIE) else b - eps
    outline.append((a, a * a))
    if b != a:
        outline.append((b, b * b))
    return outline + _parabola(top_right, top_left, eps * eps)


def _shapes(bc: BellmanCandidate, frame: _Frame) -> dict[str, List[dict[str, str]]]:
    eps = bc.eps
    chords: List[dict[str, str]] = []
    tangents: List[dict[str, str]] = []
    regions: List[dict[str, str]] = []
    for figure in bc.figures:
        if isinstance(figure, ChordalFigure):
            table = figure.table
            lengths = np.linspace(figure.l_lo, figure.l_hi, EXTREMALS_PER_FIGURE)
            for length in lengths:
                index = int(np.searchsorted(table.lengths, length, side="right")) - 1
                index = min(max(index, 0), len(table) - 1)
                a, b = float(table.left[index]), float(table.right[index])
                chords.append({"id": figure.ident, "points": frame.points([(a, a * a), (b, b * b)])})
        elif isinstance(figure, TangentsFigure):
            lo, hi = frame.clip(figure.lo), frame.clip(figure.hi)
            side = figure.slope.side
            for u in np.linspace(lo, hi, EXTREMALS_PER_FIGURE):
                top = upper_point(float(u), side, eps)
                tangents.append(
                    {
                        "id": figure.ident,
                        "side": "right" if side is Side.RIGHT else "left",
                        "points": frame.points([(float(u), float(u * u)), top]),
                    }
                )
        else:
            outline = _linearity_outline(figure, frame)
            regions.append({"id": figure.ident, "kind": figure.kind.value, "points": frame.points(outline)})
    return {"chords": chords, "tangents": tangents, "regions": regions}


def render_svg(bc: BellmanCandidate) -> str:
    """
    SVG picture of a candidate's foliation: both parabolas, chords, tangents sampled per family and filled linearity
    domains.
    """
    x1_min, x1_max = _view(bc)
    frame = _Frame(x1_min, x1_max, bc.eps)
    template = _environment.get_template("foliation.svg.j2")
    return template.render(
        width=SVG_WIDTH,
        height=SVG_HEIGHT,
        eps=format_float(bc.eps),
        summary=bc.graph.summary(),
        lower=frame.points(_parabola(x1_min, x1_max)),
        upper=frame.points(_parabola(x1_min, x1_max, bc.eps**2)),
        **_shapes(bc, frame),
    )


def write_svg(path: Path, bc: BellmanCandidate) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_svg(bc))
    logger.info(f"Wrote foliation picture {path}")
    return path


def read_points(path: Path) -> List[Tuple[float, float]]:
    """Bellman points from a CSV file with ``x1`` and ``x2`` columns."""
    with path.open(newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or not {"x1", "x2"} <= set(reader.fieldnames):
            raise BellmanConfigException(f"{path} must have x1 and x2 columns")
        try:
            return [(float(row["x1"]), float(row["x2"])) for row in reader]
        except ValueError as error:
            raise BellmanConfigException(f"Malformed point in {path}: {error}") from error
