"""Module that contains all Bellman config classes."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import field
from pathlib import Path
from typing import Annotated, Any, Dict, List, Literal, Optional, Tuple

from pydantic import BeforeValidator, ValidationError, dataclasses

from bellman.constants import (
    TOL_BALANCE,
    TOL_CUP,
    TOL_EVENT,
    TOL_GLUE,
    TOL_GRID,
    TOL_OPT_BMO,
    TOL_OPT_MOMENT,
    TOL_OPT_VALUE,
)
from bellman.exceptions import BellmanConfigException
from bellman.log import get_logger

logger = get_logger(__name__)


def _parse_extended_real(value: Any) -> Any:
    if isinstance(value, str):
        text = value.strip().lower()
        if text in ("inf", "+inf", "infinity", "+infinity"):
            return math.inf
        if text in ("-inf", "-infinity"):
            return -math.inf
    return value


def _encode_extended_real(value: float) -> float | str:
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return value


ExtendedReal = Annotated[float, BeforeValidator(_parse_extended_real)]


def _version_of(content: dict[str, Any]) -> str:
    return hashlib.sha256(json.dumps(content, sort_keys=True).encode()).hexdigest()


@dataclasses.dataclass
class ExpTermDocument:
    a: float
    b: float


@dataclasses.dataclass
class TrigTermDocument:
    a: float
    b: float
    c: float = 0.0


@dataclasses.dataclass
class PieceDocument:
    """
    One piece of a boundary function, ``poly`` holds ascending coefficients.

    :param lo: Left end of the piece, ``"-inf"`` for the first piece
    :param hi: Right end of the piece, ``"inf"`` for the last piece
    :param poly: Polynomial coefficients, constant term first
    :param exp: Terms ``a * exp(b t)``
    :param trig: Terms ``a * cos(b t + c)``
    """

    lo: ExtendedReal
    hi: ExtendedReal
    poly: List[float] = field(default_factory=list)
    exp: List[ExpTermDocument] = field(default_factory=list)
    trig: List[TrigTermDocument] = field(default_factory=list)

    def as_dict(self) -> dict[str, Any]:
        return {
            "lo": _encode_extended_real(self.lo),
            "hi": _encode_extended_real(self.hi),
            "poly": list(self.poly),
            "exp": [{"a": term.a, "b": term.b} for term in self.exp],
            "trig": [{"a": term.a, "b": term.b, "c": term.c} for term in self.trig],
        }


@dataclasses.dataclass
class RootDocument:
    kind: Literal["c", "v"]
    lo: ExtendedReal
    hi: ExtendedReal


@dataclasses.dataclass
class BoundaryFunctionDocument:
    """
    Boundary-function document.

    :param pieces: Pieces partitioning the real line, in increasing order
    :param eps_inf: Summability radius, the Bellman function is built for ``eps < eps_inf``
    :param roots_override: Optional list of essential roots of f''' replacing the sign analysis
    :param name: Label used in reports and exported files
    """

    pieces: List[PieceDocument]
    eps_inf: ExtendedReal
    roots_override: Optional[List[RootDocument]] = None
    name: str = ""

    def __post_init__(self) -> None:
        self.validate_pieces()
        if not self.eps_inf > 0:
            raise BellmanConfigException(f"eps_inf must be positive, got {self.eps_inf}")

    def validate_pieces(self) -> None:
        if not self.pieces:
            raise BellmanConfigException("A boundary function needs at least one piece.")
        if self.pieces[0].lo != -math.inf or self.pieces[-1].hi != math.inf:
            raise BellmanConfigException("The pieces of a boundary function must cover the whole real line.")
        for left, right in zip(self.pieces, self.pieces[1:]):
            if left.hi != right.lo:
                raise BellmanConfigException(f"Pieces are not contiguous at {left.hi} and {right.lo}.")
        for piece in self.pieces:
            if not piece.lo < piece.hi:
                raise BellmanConfigException(f"Empty piece [{piece.lo}, {piece.hi}].")

    def as_dict(self) -> dict[str, Any]:
        content: dict[str, Any] = {
            "pieces": [piece.as_dict() for piece in self.pieces],
            "eps_inf": _encode_extended_real(self.eps_inf),
            "name": self.name,
        }
        if self.roots_override is not None:
            content["roots_override"] = [
                {"kind": root.kind, "lo": _encode_extended_real(root.lo), "hi": _encode_extended_real(root.hi)}
                for root in self.roots_override
            ]
        return content

    @property
    def version(self) -> str:
        return _version_of(self.as_dict())


@dataclasses.dataclass
class SweepConfig:
    start: float
    stop: float
    samples: int = 8

    def __post_init__(self) -> None:
        if not 0 < self.start <= self.stop or self.samples < 1:
            raise BellmanConfigException(f"Invalid eps sweep from {self.start} to {self.stop} ({self.samples} samples)")

    def values(self) -> list[float]:
        if self.samples == 1:
            return [self.stop]
        step = (self.stop - self.start) / (self.samples - 1)
        return [self.start + i * step for i in range(self.samples)]


@dataclasses.dataclass
class GridConfig:
    """
    Grid of the value-iteration oracle.

    :param x1_min: Left end of the x1 range
    :param x1_max: Right end of the x1 range
    :param n1: Number of columns
    :param n2: Number of rows per column, from the lower to the upper parabola
    :param window: Column half-width of the chord stencils. Defaults to the widest chord the strip holds
    """

    x1_min: float = -4.0
    x1_max: float = 4.0
    n1: int = 200
    n2: int = 40
    window: Optional[int] = None

    def __post_init__(self) -> None:
        if not self.x1_min < self.x1_max:
            raise BellmanConfigException("Grid x1 range is empty.")
        if self.n1 < 8 or self.n2 < 3:
            raise BellmanConfigException(f"Grid {self.n1}x{self.n2} is too small.")


@dataclasses.dataclass
class Tolerances:
    tol_cup: float = TOL_CUP
    tol_balance: float = TOL_BALANCE
    tol_event: float = TOL_EVENT
    tol_glue: float = TOL_GLUE
    tol_grid: float = TOL_GRID
    tol_opt_moment: float = TOL_OPT_MOMENT
    tol_opt_value: float = TOL_OPT_VALUE
    tol_opt_bmo: float = TOL_OPT_BMO

    def __post_init__(self) -> None:
        for name, value in self.as_dict().items():
            if not value > 0:
                raise BellmanConfigException(f"Tolerance {name} must be positive, got {value}")

    def as_dict(self) -> dict[str, float]:
        return {
            field.name: getattr(self, field.name)
            # Look like the __dataclass_fields__ attribute is not recognized by mypy
            for field in self.__dataclass_fields__.values()  # type: ignore[attr-defined]
        }


@dataclasses.dataclass
class RunConfig:
    """
    Self-describing configuration of one ``bellman`` run.

    :param boundary_function: The boundary-function document
    :param eps: Radius of the run. Required by every command except ``analyze``
    :param sweep: Optional radii sweep, evaluated by ``evolve``
    :param points: Bellman points for ``eval`` and ``optimize``
    :param grid: Grid of the oracle used by ``verify``
    :param out_dir: Directory receiving the exported files
    :param minimize: Compute the lower Bellman function instead of the upper one
    :param jobs: Worker threads for point evaluation and optimizer synthesis
    :param tolerances: Tolerance overrides
    :param source: Path the document was read from, if any
    """

    boundary_function: BoundaryFunctionDocument
    eps: Optional[float] = None
    sweep: Optional[SweepConfig] = None
    points: List[Tuple[float, float]] = field(default_factory=list)
    grid: Optional[GridConfig] = None
    out_dir: str = "out"
    minimize: bool = False
    jobs: int = 1
    tolerances: Tolerances = field(default_factory=Tolerances)
    source: Optional[str] = None

    def __post_init__(self) -> None:
        self.validate_eps()
        if self.jobs < 1:
            raise BellmanConfigException(f"jobs must be at least 1, got {self.jobs}")

    def validate_eps(self) -> None:
        eps_inf = self.boundary_function.eps_inf
        for eps in self.radii():
            if not 0 < eps < eps_inf:
                raise BellmanConfigException(f"eps={eps} must lie in (0, eps_inf={eps_inf})")

    def radii(self) -> list[float]:
        values = [] if self.eps is None else [self.eps]
        if self.sweep is not None:
            values.extend(self.sweep.values())
        return values

    @property
    def eps_target(self) -> float | None:
        radii = self.radii()
        return max(radii) if radii else None

    @property
    def version(self) -> str:
        content: Dict[str, Any] = {
            "boundary_function": self.boundary_function.as_dict(),
            "minimize": self.minimize,
            "tolerances": self.tolerances.as_dict(),
        }
        return _version_of(content)


def _read_json(path: Path) -> Any:
    try:
        return json.loads(path.read_text())
    except FileNotFoundError as error:
        raise BellmanConfigException(f"File not found: {path}") from error
    except json.JSONDecodeError as error:
        raise BellmanConfigException(f"Malformed JSON in {path}: line {error.lineno} column {error.colno}: {error.msg}")


def parse_boundary_function_document(content: Any) -> BoundaryFunctionDocument:
    """
    Validate a decoded boundary-function JSON document.
    """
    if not isinstance(content, dict):
        raise BellmanConfigException("A boundary-function document must be a JSON object.")
    try:
        return BoundaryFunctionDocument(**content)
    except ValidationError as error:
        raise BellmanConfigException(f"Invalid boundary-function document: {error}") from error
    except (TypeError, ValueError) as error:
        raise BellmanConfigException(f"Invalid boundary-function document: {error}") from error


def load_boundary_function_document(path: str | Path) -> BoundaryFunctionDocument:
    return parse_boundary_function_document(_read_json(Path(path)))


def load_run_config(path: str | Path, **overrides: Any) -> RunConfig:
    """
    Load a run document, or a bare boundary-function document (recognized by its ``pieces`` key).

    A run document refers to its boundary function either inline or by a path relative to the run document.
    Keyword overrides (typically command line options) replace the document's values when they are not None.
    """
    path = Path(path)
    content = _read_json(path)
    if not isinstance(content, dict):
        raise BellmanConfigException(f"{path} must contain a JSON object.")

    if "pieces" in content:
        run: dict[str, Any] = {"boundary_function": content}
    else:
        run = dict(content)
        reference = run.get("boundary_function")
        if isinstance(reference, str):
            run["boundary_function"] = _read_json(path.parent / reference)
        elif reference is None:
            raise BellmanConfigException(f"{path} does not define a boundary_function.")

    sweep = run.get("sweep")
    if isinstance(sweep, dict) and "from" in sweep:
        sweep = dict(sweep)
        sweep["start"] = sweep.pop("from")
        sweep["stop"] = sweep.pop("to")
        run["sweep"] = sweep

    run.update({key: value for key, value in overrides.items() if value is not None})
    run["boundary_function"] = parse_boundary_function_document(run["boundary_function"])
    run["source"] = str(path)
    logger.debug(f"Loaded run configuration from {path}")
    try:
        return RunConfig(**run)
    except ValidationError as error:
        raise BellmanConfigException(f"Invalid run document {path}: {error}") from error
    except (TypeError, ValueError) as error:
        raise BellmanConfigException(f"Invalid run document {path}: {error}") from error
