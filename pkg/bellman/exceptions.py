"""Contains exceptions that Bellman uses"""

from __future__ import annotations

from typing import Any


class BellmanError(Exception):
    """Base class of every error raised by Bellman."""


class BellmanValueError(BellmanError, ValueError):
    """Raised when an argument is outside the domain of an operation."""


class BellmanConfigException(BellmanError):
    """Raised when a boundary-function or run document is malformed."""


class NonAlternatingSigns(BellmanValueError):
    """Raised when the sign pattern of f''' cannot be split into alternating essential roots."""


class DegenerateTransform(BellmanValueError):
    """Raised when an affine change of the boundary function is not invertible."""


class Divergent(BellmanError):
    """Raised when an exponentially weighted integral of f''' does not converge."""


class SeedInvalid(BellmanValueError):
    """Raised when a chordal domain seed does not satisfy the conditions it is grown under."""


class ContinuationStall(BellmanError):
    """Raised when chordal domain continuation fails at the minimum step."""


class OutOfRange(BellmanValueError):
    """Raised when a chord length is outside a chordal domain table."""


class OutOfDomain(BellmanValueError):
    """Raised when a force is evaluated outside its domain."""


class BracketInvalid(BellmanValueError):
    """Raised when a balance equation bracket is empty or outside the forces' domains."""


class Unbalanced(BellmanValueError):
    """Raised when the slopes at an angle vertex violate the balance relation."""


class OutsideFigure(BellmanValueError):
    """Raised when a point is evaluated in a figure that does not contain it."""


class OutsideStrip(BellmanValueError):
    """Raised when a point is not in the parabolic strip."""


class GlueFailure(BellmanError):
    """Raised when two adjacent figures do not glue into a C1 function."""


class EpsTooLarge(BellmanValueError):
    """Raised when the simple picture cannot be certified at the requested radius."""


class StepTooLarge(BellmanError):
    """Raised when a critical point lies inside an evolution step."""


class UnknownConfiguration(BellmanError):
    """Raised when a crash of figures does not match any concatenation rule."""


class IterationCapExceeded(BellmanError):
    """Raised when the evolution exceeds its iteration cap. The partial trace is kept on ``trace``."""

    def __init__(self, message: str, trace: Any = None) -> None:
        super().__init__(message)
        self.trace = trace


class NoConvergence(BellmanError):
    """Raised when the grid value iteration does not converge."""


class SynthesisFailure(BellmanError):
    """Raised when no optimizer can be assembled for a point."""

    def __init__(self, message: str, figure_id: str | None = None) -> None:
        super().__init__(message)
        self.figure_id = figure_id
