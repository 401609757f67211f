from __future__ import annotations

import sys
from enum import Enum, IntEnum

DEFAULT_BELLMAN_CACHE_DIR_NAME = "bellman"
ENV_PREFIX = "BELLMAN__CORE__"
CACHE_FORMAT_VERSION = "2.0"
TRACE_FILE_SUFFIX = ".msgpack"

# Tolerances. Run documents may override the ones listed in ``bellman.config.Tolerances``.
TOL_CUP = 1e-11
TOL_BALANCE = 1e-9
TOL_ROOT = 1e-13
TOL_EVENT = 1e-7
TOL_BISECT = 1e-10
TOL_GLUE = 1e-8
TOL_JUNCTION = 1e-12
TOL_OPT_MOMENT = 1e-9
TOL_OPT_VALUE = 1e-7
TOL_OPT_BMO = 1e-8
TOL_GRID = 1e-9
# Smallest relative tolerance scipy.optimize.brentq accepts.
ROOT_RTOL = 4 * sys.float_info.epsilon

CHORD_STEP = 1e-3
CUP_BIRTH_FACTOR = 1e-4
ROOT_SAMPLES_PER_UNIT = 64
ROOT_MIN_SAMPLES = 256
ROOT_MAX_SAMPLES = 20000
TAIL_SCAN_POINTS = 16
BALANCE_SCAN_POINTS = 96
MAX_EPS_STEP = 0.05
SIMPLE_PICTURE_HALVINGS = 60
GAUSS_NODES = 16
SVG_SAMPLES = 64
FLOAT_DIGITS = 17


class Side(Enum):
    """
    Orientation of a tangent family or of a force.

    Right tangents at ``u`` run from ``(u, u^2)`` to the upper parabola at ``u - eps``, left tangents to ``u + eps``.
    """

    LEFT = "left"
    RIGHT = "right"

    @property
    def sign(self) -> int:
        return 1 if self is Side.RIGHT else -1

    @property
    def opposite(self) -> Side:
        return Side.LEFT if self is Side.RIGHT else Side.RIGHT


class RootKind(Enum):
    """
    Kind of an essential root of f''': ``C`` where f''' changes from + to -, ``V`` where it changes from - to +.
    """

    C = "c"
    V = "v"


class TableKind(Enum):
    """
    Seed of a chordal domain table.
    """

    CUP = "cup"
    OVER_CHORD = "over_chord"
    OVER_HULL = "over_hull"


class StopReason(Enum):
    """
    Why the continuation of a chordal domain table stopped.
    """

    L_MAX = "l_max"
    DIFFERENTIAL = "differential"
    STALL = "stall"


class KnotKind(Enum):
    """
    Figures of the chain of knots the evolution works with.
    """

    NEG_INF = "neg_inf"
    POS_INF = "pos_inf"
    FULL_CHORDAL = "full_chordal"
    MULTICUP = "multicup"
    ANGLE = "angle"
    TROLLEYBUS_R = "trolleybus_r"
    TROLLEYBUS_L = "trolleybus_l"
    BIRDIE = "birdie"


class VertexKind(Enum):
    """
    Vertex types of the foliation graph.
    """

    ANGLE = "angle"
    TROLLEYBUS_R = "trolleybus_R"
    TROLLEYBUS_L = "trolleybus_L"
    BIRDIE = "birdie"
    MULTICUP = "multicup"
    MULTITROLLEYBUS_R = "multitrolleybus_R"
    MULTITROLLEYBUS_L = "multitrolleybus_L"
    MULTIBIRDIE = "multibirdie"
    CLOSED_MULTICUP = "closed_multicup"
    FICTIOUS_1 = "fictious_1"
    FICTIOUS_2 = "fictious_2"
    FICTIOUS_3 = "fictious_3"
    FICTIOUS_4 = "fictious_4"
    FICTIOUS_5 = "fictious_5"


class EdgeKind(Enum):
    """
    Edge types of the foliation graph.
    """

    TANGENT_R = "tangent_R"
    TANGENT_L = "tangent_L"
    CHORDAL = "chordal"


class FigureKind(Enum):
    """
    Figures a Bellman candidate is assembled from.
    """

    TANGENTS_R = "tangents_R"
    TANGENTS_L = "tangents_L"
    CHORDAL = "chordal"
    ANGLE = "angle"
    TROLLEYBUS_R = "trolleybus_R"
    TROLLEYBUS_L = "trolleybus_L"
    BIRDIE = "birdie"
    MULTICUP = "multicup"
    CLOSED_MULTICUP = "closed_multicup"
    SINGLE_TANGENT = "single_tangent"


class EventKind(Enum):
    """
    Monitored quantities of the evolution. Each one is positive while the chain stays valid.
    """

    EDGE_LENGTH_ZERO = "edge_length_zero"
    DIFFERENTIAL_ZERO = "differential_zero"
    TAIL_MEETS_FIGURE = "tail_meets_figure"
    MULTICUP_FILLS = "multicup_fills"
    TROLLEYBUS_BASE_ZERO = "trolleybus_base_zero"
    ANGLE_HITS_CHORD_END = "angle_hits_chord_end"
    ANGLE_ESCAPES = "angle_escapes"
    BIRDIE_SPLITS = "birdie_splits"
    SOLVE_FAILED = "solve_failed"


class ExitCode(IntEnum):
    """
    Exit codes of the ``bellman`` command line.
    """

    OK = 0
    CONDITION_FAILURE = 2
    INPUT_ERROR = 3
    VERIFICATION_FAILURE = 4
    ITERATION_CAP = 5
