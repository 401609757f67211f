"""
The ``bellman`` command line: analyze a boundary function, evolve its foliation, evaluate the Bellman function,
synthesize optimizers, verify a candidate and export pictures.
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple, TypeVar

import attr
import numpy as np

from bellman import __version__, cache, settings
from bellman.boundary_function import BoundaryFunction, check_conditions
from bellman.config import RunConfig, load_run_config
from bellman.constants import ExitCode
from bellman.evolution import EvolutionTrace, evolve
from bellman.exceptions import (
    BellmanConfigException,
    BellmanError,
    BellmanValueError,
    Divergent,
    IterationCapExceeded,
    OutOfRange,
)
from bellman.export import format_float, read_points, write_csv, write_json, write_svg
from bellman.foliation import BellmanCandidate, FoliationGraph, assemble, check_admissible, minimize_variant
from bellman.foliation.candidate import edge_table
from bellman.foliation.properties import property_suite, random_points
from bellman.log import get_logger
from bellman.optimizers import Optimizer, OptimizerReport, optimizer_at, verify_optimizer
from bellman.oracle import compare, grid_minimal_concave

logger = get_logger(__name__)

T = TypeVar("T")
R = TypeVar("R")

DEFAULT_ORACLE_TOL = 1e-2
VERIFY_OPTIMIZER_POINTS = 20
SWEEP_SAMPLE_POINTS = 9


@dataclass
class Run:
    """
    A loaded run: the configuration, the boundary function the foliation is built for and the sign relating its
    Bellman function to the requested one.
    """

    config: RunConfig
    bf: BoundaryFunction
    sign: float
    out_dir: Path
    use_cache: bool
    trace: Optional[EvolutionTrace] = None

    @property
    def eps(self) -> float:
        if self.config.eps is None:
            raise BellmanConfigException("This command needs a radius: set eps in the run document or pass --eps")
        return self.config.eps

    @property
    def eps_target(self) -> float:
        target = self.config.eps_target
        if target is None:
            raise BellmanConfigException("This command needs a radius: set eps in the run document or pass --eps")
        return target


def _parallel_map(function: Callable[[T], R], items: Sequence[T], jobs: int) -> List[R]:
    if jobs <= 1 or len(items) <= 1:
        return [function(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as executor:
        return list(executor.map(function, items))


def load_run(args: argparse.Namespace) -> Run:
    config = load_run_config(
        args.config,
        eps=args.eps,
        out_dir=args.out,
        jobs=args.jobs,
        minimize=True if args.minimize else None,
    )
    bf = BoundaryFunction.from_document(config.boundary_function)
    if config.minimize:
        bf = minimize_variant(bf)
    if getattr(args, "points", None) is not None:
        path = Path(args.points)
        if not path.exists():
            raise BellmanConfigException(f"File not found: {path}")
        config.points = read_points(path)
    return Run(
        config=config,
        bf=bf,
        sign=-1.0 if config.minimize else 1.0,
        out_dir=Path(config.out_dir),
        use_cache=not args.no_cache,
    )


def obtain_trace(run: Run) -> EvolutionTrace:
    """The evolution up to the largest radius of the run, from the cache when possible."""
    if run.trace is not None:
        return run.trace
    tolerances = run.config.tolerances.as_dict()
    key = cache.create_cache_key(run.bf, run.eps_target, tolerances)
    trace = cache.load_trace(key, run.bf) if run.use_cache else None
    if trace is None:
        trace = evolve(run.bf, run.eps_target)
        if run.use_cache and cache.is_cache_enabled():
            cache.store_trace(trace, key)
    run.trace = trace
    return trace


def graph_at(run: Run, eps: float) -> FoliationGraph:
    trace = obtain_trace(run)
    try:
        return trace.graph_at(eps)
    except OutOfRange:
        if all(sample.chain is not None for segment in trace.segments for sample in segment.samples):
            raise
        logger.info(f"Cached trace has no sample at eps={eps:.10g}; evolving again")
        run.trace = evolve(run.bf, run.eps_target)
        return run.trace.graph_at(eps)


def candidate_at(run: Run, eps: float) -> BellmanCandidate:
    return assemble(graph_at(run, eps), glue_tol=run.config.tolerances.tol_glue)


def _evaluate(run: Run, bc: BellmanCandidate, points: Iterable[Tuple[float, float]]) -> List[Tuple[float, ...]]:
    def row(point: Tuple[float, float]) -> Tuple[float, ...]:
        value, d1, d2 = bc.eval(*point)
        return point[0], point[1], run.sign * value, run.sign * d1, run.sign * d2

    return _parallel_map(row, list(points), run.config.jobs)


def _default_points(eps: float) -> List[Tuple[float, float]]:
    return [(float(x1), float(x1 * x1 + 0.5 * eps * eps)) for x1 in np.linspace(-2.0, 2.0, SWEEP_SAMPLE_POINTS)]


def _write_trace(run: Run, trace: EvolutionTrace) -> None:
    write_csv(
        run.out_dir / "criticals.csv",
        ["eps", "kinds", "subjects", "essential"],
        (
            (point.eps, "+".join(point.kinds), "+".join(point.subjects), int(point.essential))
            for point in trace.critical_points
        ),
    )
    write_csv(
        run.out_dir / "segments.csv",
        ["eps_lo", "eps_hi", "samples"],
        ((segment.eps_lo, segment.eps_hi, len(segment.samples)) for segment in trace.segments),
    )
    if trace.segments:
        write_json(run.out_dir / "graph.json", trace.final_graph.as_dict())


def cmd_analyze(run: Run) -> int:
    report = check_conditions(run.bf, run.config.boundary_function.eps_inf)
    content: Dict[str, Any] = {
        "name": run.config.boundary_function.name,
        "eps_inf": format_float(run.config.boundary_function.eps_inf),
        "minimize": run.config.minimize,
        "version": __version__,
        **report.as_dict(),
    }
    write_json(run.out_dir / "analysis.json", content)
    for entry in report.entries:
        print(f"{'ok  ' if entry.passed else 'FAIL'} {entry.name}: {entry.message or format_float(entry.value)}")
    return ExitCode.OK if report.passed else ExitCode.CONDITION_FAILURE


def cmd_evolve(run: Run) -> int:
    try:
        trace = obtain_trace(run)
    except IterationCapExceeded as error:
        if error.trace is not None:
            _write_trace(run, error.trace)
        logger.error(str(error))
        return ExitCode.ITERATION_CAP
    _write_trace(run, trace)
    if run.config.sweep is not None:
        rows: List[Tuple[float, ...]] = []
        for eps in run.config.sweep.values():
            bc = candidate_at(run, eps)
            points = [p for p in run.config.points if p[0] ** 2 <= p[1] <= p[0] ** 2 + eps**2] or _default_points(eps)
            rows.extend((eps, *row) for row in _evaluate(run, bc, points))
        write_csv(run.out_dir / "sweep.csv", ["eps", "x1", "x2", "B", "d1", "d2"], rows)
    print(f"{len(trace.critical_points)} critical points up to eps={format_float(trace.eps_target)}")
    for point in trace.critical_points:
        marker = "essential" if point.essential else "inessential"
        print(f"  eps={format_float(point.eps)} {'+'.join(point.kinds)} ({marker})")
    return ExitCode.OK


def cmd_eval(run: Run) -> int:
    if not run.config.points:
        raise BellmanConfigException("No points to evaluate: set points in the run document or pass --points")
    bc = candidate_at(run, run.eps)
    write_csv(run.out_dir / "eval.csv", ["x1", "x2", "B", "d1", "d2"], _evaluate(run, bc, run.config.points))
    return ExitCode.OK


def _optimizer_reports(
    run: Run, bc: BellmanCandidate, points: Sequence[Tuple[float, float]]
) -> List[Tuple[Optimizer, OptimizerReport]]:
    tolerances = run.config.tolerances

    def certify(point: Tuple[float, float]) -> Tuple[Optimizer, OptimizerReport]:
        phi = optimizer_at(bc, *point)
        report = attr.evolve(
            verify_optimizer(phi, point, bc),
            tol_moment=tolerances.tol_opt_moment,
            tol_value=tolerances.tol_opt_value,
            tol_bmo=tolerances.tol_opt_bmo,
        )
        return phi, report

    return _parallel_map(certify, list(points), run.config.jobs)


def cmd_optimize(run: Run) -> int:
    if not run.config.points:
        raise BellmanConfigException("No points to optimize at: set points in the run document or pass --points")
    bc = candidate_at(run, run.eps)
    results = _optimizer_reports(run, bc, run.config.points)
    write_json(
        run.out_dir / "optimizers.json",
        {
            "eps": run.eps,
            "minimize": run.config.minimize,
            "optimizers": [
                {"x1": report.x1, "x2": report.x2, "optimizer": phi.as_dict()} for phi, report in results
            ],
        },
    )
    write_csv(
        run.out_dir / "optimizer_report.csv",
        ["x1", "x2", "mean_error", "square_error", "value_error", "bmo", "passed"],
        (
            (r.x1, r.x2, r.mean_error, r.square_error, r.value_error, r.bmo, int(r.passed))
            for _, r in results
        ),
    )
    failed = [report for _, report in results if not report.passed]
    for report in failed:
        logger.warning(f"Optimizer at ({report.x1:.8g}, {report.x2:.8g}) fails its identities")
    return ExitCode.VERIFICATION_FAILURE if failed else ExitCode.OK


def cmd_verify(run: Run, trace_file: Optional[str] = None, oracle_tol: float = DEFAULT_ORACLE_TOL) -> int:
    if trace_file is not None:
        try:
            run.trace = cache.read_trace_file(Path(trace_file), run.bf)
        except BellmanConfigException as error:
            logger.error(str(error))
            write_json(run.out_dir / "verify.json", {"passed": False, "trace": str(error)})
            return ExitCode.VERIFICATION_FAILURE
    graph = graph_at(run, run.eps)
    bc = assemble(graph, glue_tol=run.config.tolerances.tol_glue)
    content: Dict[str, Any] = {"eps": run.eps, "graph": graph.summary()}
    passed = True

    admissibility = check_admissible(graph)
    content["admissible"] = admissibility.passed
    content["admissibility_failures"] = [
        {"subject": entry.subject, "check": entry.check, "value": entry.value, "message": entry.message}
        for entry in admissibility.failures()
    ]
    passed &= admissibility.passed

    properties = property_suite(bc)
    content["properties"] = properties.as_dict()
    passed &= properties.passed

    points = list(run.config.points) or random_points(bc, VERIFY_OPTIMIZER_POINTS, np.random.default_rng(4))
    reports = [report for _, report in _optimizer_reports(run, bc, points)]
    content["optimizers"] = [report.as_dict() for report in reports]
    passed &= all(report.passed for report in reports)

    if run.config.grid is not None:
        grid_values = grid_minimal_concave(
            run.bf, run.eps, run.config.grid, edge_values=bc, tol_grid=run.config.tolerances.tol_grid
        )
        comparison = compare(bc, grid_values)
        content["oracle"] = {**comparison.as_dict(), "tolerance": oracle_tol, "caveats": grid_values.caveats}
        if not comparison.max_abs <= oracle_tol:
            logger.warning(f"Oracle deviates by {comparison.max_abs:.3e} at {comparison.location}")
            passed = False
        write_csv(run.out_dir / "oracle.csv", ["x1", "x2", "V", "B", "diff"], grid_values.to_rows(bc))

    content["passed"] = bool(passed)
    write_json(run.out_dir / "verify.json", content)
    print(f"verification {'passed' if passed else 'FAILED'} at eps={format_float(run.eps)}")
    return ExitCode.OK if passed else ExitCode.VERIFICATION_FAILURE


def cmd_export(run: Run) -> int:
    graph = graph_at(run, run.eps)
    bc = assemble(graph, glue_tol=run.config.tolerances.tol_glue)
    write_svg(run.out_dir / "foliation.svg", bc)
    write_json(run.out_dir / "graph.json", graph.as_dict())
    for edge in graph.chordal_edges():
        rows = edge_table(graph, edge).to_rows()
        write_csv(run.out_dir / f"chords_{edge.id}.csv", ["l", "a", "b", "D_L", "D_R"], rows)
    return ExitCode.OK


def _add_common_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="Run document or bare boundary-function document (JSON)")
    parser.add_argument("--eps", type=float, default=None, help="BMO radius, overrides the run document")
    parser.add_argument("--out", default=None, help="Output directory, created if missing")
    parser.add_argument("--jobs", type=int, default=None, help="Worker threads for point evaluation")
    parser.add_argument("--minimize", action="store_true", help="Compute the lower Bellman function")
    parser.add_argument("--no-cache", action="store_true", help="Neither read nor write the trace cache")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for info, -vv for debug messages")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bellman", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    for name, text in (
        ("analyze", "Essential roots and regularity conditions of a boundary function"),
        ("evolve", "Evolve the foliation up to the target radius and list its critical points"),
        ("eval", "Evaluate the Bellman function and its gradient at points"),
        ("optimize", "Synthesize and certify optimizers at points"),
        ("verify", "Run the property suite, optimizer identities and the grid oracle"),
        ("export", "Write an SVG picture of the foliation and its chord tables"),
    ):
        command = commands.add_parser(name, help=text, description=text)
        _add_common_arguments(command)
        if name in ("evolve", "eval", "optimize", "verify"):
            command.add_argument("--points", default=None, help="CSV file with x1 and x2 columns")
        if name == "verify":
            command.add_argument("--trace", default=None, help="Verify a stored evolution trace file")
            command.add_argument(
                "--oracle-tol", type=float, default=DEFAULT_ORACLE_TOL, help="Largest accepted oracle deviation"
            )
    return parser


def _configure_logging(verbose: int) -> None:
    level = logging.WARNING if verbose == 0 else logging.INFO if verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s:%(name)s:%(message)s")


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)
    logger.debug(f"bellman {__version__}, cache {'on' if settings.enable_cache else 'off'} in {settings.cache_dir}")
    try:
        run = load_run(args)
        if args.command == "analyze":
            return int(cmd_analyze(run))
        if args.command == "evolve":
            return int(cmd_evolve(run))
        if args.command == "eval":
            return int(cmd_eval(run))
        if args.command == "optimize":
            return int(cmd_optimize(run))
        if args.command == "verify":
            return int(cmd_verify(run, args.trace, args.oracle_tol))
        return int(cmd_export(run))
    except IterationCapExceeded as error:
        logger.error(str(error))
        return int(ExitCode.ITERATION_CAP)
    except Divergent as error:
        logger.error(f"Condition failure: {error}")
        return int(ExitCode.CONDITION_FAILURE)
    except (BellmanConfigException, BellmanValueError) as error:
        logger.error(f"Input error: {error}")
        print(f"error: {error}", file=sys.stderr)
        return int(ExitCode.INPUT_ERROR)
    except BellmanError as error:
        logger.error(f"{type(error).__name__}: {error}")
        print(f"error: {error}", file=sys.stderr)
        return int(ExitCode.VERIFICATION_FAILURE)


if __name__ == "__main__":
    sys.exit(main())
