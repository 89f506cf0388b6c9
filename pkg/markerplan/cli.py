"""
Command line interface: the 'markerplan' executable and its
subcommands (calibrate, plan, check, sweep, demo-1d).

Exit status: 0 success, 2 invalid input (files, formats, configuration,
plans not matching their structure), 3 planning infeasible, 4 plan check
failure (or worked example not reproduced), 5 calibration
conservativeness floor not reached.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

from .calibration import CalibrationSettings, calibrate, check_floor
from .camera import CameraModel
from .config import Config
from .error_info import exit_code, get_error_info
from .errors import CheckFailureError
from .fiducial_sim import SimulationSettings
from .log import Level, set_logging
from .noise_model import CertaintyParams, CoverageSettings, EigenvaluePredictor, coverage_radius_3d
from .plan_checker import CheckerSettings, check_plan, sweep_radius
from .planner import Plan, PlannerSettings, initial_markers, plan_assembly
from .reference_1d import World1D, check_reference, format_solution, solve_1d
from .settings import load_settings, read_int, section
from .structure import Structure

_logger = logging.getLogger(__name__)


def _settings(args: argparse.Namespace) -> Config:
    vars = Path(args.vars) if args.vars else None
    return load_settings(args.config, vars=vars)


def _warn_above_coverage(
    pred: EigenvaluePredictor, params: CertaintyParams, config: Config, m: int, r_m: float
) -> None:
    r_cov = coverage_radius_3d(pred, params, m, CoverageSettings.from_config(config))
    if r_m > r_cov:
        _logger.warning(
            f"\tplanning radius {r_m:.3f} m above the coverage radius {r_cov:.3f} m "
            f"of {m} markers"
        )


def cmd_calibrate(args: argparse.Namespace, invocation: List[str]) -> int:
    override: Dict[str, Dict] = {"calibration": {}, "simulation": {}}
    for key in ("n_rho", "n_theta", "n_phi"):
        value = getattr(args, key)
        if value is not None:
            override["calibration"][key] = value
    if args.trials is not None:
        override["simulation"]["trials"] = args.trials
    if args.sigma_px is not None:
        override["simulation"]["sigma_px"] = args.sigma_px
    if args.workers is not None:
        override["simulation"]["workers"] = args.workers
    vars = Path(args.vars) if args.vars else None
    config = load_settings(args.config, vars=vars, override=override)
    camera = CameraModel.load(args.camera) if args.camera else CameraModel()
    settings = CalibrationSettings.from_config(config)
    result = calibrate(
        camera,
        settings,
        SimulationSettings.from_config(config),
        CertaintyParams.from_config(config),
        args.seed,
        dataset_path=args.dataset,
        invocation=invocation,
    )
    result.predictor.save(args.out, invocation)
    _logger.info(f"\tpredictor written to {args.out}")
    if args.report:
        result.report.save(args.report)
        _logger.info(f"\tconservativeness report written to {args.report}")
    _logger.info(
        f"\tconservative fraction {result.report.frac_conservative:.4f}, "
        f"worst gap {result.report.worst_gap:.4f}"
    )
    check_floor(result.report, settings.conservative_floor)
    return 0


def cmd_plan(args: argparse.Namespace, invocation: List[str]) -> int:
    config = _settings(args)
    structure = Structure.load(args.structure)
    markers = initial_markers(structure, args.markers)
    checker = CheckerSettings.from_config(config)
    requirement = checker.requirement(structure.unit_m)
    if args.predictor:
        pred = EigenvaluePredictor.load(args.predictor)
        params = CertaintyParams.from_config(config)
        _warn_above_coverage(pred, params, config, args.markers, args.radius * structure.unit_m)
        requirement = checker.requirement(structure.unit_m, pred, params)
    plan = plan_assembly(
        structure,
        markers,
        args.radius,
        PlannerSettings.from_config(config),
        args.seed,
        requirement,
    )
    plan.save(args.out, invocation)
    _logger.info(
        f"\tplan written to {args.out}: {len(plan)} step(s), "
        f"clusters per layer: {plan.clusters_per_layer}"
    )
    return 0


def cmd_check(args: argparse.Namespace, invocation: List[str]) -> int:
    override: Dict[str, Dict] = {"certainty": {}}
    if args.alpha is not None:
        override["certainty"]["alpha_m"] = args.alpha
    if args.c_min is not None:
        override["certainty"]["c_min"] = args.c_min
    vars = Path(args.vars) if args.vars else None
    config = load_settings(args.config, vars=vars, override=override)
    report = check_plan(
        Structure.load(args.structure),
        Plan.load(args.plan),
        EigenvaluePredictor.load(args.predictor),
        CertaintyParams.from_config(config),
        CheckerSettings.from_config(config),
        invocation,
    )
    report.save(args.out)
    _logger.info(f"\treport written to {args.out}, P(success)={report.p_success:.4f}")
    if not report.all_ok:
        first = report.failures[0]
        raise CheckFailureError(
            first.idx,
            len(report.failures),
            f"{first.op} with {len(first.visible)} marker(s) in sight, C*={first.c_star:.4f}",
        )
    return 0


def cmd_sweep(args: argparse.Namespace, invocation: List[str]) -> int:
    config = _settings(args)
    structure = Structure.load(args.structure)
    workers = args.workers
    if workers is None:
        workers = read_int(section(config, "sweep"), "workers", "sweep")
    table = sweep_radius(
        structure,
        args.radii,
        initial_markers(structure, args.markers),
        EigenvaluePredictor.load(args.predictor),
        CertaintyParams.from_config(config),
        PlannerSettings.from_config(config),
        CheckerSettings.from_config(config),
        args.seed,
        workers,
    )
    table.write_csv(args.out, invocation)
    _logger.info(f"\tsweep table written to {args.out}")
    if args.svg:
        table.write_svg(args.svg)
        _logger.info(f"\tsweep plot written to {args.svg}")
    return 0


def cmd_demo_1d(args: argparse.Namespace, invocation: List[str]) -> int:
    solution = solve_1d(World1D())
    for line in format_solution(solution):
        print(line)
    check_reference(solution)
    return 0


def _add_common(parser: argparse.ArgumentParser, seed: bool) -> None:
    parser.add_argument("--config", type=Path, default=None, help="settings (toml file)")
    parser.add_argument(
        "--vars", type=Path, default=None, help="variables for rendering the settings (toml file)"
    )
    if seed:
        parser.add_argument("--seed", type=int, required=True, help="random seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="markerplan",
        description="assembly planning with movable fiducial markers",
    )
    parser.add_argument("--verbose", action="store_true", help="debug level logs")
    parser.add_argument("--logfile", type=Path, default=None, help="also log to this file")
    subparsers = parser.add_subparsers(dest="command", required=True)

    calibrate_parser = subparsers.add_parser(
        "calibrate", help="fit a noise predictor on simulated detections"
    )
    _add_common(calibrate_parser, seed=True)
    calibrate_parser.add_argument("--camera", type=Path, default=None, help="camera (json file)")
    calibrate_parser.add_argument("--n-rho", dest="n_rho", type=int, default=None)
    calibrate_parser.add_argument("--n-theta", dest="n_theta", type=int, default=None)
    calibrate_parser.add_argument("--n-phi", dest="n_phi", type=int, default=None)
    calibrate_parser.add_argument("--trials", type=int, default=None)
    calibrate_parser.add_argument("--sigma-px", dest="sigma_px", type=float, default=None)
    calibrate_parser.add_argument("--workers", type=int, default=None)
    calibrate_parser.add_argument(
        "--dataset", type=Path, default=None, help="training dataset output"
    )
    calibrate_parser.add_argument(
        "--report", type=Path, default=None, help="evaluation report output"
    )
    calibrate_parser.add_argument("--out", type=Path, required=True, help="predictor output")
    calibrate_parser.set_defaults(func=cmd_calibrate)

    plan_parser = subparsers.add_parser("plan", help="plan the assembly of a structure")
    _add_common(plan_parser, seed=True)
    plan_parser.add_argument("--structure", type=Path, required=True)
    plan_parser.add_argument("--markers", type=int, default=3, help="number of markers")
    plan_parser.add_argument(
        "--radius", type=float, required=True, help="cluster radius (structure units)"
    )
    plan_parser.add_argument(
        "--predictor",
        type=Path,
        default=None,
        help="keep actions within its domain and above c_min, warn above its coverage",
    )
    plan_parser.add_argument("--out", type=Path, required=True, help="plan output")
    plan_parser.set_defaults(func=cmd_plan)

    check_parser = subparsers.add_parser("check", help="check a plan")
    _add_common(check_parser, seed=False)
    check_parser.add_argument("--structure", type=Path, required=True)
    check_parser.add_argument("--plan", type=Path, required=True)
    check_parser.add_argument("--predictor", type=Path, required=True)
    check_parser.add_argument("--alpha", type=float, default=None, help="acceptance radius (m)")
    check_parser.add_argument("--c-min", dest="c_min", type=float, default=None)
    check_parser.add_argument("--out", type=Path, required=True, help="report output")
    check_parser.set_defaults(func=cmd_check)

    sweep_parser = subparsers.add_parser("sweep", help="plan and check for several radii")
    _add_common(sweep_parser, seed=True)
    sweep_parser.add_argument("--structure", type=Path, required=True)
    sweep_parser.add_argument("--radii", type=float, nargs="+", required=True)
    sweep_parser.add_argument("--markers", type=int, default=3)
    sweep_parser.add_argument("--predictor", type=Path, required=True)
    sweep_parser.add_argument("--workers", type=int, default=None)
    sweep_parser.add_argument("--out", type=Path, required=True, help="csv output")
    sweep_parser.add_argument("--svg", type=Path, default=None, help="plot output")
    sweep_parser.set_defaults(func=cmd_sweep)

    demo_parser = subparsers.add_parser("demo-1d", help="one dimensional worked example")
    demo_parser.set_defaults(func=cmd_demo_1d)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    arguments = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(arguments)
    set_logging(True, args.logfile, Level.debug if args.verbose else Level.info)
    invocation = ["markerplan"] + arguments
    func: Callable[[argparse.Namespace, List[str]], int] = args.func
    try:
        return func(args, invocation)
    except Exception as e:
        _logger.error(f"\t{get_error_info(e)}")
        return exit_code(e)


if __name__ == "__main__":
    sys.exit(main())
