"""``m3geom``: command-line front end.

JSON reports go to stdout, CSV and OBJ files to ``--out``, log messages to
stderr. Exit codes: 0 success, 2 invalid input, 3 computation or I/O
failure, 4 failed verification.
"""
import argparse
import json
import logging
import math
import sys
from enum import Enum
from pathlib import Path
from typing import List, Optional

import numpy as np
import pandas as pd

from algebra_loader import AlgebraLoader
from conjugate_locus import ConjugateLocusCalculator, LocusFamily
from errors import ComputationError, GeometryError, ValidationError, VerificationFailure
from jacobi_fields import JacobiSolver, integrate_numeric
from locus_export import LocusExporter
from m3_geometry import (Direction, M3Params, build_algebra, direction_vector, isotropic_band,
                         scalar_invariants, theta_invariants)
from operator_space import EndOp
from osculating import OperatorCurve, rank_profile
from settings import DEFAULT_SETTINGS
from verification import VerificationSuite, run_verification

logger = logging.getLogger("m3geom")

EXIT_OK, EXIT_VALIDATION, EXIT_COMPUTATION, EXIT_VERIFY = 0, 2, 3, 4


def parse_angle(text):
    """Radians, or a multiple of π written with a ``pi`` suffix (``0.5pi``)"""
    value = text.strip().lower()
    try:
        if value.endswith("pi"):
            factor = value[:-2].strip()
            return (float(factor) if factor else 1.0) * math.pi
        return float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid angle {text!r}; use radians or a multiple like 0.5pi")


def to_jsonable(value):
    """Floats rounded to 15 significant digits, infinities as "inf" """
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, EndOp):
        return to_jsonable(value.entries)
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        if math.isnan(value):
            raise ComputationError("computation produced NaN")
        return float(f"{value:.15g}")
    return value


def emit(report):
    print(json.dumps(to_jsonable(report), indent=2, allow_nan=False))


def _params(args):
    return M3Params(args.kappa, args.tau)


def _direction(args):
    return Direction(args.theta, getattr(args, "phi", 0.0))


def cmd_info(args, settings):
    params = _params(args)
    invariants = scalar_invariants(params)
    bi_invariant = build_algebra(params).bi_invariant_extension()
    return {
        "kappa": params.kappa,
        "tau": params.tau,
        "space_type": params.space_type,
        "ricci": invariants.ricci,
        "xi_sectional_curvature": invariants.xi_sectional_curvature,
        "biinvariant_r": bi_invariant.r if bi_invariant.exists else "none",
        "fiber_length": invariants.fiber_length if invariants.fiber_length is not None else "none",
        "isotropic_band": isotropic_band(params) if isotropic_band(params) is not None else "none",
    }


def cmd_rank(args, settings):
    params, direction = _params(args), _direction(args)
    curve = OperatorCurve.for_direction(build_algebra(params), direction_vector(direction), settings=settings)
    invariants = theta_invariants(params, direction.theta)
    rank = curve.osculating_rank()
    report = {"theta": direction.theta, "phi": direction.phi, "lambda": invariants.lam,
              "mu": invariants.mu, "osculating_rank": rank}
    if rank == 2:
        fit = curve.fit_circle()
        report["circle"] = {"radius": fit.radius, "period": fit.period, "center": fit.center,
                            "spread": fit.spread}
    return report


def _point_report(point):
    return {"t": point.t, "s": point.s, "kind": point.kind, "label": point.label, "p": point.p,
            "multiplicity": point.multiplicity, "isotropic": point.is_isotropic}


def cmd_conjugate(args, settings):
    calculator = ConjugateLocusCalculator(_params(args), settings)
    direction = _direction(args)
    points = calculator.conjugate_points(direction, args.t_max)
    return {"theta": direction.theta, "phi": direction.phi, "t_max": args.t_max,
            "classification": calculator.classify_geodesic(direction.theta),
            "points": [_point_report(p) for p in points]}


def cmd_radius(args, settings):
    params = _params(args)
    calculator = ConjugateLocusCalculator(params, settings)
    family, p = calculator.first_conjugate_family()
    report = {"global_conjugate_radius": calculator.global_conjugate_radius(),
              "first_conjugate_surface": f"{family.value}({p})"}
    if args.theta is not None:
        report["theta"] = args.theta
        report["conjugate_radius"] = calculator.conjugate_radius(Direction(args.theta).theta)
    return report


def _time_grid(args):
    if args.times:
        times = np.array(sorted(args.times), dtype=float)
        if np.any(times < 0):
            raise ValidationError("times must be nonnegative")
        return times
    if args.samples < 2:
        raise ValidationError("need at least two time samples")
    return np.linspace(0.0, args.t_max, args.samples)


def cmd_jacobi(args, settings):
    params, direction = _params(args), _direction(args)
    solver = JacobiSolver(params, settings)
    xprime0 = np.array(args.xprime0, dtype=float)
    solution = solver.solve_closed_form(direction, xprime0)
    times = _time_grid(args)
    values = solution.evaluate(times)
    report = {"theta": direction.theta, "phi": direction.phi, "branch": solution.branch,
              "lambda": solution.lam, "coefficients": solution.coefficients,
              "isotropic": solver.isotropy_test(direction, xprime0).is_isotropic,
              "samples": [{"t": t, "x": x} for t, x in zip(times, values)]}
    if args.compare and times[-1] > 0:
        trajectory = integrate_numeric(solver.algebra, direction_vector(direction), xprime0,
                                       float(times[-1]), settings.rk4_step, settings)
        closed = solution.evaluate(trajectory.times)
        report["rk4_relative_error"] = trajectory.relative_error(closed)
        if args.out:
            trajectory.to_frame().to_csv(args.out, index=False, float_format="%.15g")
            report["trajectory_csv"] = str(args.out)
    if args.format == "csv":
        frame = pd.DataFrame({"t": times, "x1": values[:, 0], "x2": values[:, 1], "x3": values[:, 2]})
        frame.to_csv(sys.stdout, index=False, float_format="%.15g")
        if "rk4_relative_error" in report:
            logger.info("rk4 relative error %.3e", report["rk4_relative_error"])
        return None
    return report


def _sheet_paths(stem: Path, family, p, sheets, extension):
    name = f"{stem.name}_{family.value}_p{p}"
    if sheets == 1:
        return [stem.with_name(f"{name}.{extension}")]
    return [stem.with_name(f"{name}_sheet{k + 1}.{extension}") for k in range(sheets)]


def cmd_locus(args, settings):
    params = _params(args)
    calculator = ConjugateLocusCalculator(params, settings)
    family = LocusFamily(args.family)
    if args.out is None:
        raise ValidationError("locus needs --out (a file stem)")
    if args.format not in ("obj", "csv"):
        raise ValidationError("locus writes obj or csv")
    p_min = args.p_min
    if p_min is None:
        p_min = 0 if family is LocusFamily.S2 and not params.below_critical else 1
    if args.p_max < p_min:
        raise ValidationError("--p-max must be at least --p-min")
    if args.phi_samples < 3:
        raise ValidationError("--phi-samples must be at least 3")

    phis = np.linspace(0.0, 2.0 * math.pi, args.phi_samples, endpoint=False)
    segments = calculator.theta_segments(args.theta_samples)
    exporter = LocusExporter()
    stem = Path(args.out)
    stem.parent.mkdir(parents=True, exist_ok=True)
    files = []
    for p in range(p_min, args.p_max + 1):
        paths = _sheet_paths(stem, family, p, len(segments), args.format)
        for segment, path in zip(segments, paths):
            surface = calculator.sample_locus(family, p, segment, phis)
            if args.format == "obj":
                exporter.write_obj(surface, path)
            else:
                exporter.write_locus_csv(surface, path)
            files.append({"family": family, "p": p, "path": str(path),
                          "theta_range": [segment[0], segment[-1]],
                          "quadric_residual": surface.quadric_residual()})
    return {"kappa": params.kappa, "tau": params.tau, "files": files}


def cmd_fcurve(args, settings):
    calculator = ConjugateLocusCalculator(_params(args), settings)
    frame = calculator.f_curve(Direction(args.theta).theta, args.s_max, args.samples)[["s", "f_theta_s"]]
    if args.out is None:
        if args.format == "json":
            return {"theta": args.theta, "s_max": args.s_max, "values": frame.to_dict(orient="records")}
        frame.to_csv(sys.stdout, index=False, float_format="%.15g")
        return None
    exporter = LocusExporter()
    if args.format == "json":
        path = exporter.write_fcurve_json(frame, args.out)
    else:
        path = exporter.write_fcurve_csv(frame, args.out)
    return {"theta": args.theta, "s_max": args.s_max, "samples": len(frame), "path": str(path)}


def cmd_check(args, settings):
    algebra, directions = AlgebraLoader(check_jacobi=False).load_document(args.algebra)
    if not directions:
        directions = [np.linalg.solve(np.linalg.cholesky(algebra.metric_m).T, e) for e in np.eye(algebra.dim_m)]
    report = algebra.check_naturally_reductive(settings.natural_reductivity_tol)
    result = {
        "dim_m": algebra.dim_m,
        "dim_k": algebra.dim_k,
        "jacobi_identity_residual": algebra.jacobi_identity_residual(),
        "naturally_reductive": report.is_naturally_reductive,
        "max_violation": report.max_violation,
    }
    if report.is_naturally_reductive:
        profile = rank_profile(algebra, directions, settings.rank_tol, settings)
        result["osculating_ranks"] = list(profile.ranks)
        result["rank_profile"] = profile.description
        result["invariant_directions"] = algebra.invariant_directions().shape[1]
    else:
        result["osculating_ranks"] = "skipped"
    if algebra.dim_k == 1:
        bi_invariant = algebra.bi_invariant_extension()
        result["biinvariant_r"] = bi_invariant.r if bi_invariant.exists else "none"
    return result


def cmd_verify(args, settings):
    report = run_verification(args.level, settings)
    emit({"level": args.level, "checks": report.to_dict(orient="records"),
          "passed": bool(report["passed"].all())})
    VerificationSuite.raise_for_failures(report)
    return None


COMMANDS = {
    "info": cmd_info,
    "rank": cmd_rank,
    "conjugate": cmd_conjugate,
    "radius": cmd_radius,
    "jacobi": cmd_jacobi,
    "locus": cmd_locus,
    "fcurve": cmd_fcurve,
    "check": cmd_check,
    "verify": cmd_verify,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="m3geom", description="Jacobi fields and conjugate loci of M3(kappa, tau).")
    parser.add_argument("--verbose", action="store_true", help="debug logging on stderr")
    parser.add_argument("--quiet", action="store_true", help="only errors on stderr")
    parser.add_argument("--rank-tol", type=float, default=None, dest="rank_tol",
                        help=f"osculating rank tolerance (default: {DEFAULT_SETTINGS.rank_tol:g})")
    parser.add_argument("--step", type=float, default=None,
                        help=f"RK4 step (default: {DEFAULT_SETTINGS.rk4_step:g})")
    subparsers = parser.add_subparsers(dest="command", required=True)

    space = argparse.ArgumentParser(add_help=False)
    space.add_argument("--kappa", type=float, required=True)
    space.add_argument("--tau", type=float, required=True)
    angles = argparse.ArgumentParser(add_help=False)
    angles.add_argument("--theta", type=parse_angle, required=True, help="radians, or e.g. 0.5pi")
    angles.add_argument("--phi", type=parse_angle, default=0.0)

    subparsers.add_parser("info", parents=[space], help="invariants of the space")
    subparsers.add_parser("rank", parents=[space, angles], help="osculating rank and circle data")
    conjugate = subparsers.add_parser("conjugate", parents=[space, angles], help="conjugate points up to t-max")
    conjugate.add_argument("--t-max", type=float, default=25.0, dest="t_max")

    radius = subparsers.add_parser("radius", parents=[space], help="conjugate radii")
    radius.add_argument("--theta", type=parse_angle, default=None)

    jacobi = subparsers.add_parser("jacobi", parents=[space, angles], help="closed-form Jacobi field")
    jacobi.add_argument("--xprime0", type=float, nargs=3, required=True, metavar=("X1", "X2", "X3"))
    jacobi.add_argument("--t", type=float, nargs="+", dest="times", default=None)
    jacobi.add_argument("--t-max", type=float, default=10.0, dest="t_max")
    jacobi.add_argument("--samples", type=int, default=11)
    jacobi.add_argument("--compare", action="store_true", help="also integrate with RK4 and report the error")
    jacobi.add_argument("--out", default=None, help="CSV path for the RK4 trajectory (with --compare)")
    jacobi.add_argument("--format", choices=["json", "csv"], default="json", help="report or sample table")

    locus = subparsers.add_parser("locus", parents=[space], help="tangent conjugate locus surfaces")
    locus.add_argument("--family", choices=[f.value for f in LocusFamily], default="S1")
    locus.add_argument("--p-min", type=int, default=None, dest="p_min")
    locus.add_argument("--p-max", type=int, default=2, dest="p_max")
    locus.add_argument("--theta-samples", type=int, default=41, dest="theta_samples")
    locus.add_argument("--phi-samples", type=int, default=48, dest="phi_samples")
    locus.add_argument("--format", choices=["obj", "csv"], default="obj")
    locus.add_argument("--out", default=None, help="output file stem")

    fcurve = subparsers.add_parser("fcurve", parents=[space], help="f_theta(s) samples")
    fcurve.add_argument("--theta", type=parse_angle, required=True)
    fcurve.add_argument("--s-max", type=float, default=8.0 * math.pi, dest="s_max")
    fcurve.add_argument("--samples", type=int, default=1001)
    fcurve.add_argument("--out", default=None)
    fcurve.add_argument("--format", choices=["csv", "json"], default="csv")

    check = subparsers.add_parser("check", help="inspect a JSON algebra")
    check.add_argument("algebra", help="path to the algebra JSON document")

    verify = subparsers.add_parser("verify", help="run the verification suite")
    verify.add_argument("--level", choices=["quick", "full"], default="quick")
    return parser


def configure_logging(verbose=False, quiet=False):
    level = logging.DEBUG if verbose else logging.ERROR if quiet else logging.WARNING
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_VALIDATION
    configure_logging(args.verbose, args.quiet)

    try:
        settings = DEFAULT_SETTINGS.with_overrides(rank_tol=args.rank_tol, rk4_step=args.step)
        if settings.rank_tol <= 0 or settings.rk4_step <= 0:
            raise ValidationError("--rank-tol and --step must be positive")
        report = COMMANDS[args.command](args, settings)
        if report is not None:
            emit(report)
    except VerificationFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except ValidationError as exc:
        logger.debug("validation failure", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ComputationError, OSError) as exc:
        logger.debug("computation failure", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COMPUTATION
    except GeometryError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COMPUTATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
