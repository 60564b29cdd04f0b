"""In-process verification suites behind ``m3geom verify``.

Every check returns its worst error; a check passes when that error does not
exceed its tolerance. Count-type checks report the number of failures with
tolerance 0.
"""
import logging
import math
import time
from typing import Callable, List, Tuple

import numpy as np
import pandas as pd

from conjugate_locus import ConjugateLocusCalculator, LocusFamily
from errors import GeometryError, ValidationError, VerificationFailure
from jacobi_fields import Branch, JacobiSolver, integrate_numeric
from m3_geometry import (Direction, M3Params, SpaceType, build_algebra, direction_vector, m3_structure,
                         operator_data, rotation, scalar_invariants, theta_invariants)
from operator_space import adjoint_action
from osculating import OperatorCurve
from settings import DEFAULT_SETTINGS, NumericalSettings

logger = logging.getLogger(__name__)

KAPPAS = (-4.0, -1.0, 0.0, 1.0, 4.0)
TAUS = (0.5, 1.0, 2.0)
PARAMETER_GRID = tuple(M3Params(k, t) for k in KAPPAS for t in TAUS if k != t * t)
RANK_THETAS = (0.1, math.pi / 4, math.pi / 2, 2 * math.pi / 3, math.pi - 0.1)
CONJUGATE_CASES = ((0.0, 1.0, math.pi / 4), (4.0, 1.0, math.pi / 2), (1.0, 2.0, math.pi / 3))
LEVELS = ("quick", "full")


class VerificationSuite:
    def __init__(self, level="quick", settings: NumericalSettings = DEFAULT_SETTINGS, seed=20240):
        if level not in LEVELS:
            raise ValidationError(f"unknown verification level {level!r}; use one of {', '.join(LEVELS)}")
        self.level = level
        self.settings = settings
        self.seed = seed
        self.full = level == "full"

    def checks(self) -> List[Tuple[str, float, Callable[[], float]]]:
        return [
            ("natural_reductivity", 1e-12, self.check_natural_reductivity),
            ("jacobi_identity", 1e-12, self.check_jacobi_identity),
            ("osculating_rank", 0.0, self.check_osculating_rank),
            ("circle_formula", 1e-10, self.check_circle_formula),
            ("circle_fit", 1e-8, self.check_circle_fit),
            ("circle_center", 1e-10, self.check_circle_center),
            ("derivative_recursions", 1e-10, self.check_derivative_recursions),
            ("closed_form_vs_rk4", 1e-6, self.check_closed_form_vs_rk4),
            ("conjugate_points_vs_scan", 1e-6, self.check_conjugate_points),
            ("isotropy_classification", 0.0, self.check_isotropy_classification),
            ("conjugate_radii", 1e-6, self.check_radii),
            ("branch_residual", 1e-13, self.check_branch_residual),
            ("no_conjugate_regime", 0.0, self.check_no_conjugate_regime),
            ("locus_quadrics", 1e-9, self.check_locus_quadrics),
            ("branch_limits", 1e-4, self.check_branch_limits),
            ("bi_invariance", 1e-12, self.check_bi_invariance),
            ("equivariance", 1e-10, self.check_equivariance),
            ("scalar_invariants", 1e-12, self.check_scalar_invariants),
        ]

    def run(self) -> pd.DataFrame:
        rows = []
        for name, tolerance, check in self.checks():
            started = time.perf_counter()
            try:
                error = float(check())
            except GeometryError as exc:
                logger.error("check %s raised: %s", name, exc)
                error = math.inf
            seconds = time.perf_counter() - started
            passed = error <= tolerance
            log = logger.info if passed else logger.error
            log("%-26s %s  error=%.3e  tol=%.1e  (%.2fs)", name, "ok" if passed else "FAILED", error, tolerance, seconds)
            rows.append({"name": name, "passed": passed, "max_error": error,
                         "tolerance": tolerance, "seconds": seconds})
        return pd.DataFrame(rows, columns=["name", "passed", "max_error", "tolerance", "seconds"])

    @staticmethod
    def raise_for_failures(report: pd.DataFrame):
        failed = report.loc[~report["passed"], "name"].tolist()
        if failed:
            raise VerificationFailure(failed)

    # reductive structure

    def check_natural_reductivity(self):
        return max(build_algebra(p).check_naturally_reductive().max_violation for p in PARAMETER_GRID)

    def check_jacobi_identity(self):
        return max(build_algebra(p).jacobi_identity_residual() for p in PARAMETER_GRID)

    def check_bi_invariance(self):
        worst = 0.0
        for params in PARAMETER_GRID:
            result = build_algebra(params).bi_invariant_extension()
            if params.below_critical:
                worst = max(worst, 0.0 if result.r is None else math.inf)
            elif result.r is None:
                worst = math.inf
            else:
                worst = max(worst, abs(result.r - 1.0 / (params.kappa - params.tau ** 2)))
        return worst

    def check_scalar_invariants(self):
        worst = 0.0
        for params in PARAMETER_GRID:
            algebra = build_algebra(params)
            invariants = scalar_invariants(params)
            worst = max(worst, float(np.max(np.abs(algebra.ricci_diagonal() - np.array(invariants.ricci)))))
            xi_plane = algebra.sectional_curvature(np.array([0.0, 0.0, 1.0]), np.array([1.0, 0.0, 0.0]))
            worst = max(worst, abs(xi_plane - invariants.xi_sectional_curvature))
            if params.space_type is SpaceType.BERGER_SPHERE:
                worst = max(worst, abs(invariants.fiber_length - 4 * math.pi * params.tau / params.kappa))
        return worst

    # osculating curves

    def _rank_cases(self):
        phis = (0.0, 1.3)
        for params in PARAMETER_GRID:
            for theta in RANK_THETAS:
                for phi in phis:
                    yield params, Direction(theta, phi)

    def check_osculating_rank(self):
        failures = 0
        for params, direction in self._rank_cases():
            curve = OperatorCurve.for_direction(build_algebra(params), direction_vector(direction), settings=self.settings)
            failures += curve.osculating_rank() != 2
        for params in PARAMETER_GRID:
            for theta in (0.0, math.pi):
                curve = OperatorCurve.for_direction(build_algebra(params), direction_vector(Direction(theta)))
                failures += curve.osculating_rank() != 0
        for tau in TAUS:
            critical = m3_structure(tau * tau, tau)
            for theta in RANK_THETAS + (0.0, math.pi):
                curve = OperatorCurve.for_direction(critical, direction_vector(Direction(theta)))
                failures += curve.osculating_rank() != 0
        return failures

    def _circle_cases(self):
        thetas = RANK_THETAS if self.full else (math.pi / 4, math.pi / 2)
        for params in PARAMETER_GRID:
            for theta in thetas:
                yield params, Direction(theta, 0.0 if self.full else 1.3)

    def check_circle_formula(self):
        worst = 0.0
        times = np.linspace(-3.0, 7.0, 100)
        for params, direction in self._circle_cases():
            curve = OperatorCurve.for_direction(build_algebra(params), direction_vector(direction))
            tau = params.tau
            first, second = curve.derivative_at_zero(1).entries, curve.derivative_at_zero(2).entries
            for t in times:
                expected = curve.base.entries + (math.sin(tau * t) * first + (1 - math.cos(tau * t)) / tau * second) / tau
                worst = max(worst, float(np.max(np.abs(curve.curve_at(t).entries - expected))))
        return worst

    def check_circle_fit(self):
        worst = 0.0
        for params, direction in self._circle_cases():
            fit = OperatorCurve.for_direction(build_algebra(params), direction_vector(direction)).fit_circle(64)
            radius = math.sqrt(2) / 2 * abs(params.tau ** 2 - params.kappa) * math.sin(direction.theta) ** 2
            period = 2 * math.pi / params.tau
            worst = max(worst, abs(fit.radius - radius) / radius, abs(fit.period - period) / period)
        return worst

    def check_circle_center(self):
        worst = 0.0
        for params, direction in self._circle_cases():
            curve = OperatorCurve.for_direction(build_algebra(params), direction_vector(direction))
            mu = theta_invariants(params, direction.theta).mu
            expected = (4 * mu - 1) * curve.generator.square().entries
            worst = max(worst, float(np.max(np.abs(curve.fit_circle(64).center.entries - expected))))
        return worst

    def check_derivative_recursions(self):
        worst = 0.0
        for params, direction in self._rank_cases():
            curve = OperatorCurve.for_direction(build_algebra(params), direction_vector(direction))
            tau2 = params.tau ** 2
            d = [curve.derivative_at_zero(i) for i in (1, 2, 3, 4)]
            worst = max(worst, (d[2] + tau2 * d[0]).norm(), (d[3] + tau2 * d[1]).norm())
        return worst

    def check_equivariance(self):
        rng = np.random.default_rng(self.seed)
        worst = 0.0
        for _ in range(100 if self.full else 20):
            params = _random_params(rng)
            theta, phi, t = rng.uniform(0.05, math.pi - 0.05), rng.uniform(0, 2 * math.pi), rng.uniform(-5, 5)
            algebra = build_algebra(params)
            direct = OperatorCurve.for_direction(algebra, direction_vector(Direction(theta, phi)))
            planar = OperatorCurve.for_direction(algebra, direction_vector(Direction(theta)))
            conjugated = adjoint_action(rotation(phi), planar.curve_at(t))
            worst = max(worst, float(np.max(np.abs(direct.curve_at(t).entries - conjugated.entries))))
            explicit = operator_data(params, Direction(theta, phi))
            worst = max(worst, float(np.max(np.abs(explicit.R.entries - direct.base.entries))))
        return worst

    # Jacobi fields and conjugate points

    def check_closed_form_vs_rk4(self):
        rng = np.random.default_rng(self.seed + 1)
        worst = 0.0
        seen = set()
        for params, direction, xprime0 in jacobi_cases(rng, 50 if self.full else 10):
            solver = JacobiSolver(params, self.settings)
            solution = solver.solve_closed_form(direction, xprime0)
            seen.add(solution.branch)
            trajectory = integrate_numeric(solver.algebra, direction_vector(direction), xprime0, 10.0,
                                           self.settings.rk4_step, self.settings)
            worst = max(worst, trajectory.relative_error(solution.evaluate(trajectory.times)))
        if seen != set(Branch):
            logger.error("closed-form cases missed branches: %s", set(Branch) - seen)
            return math.inf
        return worst

    def _conjugate_cases(self):
        for kappa, tau, theta in CONJUGATE_CASES:
            yield M3Params(kappa, tau), Direction(theta), 25.0
        yield M3Params(0.0, 2.0), Direction(0.0), 10.0

    def check_conjugate_points(self):
        worst = 0.0
        for params, direction, t_max in self._conjugate_cases():
            calculator = ConjugateLocusCalculator(params, self.settings)
            points = calculator.conjugate_points(direction, t_max)
            scanned = calculator.scan_conjugate_times(direction, t_max)
            if len(points) != len(scanned):
                logger.error("conjugate points %d vs scan %d for %s %s", len(points), len(scanned), params, direction)
                return math.inf
            for point, zero in zip(points, scanned):
                if point.multiplicity != zero.multiplicity:
                    return math.inf
                worst = max(worst, abs(point.t - zero.t))
        hopf = ConjugateLocusCalculator(M3Params(0.0, 2.0)).conjugate_points(Direction(0.0), 10.0)
        expected = [math.pi, 2 * math.pi, 3 * math.pi]
        if [p.multiplicity for p in hopf] != [2, 2, 2]:
            return math.inf
        return max(worst, max(abs(p.t - e) for p, e in zip(hopf, expected)))

    def check_isotropy_classification(self):
        failures = 0
        for params, direction, t_max in self._conjugate_cases():
            calculator = ConjugateLocusCalculator(params, self.settings)
            for point in calculator.conjugate_points(direction, t_max):
                for vector in calculator.kernel_directions(direction, point.t).T:
                    verdict = calculator.solver.isotropy_test(direction, vector)
                    failures += verdict.is_isotropic != point.is_isotropic
            algebra = build_algebra(params)
            for theta, expected in ((math.pi / 3, 1), (0.0, 0), (math.pi, 0)):
                span = np.atleast_2d(np.array(algebra.isotropy_directions(direction_vector(Direction(theta)))))
                dimension = np.linalg.matrix_rank(span, tol=1e-12) if span.size else 0
                failures += dimension != expected
        return failures

    def check_radii(self):
        worst = 0.0
        thetas = (math.pi / 6, math.pi / 3, math.pi / 2)
        grid = PARAMETER_GRID if self.full else PARAMETER_GRID[::3]
        for params in grid:
            calculator = ConjugateLocusCalculator(params, self.settings)
            for theta in thetas:
                radius = calculator.conjugate_radius(theta)
                if math.isinf(radius):
                    continue
                direction = Direction(theta)
                first = calculator.scan_conjugate_times(direction, radius * 1.05)[0]
                worst = max(worst, abs(first.t - radius))
                point = calculator.conjugate_points(direction, radius * 1.05)[0]
                if point.is_isotropic != params.below_critical:
                    logger.error("first conjugate point isotropy mismatch for %s theta=%g", params, theta)
                    return math.inf
            sweep = np.linspace(0.0, math.pi, 1001 if self.full else 201)
            infimum = min(calculator.conjugate_radius(theta) for theta in sweep)
            worst = max(worst, abs(infimum - calculator.global_conjugate_radius()))
        return worst

    def check_branch_residual(self):
        worst = 0.0
        for params in PARAMETER_GRID:
            if params.below_critical:
                continue
            calculator = ConjugateLocusCalculator(params, self.settings)
            s0 = calculator.branch_root(math.pi / 2, 0)
            if not math.pi < s0 < 2 * math.pi:
                return math.inf
            mu = theta_invariants(params, math.pi / 2).mu
            worst = max(worst, abs(math.sin(s0 / 2) - mu * s0 * math.cos(s0 / 2)))
        return worst

    def check_no_conjugate_regime(self):
        rng = np.random.default_rng(self.seed + 2)
        failures = 0
        times = np.arange(1, 50001) * 1e-3
        for _ in range(20 if self.full else 5):
            kappa, tau = rng.uniform(-4.0, -0.5), rng.uniform(0.3, 2.0)
            epsilon = math.atan(tau / math.sqrt(-kappa))
            theta = rng.uniform(epsilon, math.pi - epsilon)
            calculator = ConjugateLocusCalculator(M3Params(kappa, tau), self.settings)
            det = calculator.determinant(Direction(theta), times)
            failures += int(np.sum(det[:-1] * det[1:] < 0))
            failures += int(np.sum(np.abs(det[times > 0.1]) <= 1e-10))
        return failures

    # tangent conjugate locus

    def check_locus_quadrics(self):
        worst = 0.0
        phis = np.linspace(0, 2 * math.pi, 12, endpoint=False)
        for params in PARAMETER_GRID:
            calculator = ConjugateLocusCalculator(params, self.settings)
            surfaces = [(LocusFamily.S1, 1), (LocusFamily.S1, 2), (LocusFamily.S2, 1)]
            if not params.below_critical:
                surfaces.append((LocusFamily.S2, 0))
            for segment in calculator.theta_segments(9 if self.full else 5):
                for family, p in surfaces:
                    surface = calculator.sample_locus(family, p, segment, phis)
                    worst = max(worst, surface.quadric_residual() / max(1.0, float(np.max(surface.s_values)) ** 2))
                    if params.space_type is SpaceType.HEISENBERG and family is LocusFamily.S1:
                        plane = 2 * p * math.pi / params.tau
                        worst = max(worst, float(np.max(np.abs(np.abs(surface.samples[..., 2]) - plane))))
                    if family is LocusFamily.S2:
                        for theta, s in zip(segment, surface.s_values):
                            window = calculator.branch_window(theta, p)
                            if window is not None and not window[0] < s < window[1]:
                                return math.inf
        return worst

    def check_branch_limits(self):
        worst = 0.0
        for params in PARAMETER_GRID:
            calculator = ConjugateLocusCalculator(params, self.settings)
            for p in (1, 2):
                limit = 2 * p * math.pi if params.below_critical else 2 * (p + 1) * math.pi
                worst = max(worst, abs(calculator.branch_root(1e-5, p) - limit))
        # s_1(π/2) approaches 3π from above as κ grows
        distances = []
        for scale in (10.0, 100.0, 1000.0, 10000.0):
            calculator = ConjugateLocusCalculator(M3Params(1.0 + scale, 1.0), self.settings)
            distances.append(calculator.branch_root(math.pi / 2, 1) - 3 * math.pi)
        if any(d <= 0 for d in distances) or any(b >= a for a, b in zip(distances, distances[1:])):
            return math.inf
        return worst


def _random_params(rng):
    while True:
        kappa, tau = rng.uniform(-4.0, 4.0), rng.uniform(0.3, 2.0)
        if abs(kappa - tau * tau) > 1e-3:
            return M3Params(kappa, tau)


def jacobi_cases(rng, count):
    """Seeded (params, direction, X'(0)) triples cycling through all solution branches"""
    cases = []
    for index in range(count):
        kind = index % 5
        phi = rng.uniform(0.0, 2 * math.pi)
        tau = rng.uniform(0.5, 2.0)
        if kind == 0:
            while True:
                kappa, theta = rng.uniform(-1.0, 4.0), rng.uniform(0.1, math.pi - 0.1)
                params = M3Params(kappa, tau) if kappa != tau * tau else None
                if params and theta_invariants(params, theta).lam > 0.05:
                    break
        elif kind == 1:
            params, theta = M3Params(rng.uniform(0.2, 4.0), tau), math.pi / 2
            if params.kappa == tau * tau:
                params = M3Params(params.kappa + 0.1, tau)
        elif kind == 2:
            params, theta = M3Params(0.0, tau), math.pi / 2
        elif kind == 3:
            params, theta = M3Params(rng.uniform(-4.0, -0.5), tau), math.pi / 2 + rng.uniform(-0.2, 0.2)
        else:
            params, theta = _random_params(rng), (0.0 if index % 2 else math.pi)
        cases.append((params, Direction(theta, phi), rng.standard_normal(3)))
    return cases


def run_verification(level="quick", settings: NumericalSettings = DEFAULT_SETTINGS):
    suite = VerificationSuite(level, settings)
    report = suite.run()
    logger.info("%d/%d checks passed", int(report["passed"].sum()), len(report))
    return report
