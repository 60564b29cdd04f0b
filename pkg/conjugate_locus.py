"""Conjugate points, conjugate radii and tangent conjugate loci of M³(κ, τ).

Off the Hopf fibres the conjugate times along γ_{u(θ,φ)} are t = s/√λ(θ)
where s > 0 is a zero of f_θ(s) = 1 − cos s − μ(θ) s sin s: the lattice
s = 2pπ (isotropic) and the roots of tan(s/2) = μ(θ) s (non-isotropic).
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import optimize

from errors import ComputationError, ValidationError
from jacobi_fields import JacobiSolver
from m3_geometry import (Direction, M3Params, SpaceType, lambda_positive_interval,
                         theta_invariants)
from operator_space import matrix_rank
from settings import DEFAULT_SETTINGS, NumericalSettings

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi


class ConjugateKind(Enum):
    ISOTROPIC_LATTICE = "IsotropicLattice"
    NON_ISOTROPIC_BRANCH = "NonIsotropicBranch"
    HOPF_FIBER = "HopfFiber"


class GeodesicClass(Enum):
    ISOTROPIC = "Isotropic"
    HAS_NON_ISOTROPIC_CONJUGATES = "HasNonIsotropicConjugates"
    HOPF_FIBER = "HopfFiber"


class LocusFamily(Enum):
    S1 = "S1"
    S2 = "S2"


@dataclass(frozen=True)
class ConjugatePoint:
    t: float
    s: float
    kind: ConjugateKind
    p: int
    multiplicity: int

    @property
    def label(self):
        return f"{self.kind.value}({self.p})"

    @property
    def is_isotropic(self):
        return self.kind is ConjugateKind.ISOTROPIC_LATTICE


@dataclass(frozen=True)
class DeterminantZero:
    t: float
    multiplicity: int


@dataclass(frozen=True, eq=False)
class LocusSurface:
    """Samples s(θ) u(θ, φ) / √λ(θ) on a (θ, φ) grid"""

    kappa: float
    tau: float
    family: LocusFamily
    p: int
    thetas: np.ndarray
    phis: np.ndarray
    s_values: np.ndarray  # one per θ
    samples: np.ndarray  # shape (len(thetas), len(phis), 3)

    def quadric_residual(self):
        """max |κ(x² + y²) + τ² z² − s²| over the grid"""
        x, y, z = self.samples[..., 0], self.samples[..., 1], self.samples[..., 2]
        value = self.kappa * (x ** 2 + y ** 2) + self.tau ** 2 * z ** 2
        return float(np.max(np.abs(value - self.s_values[:, None] ** 2)))

    def to_frame(self):
        n_theta, n_phi = len(self.thetas), len(self.phis)
        return pd.DataFrame({
            "theta": np.repeat(self.thetas, n_phi),
            "phi": np.tile(self.phis, n_theta),
            "x": self.samples[..., 0].ravel(),
            "y": self.samples[..., 1].ravel(),
            "z": self.samples[..., 2].ravel(),
            "s": np.repeat(self.s_values, n_phi),
        })


def _is_hopf_theta(theta):
    return theta == 0.0 or theta == math.pi


class ConjugateLocusCalculator:
    def __init__(self, params: M3Params, settings: NumericalSettings = DEFAULT_SETTINGS):
        self.params = params
        self.settings = settings
        self.solver = JacobiSolver(params, settings)

    # the scalar equation

    def f_theta(self, theta, s):
        """f_θ(s) = 1 − cos s − μ(θ) s sin s"""
        mu = theta_invariants(self.params, theta).mu
        s = np.asarray(s, dtype=float)
        value = 1.0 - np.cos(s) - mu * s * np.sin(s)
        return float(value) if value.ndim == 0 else value

    def f_curve(self, theta, s_max, samples=1001) -> pd.DataFrame:
        if not s_max > 0:
            raise ValidationError("s_max must be positive")
        if samples < 2:
            raise ValidationError("f-curve needs at least two samples")
        s = np.linspace(0.0, s_max, int(samples))
        return pd.DataFrame({"s": s, "f_theta_s": self.f_theta(theta, s)})

    def branch_window(self, theta, p) -> Optional[Tuple[float, float]]:
        """Bracket holding s_p(θ), or None when the branch is absent"""
        if int(p) != p or p < 0:
            raise ValidationError("branch index must be a nonnegative integer")
        p = int(p)
        if _is_hopf_theta(theta):
            return None
        invariants = theta_invariants(self.params, theta)
        if invariants.lam <= self.settings.lambda_zero_tol or invariants.mu == 0.0:
            return None
        if invariants.mu > 0:
            if p < 1:
                raise ValidationError("branch p = 0 exists only when kappa > tau^2")
            return 2 * p * math.pi, (2 * p + 1) * math.pi
        return (2 * p + 1) * math.pi, 2 * (p + 1) * math.pi

    def branch_root(self, theta, p) -> Optional[float]:
        """s_p(θ), the root of sin(s/2) − μ s cos(s/2) inside its window"""
        window = self.branch_window(theta, p)
        if window is None:
            return None
        mu = theta_invariants(self.params, theta).mu

        def pole_free(s):
            return math.sin(s / 2.0) - mu * s * math.cos(s / 2.0)

        lo, hi = window
        if pole_free(lo) * pole_free(hi) > 0:
            raise ComputationError(f"no sign change of the branch equation on [{lo:.6g}, {hi:.6g}]")
        root = optimize.bisect(pole_free, lo, hi, xtol=self.settings.bisection_xtol,
                               rtol=4.0 * np.finfo(float).eps, maxiter=self.settings.bisection_maxiter)
        logger.debug("branch root p=%d theta=%.15g: s=%.15g residual=%.2e", p, theta, root, pole_free(root))
        return float(root)

    def branch_value(self, theta, p):
        """s_p(θ), extended to the Hopf directions by its endpoint limit"""
        if _is_hopf_theta(theta):
            if p == 0 and self.params.below_critical:
                raise ValidationError("branch p = 0 exists only when kappa > tau^2")
            return TWO_PI * p if self.params.below_critical else TWO_PI * (p + 1)
        root = self.branch_root(theta, p)
        if root is None:
            raise ValidationError(f"no branch root at theta={theta!r}")
        return root

    # conjugate points along one geodesic

    def conjugate_points(self, direction: Direction, t_max) -> List[ConjugatePoint]:
        if not t_max > 0:
            raise ValidationError("t_max must be positive")
        tau = self.params.tau
        candidates = []
        if direction.is_hopf:
            p = 1
            while TWO_PI * p / tau <= t_max:
                candidates.append(ConjugatePoint(TWO_PI * p / tau, TWO_PI * p, ConjugateKind.HOPF_FIBER, p, 2))
                p += 1
            return [self._verified(direction, point) for point in candidates]

        invariants = theta_invariants(self.params, direction.theta)
        if invariants.lam <= self.settings.lambda_zero_tol:
            return []
        root_lambda = math.sqrt(invariants.lam)
        p = 1
        while TWO_PI * p / root_lambda <= t_max:
            candidates.append(ConjugatePoint(TWO_PI * p / root_lambda, TWO_PI * p,
                                             ConjugateKind.ISOTROPIC_LATTICE, p, 1))
            p += 1

        p = 0 if invariants.mu < 0 else 1
        while True:
            window = self.branch_window(direction.theta, p)
            if window is None or window[0] / root_lambda > t_max:
                break
            s = self.branch_root(direction.theta, p)
            nearest_lattice = TWO_PI * round(s / TWO_PI)
            if abs(s - nearest_lattice) < self.settings.lattice_collision_tol:
                logger.info("branch root p=%d coincides with the lattice point %.15g; dropped", p, nearest_lattice)
            elif s / root_lambda <= t_max:
                candidates.append(ConjugatePoint(s / root_lambda, s, ConjugateKind.NON_ISOTROPIC_BRANCH, p, 1))
            p += 1

        candidates.sort(key=lambda point: point.t)
        return [self._verified(direction, point) for point in candidates]

    def _verified(self, direction, point):
        matrix = self.solver.solution_matrix(direction, point.t).entries
        relative = self.singularity(matrix)
        if relative >= self.settings.conjugate_det_tol:
            raise ComputationError(f"conjugate point at t={point.t:.15g} failed re-verification "
                                   f"(singular value ratio {relative:.3e})")
        multiplicity = 3 - matrix_rank(matrix, self.settings.conjugate_rank_tol)
        if multiplicity != point.multiplicity:
            logger.warning("multiplicity at t=%.15g: expected %d, rank gives %d",
                           point.t, point.multiplicity, multiplicity)
            point = ConjugatePoint(point.t, point.s, point.kind, point.p, multiplicity)
        return point

    @staticmethod
    def singularity(matrix):
        """σ_min / σ_max of one matrix or a stack of them; zero at conjugate times"""
        singular_values = np.linalg.svd(np.asarray(matrix, dtype=float), compute_uv=False)
        largest = singular_values[..., 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(largest > 0, singular_values[..., -1] / np.where(largest > 0, largest, 1.0), 0.0)
        return float(ratio) if ratio.ndim == 0 else ratio

    def kernel_directions(self, direction: Direction, t):
        """Initial derivatives of the Jacobi fields vanishing at t (columns)"""
        matrix = self.solver.solution_matrix(direction, t).entries
        rank = matrix_rank(matrix, self.settings.conjugate_rank_tol)
        _, _, vt = np.linalg.svd(matrix)
        return vt[rank:].T

    # determinant scan oracle

    def solution_stack(self, direction: Direction, times):
        times = np.asarray(times, dtype=float)
        columns = [self.solver.solve_closed_form(direction, np.eye(3)[j]).evaluate(times) for j in range(3)]
        return np.stack(columns, axis=-1)

    def determinant(self, direction: Direction, times):
        return self.solver.determinant(direction, times)

    def scan_conjugate_times(self, direction: Direction, t_max, step=1e-3) -> List[DeterminantZero]:
        """Zeros of t -> det X(t) on (0, t_max] found by sign scanning.

        Sign changes are refined by bisection; touching zeros (the double
        zeros on the Hopf fibres) are caught as near-zero local minima of
        the singular value ratio.
        """
        if not (t_max > 0 and step > 0):
            raise ValidationError("t_max and step must be positive")
        count = int(math.ceil(t_max / step))
        times = np.linspace(step, count * step, count)
        times = times[times <= t_max + 1e-12]
        values = self.determinant(direction, times)
        relative = self.singularity(self.solution_stack(direction, times))

        def det_at(t):
            return float(self.determinant(direction, t))

        def relative_at(t):
            return self.singularity(self.solution_stack(direction, t))

        zeros = []
        for k in range(len(times) - 1):
            if values[k] == 0.0:
                zeros.append(float(times[k]))
            elif values[k] * values[k + 1] < 0:
                zeros.append(optimize.bisect(det_at, times[k], times[k + 1], xtol=1e-14,
                                             maxiter=self.settings.bisection_maxiter))
        for k in range(1, len(times) - 1):
            if relative[k] <= relative[k - 1] and relative[k] <= relative[k + 1] and relative[k] < 1e-2:
                if values[k - 1] * values[k + 1] < 0:
                    continue  # already bracketed as a sign change
                found = optimize.minimize_scalar(relative_at, bounds=(times[k - 1], times[k + 1]),
                                                 method="bounded", options={"xatol": 1e-12})
                if found.fun < self.settings.conjugate_det_tol:
                    zeros.append(float(found.x))

        result = []
        for t in sorted(zeros):
            if result and abs(t - result[-1].t) < 2 * step:
                continue
            matrix = self.solver.solution_matrix(direction, t).entries
            result.append(DeterminantZero(t, 3 - matrix_rank(matrix, self.settings.conjugate_rank_tol)))
        return result

    # radii and classification

    def conjugate_radius(self, theta) -> float:
        tau = self.params.tau
        if _is_hopf_theta(theta):
            return TWO_PI / tau
        lam = theta_invariants(self.params, theta).lam
        if lam <= self.settings.lambda_zero_tol:
            return math.inf
        if self.params.below_critical:
            return TWO_PI / math.sqrt(lam)
        return self.branch_root(theta, 0) / math.sqrt(lam)

    def global_conjugate_radius(self) -> float:
        if self.params.below_critical:
            return TWO_PI / self.params.tau
        return self.branch_root(math.pi / 2.0, 0) / math.sqrt(self.params.kappa)

    def classify_geodesic(self, theta) -> GeodesicClass:
        if not 0.0 <= theta <= math.pi:
            raise ValidationError("theta must lie in [0, pi]")
        if _is_hopf_theta(theta):
            return GeodesicClass.HOPF_FIBER
        if theta_invariants(self.params, theta).lam <= self.settings.lambda_zero_tol:
            return GeodesicClass.ISOTROPIC
        return GeodesicClass.HAS_NON_ISOTROPIC_CONJUGATES

    def first_conjugate_family(self) -> Tuple[LocusFamily, int]:
        """Which tangent surface carries the first conjugate points"""
        if self.params.below_critical:
            return LocusFamily.S1, 1
        return LocusFamily.S2, 0

    # closed geodesics on Berger spheres

    def closed_geodesic_invariant(self, theta, length) -> float:
        """(l/2π)(τ² − κ) cos θ; the geodesic closes up iff this is rational"""
        if self.params.space_type is not SpaceType.BERGER_SPHERE:
            raise ValidationError("closed geodesic invariant needs a Berger sphere (kappa > 0)")
        if not 0.0 < theta < math.pi:
            raise ValidationError("theta must lie in (0, pi)")
        if not length > 0:
            raise ValidationError("length must be positive")
        lam = theta_invariants(self.params, theta).lam
        multiple = length * math.sqrt(lam) / TWO_PI
        if abs(multiple - round(multiple)) > self.settings.lattice_multiple_tol or round(multiple) < 1:
            raise ValidationError("length is not an integer multiple of 2pi/sqrt(lambda(theta))")
        return length / TWO_PI * (self.params.tau ** 2 - self.params.kappa) * math.cos(theta)

    # tangent conjugate locus

    def theta_segments(self, samples, lambda_floor=0.01) -> List[np.ndarray]:
        """θ-grids covering {λ > 0}, one per connected piece.

        Unbounded pieces stop where λ(θ) = lambda_floor · τ².
        """
        if samples < 2:
            raise ValidationError("theta grid needs at least two samples")
        kappa, tau = self.params.kappa, self.params.tau
        segments = []
        for interval in lambda_positive_interval(self.params):
            lo, hi = interval.lo, interval.hi
            if not (interval.lo_closed and interval.hi_closed):
                cut = math.asin(math.sqrt((tau ** 2 * (1.0 - lambda_floor)) / (tau ** 2 - kappa)))
                lo, hi = (lo, cut) if interval.lo_closed else (math.pi - cut, hi)
            segments.append(np.linspace(lo, hi, int(samples)))
        return segments

    def sample_locus(self, family, p, theta_grid: Sequence[float], phi_grid: Sequence[float]) -> LocusSurface:
        family = LocusFamily(family)
        p = int(p)
        if family is LocusFamily.S1 and p < 1:
            raise ValidationError("S1 surfaces need p >= 1")
        if family is LocusFamily.S2 and p < 0:
            raise ValidationError("S2 surfaces need p >= 0")
        if family is LocusFamily.S2 and p == 0 and self.params.below_critical:
            raise ValidationError("the S2 surface with p = 0 exists only when kappa > tau^2")
        thetas = np.asarray(theta_grid, dtype=float)
        phis = np.asarray(phi_grid, dtype=float)
        if thetas.size == 0 or phis.size == 0:
            raise ValidationError("sampling grids must be nonempty")

        s_values, scales = [], []
        for theta in thetas:
            lam = theta_invariants(self.params, theta).lam
            if lam <= self.settings.lambda_zero_tol:
                raise ValidationError(f"grid point theta={theta:.15g} has lambda <= 0")
            s = TWO_PI * p if family is LocusFamily.S1 else self.branch_value(theta, p)
            s_values.append(s)
            scales.append(s / math.sqrt(lam))
        s_values, scales = np.array(s_values), np.array(scales)

        sin_t, cos_t = np.sin(thetas)[:, None], np.cos(thetas)[:, None]
        directions = np.stack([sin_t * np.cos(phis)[None, :],
                               sin_t * np.sin(phis)[None, :],
                               np.broadcast_to(cos_t, (len(thetas), len(phis)))], axis=-1)
        samples = scales[:, None, None] * directions
        surface = LocusSurface(self.params.kappa, self.params.tau, family, p, thetas, phis, s_values, samples)
        logger.info("sampled %s(%d) on a %dx%d grid (quadric residual %.2e)", family.value, p,
                    len(thetas), len(phis), surface.quadric_residual())
        return surface

    def heisenberg_branch_point(self, theta, phi, p_index, sign=1):
        """(s_p(θ)/τ)(tan θ cos φ, tan θ sin φ, ±1) for κ = 0 and θ in (0, π/2)"""
        if self.params.space_type is not SpaceType.HEISENBERG:
            raise ValidationError("heisenberg_branch_point needs kappa = 0")
        if not 0.0 < theta < math.pi / 2.0:
            raise ValidationError("theta must lie in (0, pi/2)")
        if sign not in (1, -1):
            raise ValidationError("sign must be +1 or -1")
        s = self.branch_root(theta, p_index)
        tangent = math.tan(theta)
        return s / self.params.tau * np.array([tangent * math.cos(phi), tangent * math.sin(phi), float(sign)])

    def isotropic_locus_membership(self, point, tol=None) -> bool:
        tol = self.settings.membership_tol if tol is None else tol
        x, y, z = (float(v) for v in point)
        value = self.params.kappa * (x * x + y * y) + self.params.tau ** 2 * z * z
        if value <= 0:
            return False
        p = round(math.sqrt(value) / TWO_PI)
        if p < 1 or abs(value - (TWO_PI * p) ** 2) > tol:
            return False
        pole = TWO_PI * p / self.params.tau
        for sign in (1.0, -1.0):
            if math.sqrt(x * x + y * y + (z - sign * pole) ** 2) <= tol:
                return False
        return True


def _is_square(value: int):
    return value >= 0 and math.isqrt(value) ** 2 == value


def exact_closed_geodesic_invariant(kappa, tau, cos_theta, multiple=1) -> Optional[Fraction]:
    """Exact (l/2π)(τ² − κ) cos θ for l = multiple · 2π/√λ(θ) and rational inputs.

    Returns None when the invariant is irrational, i.e. the geodesic does not
    close up at that length.
    """
    kappa, tau, cos_theta = Fraction(kappa), Fraction(tau), Fraction(cos_theta)
    if not kappa > 0:
        raise ValidationError("closed geodesic invariant needs a Berger sphere (kappa > 0)")
    if not tau > 0 or kappa == tau ** 2:
        raise ValidationError("need tau > 0 and kappa != tau^2")
    if not -1 < cos_theta < 1:
        raise ValidationError("cos(theta) must lie in (-1, 1)")
    if int(multiple) != multiple or multiple < 1:
        raise ValidationError("multiple must be a positive integer")
    numerator = (tau ** 2 - kappa) * cos_theta
    if numerator == 0:
        return Fraction(0)
    lam = kappa * (1 - cos_theta ** 2) + tau ** 2 * cos_theta ** 2
    if not (_is_square(lam.numerator) and _is_square(lam.denominator)):
        return None
    root = Fraction(math.isqrt(lam.numerator), math.isqrt(lam.denominator))
    return int(multiple) * numerator / root
