"""Jacobi fields along geodesics through the origin.

Along γ_u the equation reads X'' − T̃_u X' + R̃_u X = 0 in the canonical
frame (constant coefficients), with X(0) = 0 throughout this module.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np
import pandas as pd

from errors import ComputationError, ValidationError
from m3_geometry import (Direction, M3Params, build_algebra, direction_vector, rotation,
                         theta_invariants)
from operator_space import EndOp
from reductive_core import ReductiveAlgebra
from settings import DEFAULT_SETTINGS, NumericalSettings

logger = logging.getLogger(__name__)

# below this argument the x − sin x type differences switch to their series
_SERIES_CUTOFF = 0.1


class Branch(Enum):
    HOPF_FIBER = "HopfFiber"
    LAMBDA_POSITIVE = "LambdaPositive"
    LAMBDA_ZERO = "LambdaZero"
    LAMBDA_NEGATIVE = "LambdaNegative"


@dataclass(frozen=True)
class IsotropyVerdict:
    is_isotropic: bool
    killing_coefficient: Optional[float]


def _basis_functions(lam, t, branch):
    """S, K, W with S(0)=0, S'(0)=1, K' = S, W' = K and S'' = −λ S"""
    t = np.asarray(t, dtype=float)
    if branch is Branch.LAMBDA_ZERO:
        return t, t ** 2 / 2.0, t ** 3 / 6.0
    if branch is Branch.LAMBDA_NEGATIVE:
        q = math.sqrt(-lam)
        x = q * t
        sine = np.sinh(x) / q
        cosine_term = 2.0 * np.sinh(x / 2.0) ** 2 / q ** 2
        x2 = x * x
        series = t ** 3 * (1.0 / 6.0 + x2 / 120.0 + x2 ** 2 / 5040.0 + x2 ** 3 / 362880.0)
        with np.errstate(over="ignore", invalid="ignore"):
            direct = (np.sinh(x) - x) / q ** 3
        cubic = np.where(np.abs(x) < _SERIES_CUTOFF, series, direct)
        return sine, cosine_term, cubic
    r = math.sqrt(lam)
    x = r * t
    sine = np.sin(x) / r
    cosine_term = 2.0 * np.sin(x / 2.0) ** 2 / lam
    x2 = x * x
    series = t ** 3 * (1.0 / 6.0 - x2 / 120.0 + x2 ** 2 / 5040.0 - x2 ** 3 / 362880.0)
    cubic = np.where(np.abs(x) < _SERIES_CUTOFF, series, (x - np.sin(x)) / r ** 3)
    return sine, cosine_term, cubic


@dataclass(frozen=True, eq=False)
class JacobiSolution:
    """X(t) with X(0) = 0 and X'(0) = initial_derivative along γ_{u(θ,φ)}.

    At φ = 0 the field is
        X² = A S(t) + B K(t)
        X¹ = a1 t + τ cosθ (A K(t) + B W(t))
        X³ = a3 t − τ sinθ (A K(t) + B W(t))
    with A = X²'(0), B = X²''(0), C = <X'(0), u>, a1 = sinθ C − cosθ B/τ,
    a3 = cosθ C + sinθ B/τ and S, K, W the λ(θ)-dependent sine, versine
    and cubic functions. ``coefficients`` reports (A, B, C), except on the
    Hopf fibres where it reports the amplitudes of
    X = (A(1 − cos τt) − B sin τt) e1 + (A sin τt + B(1 − cos τt)) e2 + C t e3.
    """

    params: M3Params
    direction: Direction
    initial_derivative: np.ndarray
    branch: Branch
    lam: float
    coefficients: Tuple[float, float, float]
    _series: Tuple[float, float, float, float, float, float]  # A, B, a1, a3, sinθ, cosθ

    def evaluate(self, t):
        """X(t); an array of times gives one row per time"""
        times = np.asarray(t, dtype=float)
        a, b, a1, a3, s, c = self._series
        tau = self.params.tau
        sine, versine, cubic = _basis_functions(self.lam, times, self.branch)
        x2 = a * sine + b * versine
        integral = a * versine + b * cubic
        x1 = a1 * times + tau * c * integral
        x3 = a3 * times - tau * s * integral
        values = np.stack([x1, x2, x3], axis=-1)
        if self.direction.phi != 0.0:
            values = values @ rotation(self.direction.phi).entries.T
        return values

    def __call__(self, t):
        return self.evaluate(t)


class JacobiSolver:
    """Closed-form Jacobi fields of M³(κ, τ)"""

    def __init__(self, params: M3Params, settings: NumericalSettings = DEFAULT_SETTINGS):
        self.params = params
        self.settings = settings
        self.algebra = build_algebra(params)

    def branch_for(self, direction: Direction):
        if direction.is_hopf:
            return Branch.HOPF_FIBER
        lam = theta_invariants(self.params, direction.theta).lam
        if abs(lam) < self.settings.lambda_zero_tol:
            return Branch.LAMBDA_ZERO
        return Branch.LAMBDA_POSITIVE if lam > 0 else Branch.LAMBDA_NEGATIVE

    def solve_closed_form(self, direction: Direction, xprime0) -> JacobiSolution:
        xprime0 = np.asarray(xprime0, dtype=float)
        if xprime0.shape != (3,) or not np.all(np.isfinite(xprime0)):
            raise ValidationError("initial derivative must be a finite 3-vector")
        tau = self.params.tau
        branch = self.branch_for(direction)
        if branch is Branch.HOPF_FIBER:
            s, c = 0.0, (1.0 if direction.theta == 0.0 else -1.0)
            lam = tau ** 2
        else:
            s, c = math.sin(direction.theta), math.cos(direction.theta)
            lam = theta_invariants(self.params, direction.theta).lam
            if branch is Branch.LAMBDA_ZERO:
                lam = 0.0
        logger.debug("jacobi branch %s (lambda=%.6g) for theta=%.15g", branch.value, lam, direction.theta)

        local = xprime0
        if direction.phi != 0.0:
            local = rotation(-direction.phi).apply(xprime0)
        # X'(0) = M (A, B, C); det M = 1/τ
        system = np.array([[0.0, -c / tau, s], [1.0, 0.0, 0.0], [0.0, s / tau, c]])
        try:
            a, b, big_c = np.linalg.solve(system, local)
        except np.linalg.LinAlgError as exc:
            raise ComputationError("singular Jacobi coefficient system") from exc
        a1 = s * big_c - c * b / tau
        a3 = c * big_c + s * b / tau

        if branch is Branch.HOPF_FIBER:
            coefficients = (a / tau, b / tau ** 2, big_c)
        else:
            coefficients = (a, b, big_c)
        return JacobiSolution(self.params, direction, xprime0.copy(), branch, lam,
                              tuple(float(v) for v in coefficients),
                              (a, b, a1, a3, s, c))

    def solution_matrix(self, direction: Direction, t) -> EndOp:
        """Columns X_j(t) for X_j'(0) = e_j; singular exactly at conjugate times"""
        columns = [self.solve_closed_form(direction, np.eye(3)[j]).evaluate(t) for j in range(3)]
        return EndOp(np.column_stack(columns))

    def determinant(self, direction: Direction, t):
        """det of ``solution_matrix`` in closed form, vectorised over t.

        det X(t) = t (τ² K² + t S − τ² S W) = 2τ² t g(√|λ| t) / λ², where g is
        f_θ for λ > 0 and 2 sinh(x/2)(μ x cosh(x/2) − sinh(x/2)) for λ < 0.
        The second never vanishes since μ > 1/2 there.
        """
        times = np.asarray(t, dtype=float)
        tau = self.params.tau
        branch = self.branch_for(direction)
        if branch is Branch.LAMBDA_ZERO:
            return times ** 3 * (1.0 + tau ** 2 * times ** 2 / 12.0)
        if branch is Branch.HOPF_FIBER:
            lam, mu = tau ** 2, 0.0
        else:
            invariants = theta_invariants(self.params, direction.theta)
            lam, mu = invariants.lam, invariants.mu
        if lam > 0:
            x = math.sqrt(lam) * times
            factor = 2.0 * np.sin(x / 2.0) * (np.sin(x / 2.0) - mu * x * np.cos(x / 2.0))
        else:
            x = math.sqrt(-lam) * times
            factor = 2.0 * np.sinh(x / 2.0) * (mu * x * np.cosh(x / 2.0) - np.sinh(x / 2.0))
        return 2.0 * tau ** 2 * times * factor / lam ** 2

    def isotropic_initial_derivative(self, direction: Direction):
        """λ(θ) e^{φA12} e2, the initial derivative of the isotropic field"""
        lam = theta_invariants(self.params, direction.theta).lam
        return lam * rotation(direction.phi).apply(np.array([0.0, 1.0, 0.0]))

    def isotropy_test(self, direction: Direction, xprime0) -> IsotropyVerdict:
        return isotropy_test(self.algebra, direction_vector(direction), xprime0,
                             hopf=direction.is_hopf, settings=self.settings)


def isotropy_test(algebra: ReductiveAlgebra, u, xprime0, hopf=False,
                  settings: NumericalSettings = DEFAULT_SETTINGS) -> IsotropyVerdict:
    """Is X'(0) = [A, u] for some A in the isotropy algebra (one-dimensional k)?"""
    x = algebra.frame_coordinates(xprime0)
    if not np.any(x):
        return IsotropyVerdict(True, 0.0)
    if hopf or algebra.dim_k == 0:
        return IsotropyVerdict(False, None)
    directions = algebra.isotropy_directions(u)
    if len(directions) != 1:
        raise ValidationError("isotropy_test expects a one-dimensional isotropy algebra")
    w = directions[0]
    w_norm = np.linalg.norm(w)
    if w_norm == 0.0:
        return IsotropyVerdict(False, None)
    coefficient = float(x @ w) / w_norm ** 2
    off_line = np.linalg.norm(x - coefficient * w) / np.linalg.norm(x)
    if off_line < settings.isotropy_angle_tol:
        return IsotropyVerdict(True, coefficient)
    return IsotropyVerdict(False, None)


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray

    def to_frame(self):
        columns = {"t": self.times}
        for i in range(self.positions.shape[1]):
            columns[f"x{i + 1}"] = self.positions[:, i]
        for i in range(self.velocities.shape[1]):
            columns[f"w{i + 1}"] = self.velocities[:, i]
        return pd.DataFrame(columns)

    def relative_error(self, reference):
        """sup |X − reference| / max(1, sup |X|) over the sampled times"""
        reference = np.asarray(reference, dtype=float)
        error = np.max(np.linalg.norm(self.positions - reference, axis=1))
        size = np.max(np.linalg.norm(self.positions, axis=1))
        return float(error / max(1.0, size))


def integrate_numeric(algebra: ReductiveAlgebra, u, xprime0, t_end, step=None,
                      settings: NumericalSettings = DEFAULT_SETTINGS) -> Trajectory:
    """Classical RK4 for (X, W)' = (W, T̃_u W − R̃_u X), X(0) = 0, W(0) = xprime0.

    Positions come back in the metric-orthonormal frame of the algebra. The
    step is shrunk so that t_end is hit exactly.
    """
    step = settings.rk4_step if step is None else step
    if not step > 0:
        raise ValidationError("integration step must be positive")
    if not t_end > 0:
        raise ValidationError("t_end must be positive")
    algebra._frame_vector(u, require_unit=True)
    torsion = algebra.torsion(u).entries
    curvature = algebra.canonical_curvature(u).entries
    n = algebra.dim_m
    generator = np.block([[np.zeros((n, n)), np.eye(n)], [-curvature, torsion]])

    count = max(1, int(math.ceil(t_end / step - 1e-9)))
    h = t_end / count
    hg = h * generator
    # one RK4 step of a constant linear system is y -> P y
    propagator = np.eye(2 * n) + hg @ (np.eye(2 * n) + hg / 2.0 @ (np.eye(2 * n) + hg / 3.0 @ (np.eye(2 * n) + hg / 4.0)))

    states = np.empty((count + 1, 2 * n))
    states[0] = np.concatenate([np.zeros(n), algebra.frame_coordinates(xprime0)])
    for k in range(count):
        states[k + 1] = propagator @ states[k]
        if not np.all(np.isfinite(states[k + 1])):
            raise ComputationError(f"integration diverged at t = {(k + 1) * h:.6g}")
    times = h * np.arange(count + 1)
    logger.debug("integrated %d RK4 steps of size %.3g", count, h)
    return Trajectory(times, states[:, :n], states[:, n:])
