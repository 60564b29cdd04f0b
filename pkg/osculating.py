"""Parallel-translated Jacobi operator curves R_u(t) = Ad(e^{tS_u}) R_u."""
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from errors import ComputationError, ValidationError
from operator_space import (EndOp, SkewOp, SymOp, adjoint_action, derivation_action,
                            frobenius_inner, mat_exp, numerical_rank)
from reductive_core import ReductiveAlgebra
from settings import DEFAULT_SETTINGS, NumericalSettings

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CircleFit:
    center: SymOp
    radius: float
    period: float
    spread: float


@dataclass(frozen=True)
class CurveSamples:
    times: np.ndarray
    operators: np.ndarray  # shape (len(times), n, n)
    distances: Optional[np.ndarray] = None


@dataclass(frozen=True)
class RankProfile:
    ranks: Tuple[int, ...]

    @property
    def is_constant(self):
        return len(set(self.ranks)) <= 1

    @property
    def description(self):
        if not self.is_constant:
            return "non-constant"
        if self.ranks and self.ranks[0] == 0:
            return "constant rank zero"
        return "constant"


@dataclass(frozen=True, eq=False)
class OperatorCurve:
    """R_u(t) together with its derivatives S_u^i · R_u at t = 0"""

    base: SymOp
    generator: SkewOp
    max_order: Optional[int] = None
    settings: NumericalSettings = DEFAULT_SETTINGS
    derivatives: Tuple[SymOp, ...] = field(init=False)

    def __post_init__(self):
        if self.base.dim != self.generator.dim:
            raise ValidationError("base and generator dimensions differ")
        n = self.base.dim
        order = self.max_order if self.max_order is not None else max(1, n * (n - 1) // 2)
        if order < 1:
            raise ValidationError("max_order must be at least 1")
        derivatives = []
        current = self.base
        for _ in range(order):
            current = derivation_action(self.generator, current)
            derivatives.append(current)
        object.__setattr__(self, "max_order", order)
        object.__setattr__(self, "derivatives", tuple(derivatives))

    @classmethod
    def for_direction(cls, algebra: ReductiveAlgebra, u, max_order=None, settings=DEFAULT_SETTINGS):
        base = algebra.riemann_jacobi_operator(u)
        generator = algebra.s_operator(u)
        curve = cls(base, generator, max_order, settings)
        frame_u = algebra.frame_coordinates(u)
        leak = max(np.linalg.norm(d.apply(frame_u)) for d in curve.derivatives)
        if leak > 1e-9 * max(1.0, base.norm()):
            logger.warning("curve derivatives do not annihilate u (|K u| = %.3e)", leak)
        return curve

    def curve_at(self, t) -> SymOp:
        if t == 0:
            return self.base
        return adjoint_action(mat_exp(self.generator, t), self.base)

    def tilde_curve_at(self, t) -> SymOp:
        """R~_u(t) = R_u(t) + S_u²"""
        return self.curve_at(t) + self.generator.square()

    def derivative_at_zero(self, i) -> SymOp:
        if int(i) != i or i < 1:
            raise ValidationError("derivative order must be a positive integer")
        i = int(i)
        if i <= len(self.derivatives):
            return self.derivatives[i - 1]
        current = self.derivatives[-1]
        for _ in range(i - len(self.derivatives)):
            current = derivation_action(self.generator, current)
        return current

    @property
    def scale(self):
        """Natural size of the curve, used as the absolute rank floor"""
        return self.base.norm() + self.generator.norm() ** 2

    def osculating_rank(self, tol=None) -> int:
        tol = self.settings.rank_tol if tol is None else tol
        if tol <= 0:
            raise ValidationError("rank tolerance must be positive")
        return numerical_rank(list(self.derivatives), tol, scale=self.scale)

    def curve_samples(self, times: Sequence[float], center: Optional[EndOp] = None) -> CurveSamples:
        times = np.asarray(times, dtype=float)
        operators = np.array([self.curve_at(t).entries for t in times])
        distances = None
        if center is not None:
            distances = np.linalg.norm((operators - center.entries).reshape(len(times), -1), axis=1)
        return CurveSamples(times, operators, distances)

    def frequency(self):
        """Angular frequency of the rank-two curve.

        The curve only oscillates at differences of eigenvalues of S_u; the
        candidate best satisfying D3 = −ω² D1 wins.
        """
        first, third = self.derivative_at_zero(1), self.derivative_at_zero(3)
        eigenvalues = np.linalg.eigvals(self.generator.entries)
        differences = (eigenvalues[:, None] - eigenvalues[None, :]).ravel().imag
        candidates = sorted({round(float(w), 12) for w in differences if w > 1e-12})
        reference = max(third.norm(), np.finfo(float).tiny)
        best, best_residual = None, math.inf
        for omega in candidates:
            residual = (third + omega ** 2 * first).norm() / reference
            if residual < best_residual:
                best, best_residual = omega, residual
        if best is None or best_residual > 1e-8:
            ratio = -frobenius_inner(third, first) / frobenius_inner(first, first)
            if ratio <= 0:
                raise ComputationError("could not detect a period for the operator curve")
            logger.debug("falling back to the Rayleigh-quotient frequency")
            best = math.sqrt(ratio)
        return best

    def fit_circle(self, samples=64) -> CircleFit:
        if samples < self.settings.circle_min_samples:
            raise ValidationError(f"fit_circle needs at least {self.settings.circle_min_samples} samples")
        rank = self.osculating_rank()
        if rank != 2:
            raise ValidationError(f"curve has osculating rank {rank}, not a circle")
        period = 2.0 * math.pi / self.frequency()
        times = period * np.arange(samples) / samples
        stack = self.curve_samples(times).operators
        center = SymOp(stack.mean(axis=0))
        distances = np.linalg.norm((stack - center.entries).reshape(samples, -1), axis=1)
        radius = float(distances.mean())
        spread = float((distances.max() - distances.min()) / radius)
        if spread >= self.settings.circle_spread_tol:
            raise ComputationError(f"sampled curve is not a circle (relative spread {spread:.3e})")
        if spread > 0.1 * self.settings.circle_spread_tol:
            logger.warning("circle fit spread %.3e is close to tolerance", spread)
        return CircleFit(center, radius, period, spread)


def rank_profile(algebra: ReductiveAlgebra, directions, tol=None, settings=DEFAULT_SETTINGS) -> RankProfile:
    """Osculating ranks over a list of unit directions"""
    ranks: List[int] = []
    for u in directions:
        curve = OperatorCurve.for_direction(algebra, u, settings=settings)
        ranks.append(curve.osculating_rank(tol))
    return RankProfile(tuple(ranks))
