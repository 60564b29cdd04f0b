"""The three-dimensional naturally reductive family M³(κ, τ).

Berger spheres (κ > 0), the universal cover of SL(2, R) (κ < 0) and the
Heisenberg group (κ = 0), written as G/K with m = span{e1, e2, e3} and
k = span{A12}. All angles are radians.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np

from errors import ValidationError
from operator_space import SkewOp, SymOp, adjoint_action, mat_exp
from reductive_core import ReductiveAlgebra

logger = logging.getLogger(__name__)

SQRT2 = math.sqrt(2.0)


class SpaceType(Enum):
    BERGER_SPHERE = "BergerSphere"
    SL2_COVER = "SL2Cover"
    HEISENBERG = "Heisenberg"


@dataclass(frozen=True)
class M3Params:
    kappa: float
    tau: float

    def __post_init__(self):
        for name in ("kappa", "tau"):
            value = getattr(self, name)
            if isinstance(value, bool) or not math.isfinite(float(value)):
                raise ValidationError(f"{name} must be a finite real number")
        if not self.tau > 0:
            raise ValidationError("tau must be positive")
        if self.kappa == self.tau ** 2:
            raise ValidationError("kappa must differ from tau^2")

    @property
    def space_type(self):
        if self.kappa > 0:
            return SpaceType.BERGER_SPHERE
        if self.kappa < 0:
            return SpaceType.SL2_COVER
        return SpaceType.HEISENBERG

    @property
    def below_critical(self):
        """True when κ < τ²"""
        return self.kappa < self.tau ** 2


@dataclass(frozen=True)
class Direction:
    """Unit vector u(θ, φ) of m; θ is the angle with the Hopf field e3"""

    theta: float
    phi: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.theta) and 0.0 <= self.theta <= math.pi):
            raise ValidationError(f"theta must lie in [0, pi], got {self.theta!r}")
        if not (math.isfinite(self.phi) and 0.0 <= self.phi < 2.0 * math.pi):
            raise ValidationError(f"phi must lie in [0, 2pi), got {self.phi!r}")

    @property
    def is_hopf(self):
        # exact comparison: the θ → 0 limit is continuous
        return self.theta == 0.0 or self.theta == math.pi

    def at_phi_zero(self):
        return Direction(self.theta, 0.0)


@dataclass(frozen=True)
class ThetaInvariants:
    lam: float
    mu: float

    @property
    def has_conjugate_points(self):
        return self.lam > 0


@dataclass(frozen=True)
class ScalarInvariants:
    space_type: SpaceType
    xi_sectional_curvature: float
    ricci: Tuple[float, float, float]
    fiber_length: Optional[float]


@dataclass(frozen=True)
class OperatorData:
    S: SkewOp
    Rtilde: SymOp
    R: SymOp


@dataclass(frozen=True)
class ThetaInterval:
    lo: float
    hi: float
    lo_closed: bool
    hi_closed: bool

    def contains(self, theta):
        above = theta >= self.lo if self.lo_closed else theta > self.lo
        below = theta <= self.hi if self.hi_closed else theta < self.hi
        return above and below


def m3_structure(kappa, tau):
    """Structure constants of M³(κ, τ) without the κ ≠ τ² restriction.

    [e1, e2] = τ e3 + (κ − τ²) A12,  [e2, e3] = τ e1,  [e3, e1] = τ e2,
    [A12, e1] = e2,  [A12, e2] = −e1,  [A12, e3] = 0.
    """
    mm_m = np.zeros((3, 3, 3))
    mm_m[0, 1, 2], mm_m[1, 0, 2] = tau, -tau
    mm_m[1, 2, 0], mm_m[2, 1, 0] = tau, -tau
    mm_m[2, 0, 1], mm_m[0, 2, 1] = tau, -tau
    mm_k = np.zeros((3, 3, 1))
    mm_k[0, 1, 0], mm_k[1, 0, 0] = kappa - tau ** 2, tau ** 2 - kappa
    km = np.zeros((1, 3, 3))
    km[0, 0, 1] = 1.0
    km[0, 1, 0] = -1.0
    return ReductiveAlgebra(3, 1, mm_m, mm_k, km, np.zeros((1, 1, 1)), np.eye(3))


def build_algebra(params: M3Params) -> ReductiveAlgebra:
    logger.debug("building M3 algebra kappa=%g tau=%g", params.kappa, params.tau)
    return m3_structure(params.kappa, params.tau)


def unimodular_algebra(params: M3Params) -> ReductiveAlgebra:
    """The same space as a Lie group: g = span{u1, u2, u3} with k = 0.

    u1 = e1, u2 = e2, u3 = e3 + ((κ − τ²)/τ) A12 with the left-invariant
    metric making u1, u2, u3 orthonormal.
    """
    kappa, tau = params.kappa, params.tau
    table = np.zeros((3, 3, 3))
    table[0, 1, 2], table[1, 0, 2] = tau, -tau
    table[1, 2, 0], table[2, 1, 0] = kappa / tau, -kappa / tau
    table[2, 0, 1], table[0, 2, 1] = kappa / tau, -kappa / tau
    return ReductiveAlgebra(3, 0, table, np.zeros((3, 3, 0)), np.zeros((0, 3, 3)),
                            np.zeros((0, 0, 0)), np.eye(3))


def isotropy_generator():
    """ad(A12) on m"""
    return SkewOp(np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]))


def rotation(phi):
    """e^{φ A12} acting on m"""
    return mat_exp(isotropy_generator(), phi)


def direction_vector(direction: Direction) -> np.ndarray:
    theta, phi = direction.theta, direction.phi
    return np.array([math.sin(theta) * math.cos(phi),
                     math.sin(theta) * math.sin(phi),
                     math.cos(theta)])


def theta_invariants(params: M3Params, theta) -> ThetaInvariants:
    sin2 = math.sin(theta) ** 2
    lam = params.kappa * sin2 + params.tau ** 2 * math.cos(theta) ** 2
    mu = (params.tau ** 2 - params.kappa) / (2.0 * params.tau ** 2) * sin2
    return ThetaInvariants(lam, mu)


def scalar_invariants(params: M3Params) -> ScalarInvariants:
    kappa, tau = params.kappa, params.tau
    horizontal = kappa - tau ** 2 / 2.0
    fiber_length = 4.0 * math.pi * tau / kappa if params.space_type is SpaceType.BERGER_SPHERE else None
    return ScalarInvariants(params.space_type, tau ** 2 / 4.0,
                            (horizontal, horizontal, tau ** 2 / 2.0), fiber_length)


def isotropic_band(params: M3Params) -> Optional[float]:
    """ε such that the isotropic geodesics are those with θ in [ε, π − ε]"""
    if params.space_type is SpaceType.BERGER_SPHERE:
        return None
    if params.space_type is SpaceType.HEISENBERG:
        return math.pi / 2.0
    return math.atan(params.tau / math.sqrt(-params.kappa))


def lambda_positive_interval(params: M3Params) -> List[ThetaInterval]:
    """The slope angles θ with λ(θ) > 0"""
    epsilon = isotropic_band(params)
    if epsilon is None:
        return [ThetaInterval(0.0, math.pi, True, True)]
    return [ThetaInterval(0.0, epsilon, True, False),
            ThetaInterval(math.pi - epsilon, math.pi, False, True)]


def frame_v(theta) -> Tuple[SymOp, SymOp, SymOp]:
    """Orthonormal triple v1, v2, v3 spanning the osculating plane and centre"""
    if not 0.0 < theta < math.pi:
        raise ValidationError("frame_v is only defined for theta in (0, pi)")
    s, c = math.sin(theta), math.cos(theta)
    half = SQRT2 / 2.0
    v1 = half * np.array([[0.0, c, 0.0], [c, 0.0, -s], [0.0, -s, 0.0]])
    v2 = half * np.array([[-c * c, 0.0, c * s], [0.0, 1.0, 0.0], [c * s, 0.0, -s * s]])
    v3 = -half * np.array([[c * c, 0.0, -c * s], [0.0, 1.0, 0.0], [-c * s, 0.0, s * s]])
    return SymOp(v1), SymOp(v2), SymOp(v3)


def _theta_operators(params, theta):
    s, c = math.sin(theta), math.cos(theta)
    tau = params.tau
    s_matrix = 0.5 * tau * np.array([[0.0, -c, 0.0], [c, 0.0, -s], [0.0, s, 0.0]])
    rtilde = np.zeros((3, 3))
    rtilde[1, 1] = (params.kappa - tau ** 2) * s * s
    return SkewOp(s_matrix), SymOp(rtilde)


def operator_data(params: M3Params, direction: Direction) -> OperatorData:
    """Explicit S, R~ and R = R~ − S² at u(θ, φ)"""
    generator, rtilde = _theta_operators(params, direction.theta)
    if direction.phi != 0.0:
        g = rotation(direction.phi)
        generator = adjoint_action(g, generator)
        rtilde = adjoint_action(g, rtilde)
    return OperatorData(generator, rtilde, rtilde - generator.square())
