"""Reductive decompositions g = m + k given by structure constants.

All operator-valued results are expressed in a metric-orthonormal frame of m
(obtained by Cholesky factorisation of ``metric_m``); vectors passed in are in
the original basis. When ``metric_m`` is the identity both frames coincide,
which is the case for every built-in model.

Curvature follows the sign convention R(X, Y) = nabla_[X,Y] - [nabla_X, nabla_Y],
so that <R(u, x)u, x> is the sectional curvature of span{u, x}.
"""
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import List, Optional

import numpy as np
from scipy import linalg as sla

from errors import ValidationError
from operator_space import EndOp, skew_part, symmetric_part
from settings import DEFAULT_SETTINGS

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class NaturalReductivityReport:
    is_naturally_reductive: bool
    max_violation: float


@dataclass(frozen=True)
class BiInvariantResult:
    """Outcome of the search for a bi-invariant extension B_r"""

    r: Optional[float]
    indeterminate: bool
    residual: float

    @property
    def exists(self):
        return self.r is not None


def _antisymmetric_table(table, axes, name):
    """Validate and exactly antisymmetrise ``table`` in the two given axes"""
    swapped = np.swapaxes(table, *axes)
    if table.size == 0:
        return table
    defect = float(np.max(np.abs(table + swapped)))
    if defect > 1e-12 * max(1.0, float(np.max(np.abs(table)))):
        raise ValidationError(f"bracket table {name} is not antisymmetric (defect {defect:.3e})")
    return 0.5 * (table - swapped)


@dataclass(frozen=True, eq=False)
class ReductiveAlgebra:
    """Structure constants of g = m + k plus the inner product on m.

    bracket_mm_m[i, j, k] = ([x_i, x_j]_m)^k
    bracket_mm_k[i, j, a] = ([x_i, x_j]_k)^a
    bracket_km[a, j, k]   = ([A_a, x_j])^k
    bracket_kk[a, b, c]   = ([A_a, A_b])^c
    """

    dim_m: int
    dim_k: int
    bracket_mm_m: np.ndarray
    bracket_mm_k: np.ndarray
    bracket_km: np.ndarray
    bracket_kk: np.ndarray
    metric_m: np.ndarray
    check_jacobi: bool = True

    def __post_init__(self):
        n, dk = int(self.dim_m), int(self.dim_k)
        if n <= 0 or dk < 0:
            raise ValidationError(f"invalid dimensions dim_m={n}, dim_k={dk}")
        expected = {
            "bracket_mm_m": (n, n, n),
            "bracket_mm_k": (n, n, dk),
            "bracket_km": (dk, n, n),
            "bracket_kk": (dk, dk, dk),
            "metric_m": (n, n),
        }
        tables = {}
        for name, shape in expected.items():
            value = np.array(getattr(self, name), dtype=float)
            if value.size == 0 and 0 in shape:
                value = np.zeros(shape)
            if value.shape != shape:
                raise ValidationError(f"{name} has shape {value.shape}, expected {shape}")
            if not np.all(np.isfinite(value)):
                raise ValidationError(f"{name} has non-finite entries")
            tables[name] = value

        tables["bracket_mm_m"] = _antisymmetric_table(tables["bracket_mm_m"], (0, 1), "mm_m")
        tables["bracket_mm_k"] = _antisymmetric_table(tables["bracket_mm_k"], (0, 1), "mm_k")
        tables["bracket_kk"] = _antisymmetric_table(tables["bracket_kk"], (0, 1), "kk")

        metric = tables["metric_m"]
        if np.max(np.abs(metric - metric.T)) > 1e-12 * max(1.0, np.max(np.abs(metric))):
            raise ValidationError("metric_m must be symmetric")
        metric = 0.5 * (metric + metric.T)
        try:
            sla.cholesky(metric, lower=True)
        except np.linalg.LinAlgError as exc:
            raise ValidationError("metric_m must be positive definite") from exc
        tables["metric_m"] = metric

        object.__setattr__(self, "dim_m", n)
        object.__setattr__(self, "dim_k", dk)
        for name, value in tables.items():
            value.setflags(write=False)
            object.__setattr__(self, name, value)

        if self.check_jacobi:
            residual = self.jacobi_identity_residual()
            scale = max(1.0, float(np.max(np.abs(self.structure_constants))) ** 2)
            if residual > DEFAULT_SETTINGS.jacobi_identity_tol * scale:
                raise ValidationError(f"Jacobi identity fails (residual {residual:.3e})")

    # construction helpers

    @classmethod
    def abelian(cls, dim_m, dim_k=0):
        n, dk = dim_m, dim_k
        return cls(n, dk, np.zeros((n, n, n)), np.zeros((n, n, dk)), np.zeros((dk, n, n)),
                   np.zeros((dk, dk, dk)), np.eye(n))

    def with_metric(self, metric_m, check_jacobi=True):
        return ReductiveAlgebra(self.dim_m, self.dim_k, self.bracket_mm_m, self.bracket_mm_k,
                                self.bracket_km, self.bracket_kk, metric_m, check_jacobi)

    @property
    def dim(self):
        return self.dim_m + self.dim_k

    @cached_property
    def structure_constants(self):
        """Full table C[i, j, l] of g with m first and k second"""
        n, dk = self.dim_m, self.dim_k
        table = np.zeros((n + dk, n + dk, n + dk))
        table[:n, :n, :n] = self.bracket_mm_m
        table[:n, :n, n:] = self.bracket_mm_k
        table[n:, :n, :n] = self.bracket_km
        table[:n, n:, :n] = -np.transpose(self.bracket_km, (1, 0, 2))
        table[n:, n:, n:] = self.bracket_kk
        return table

    def jacobi_identity_residual(self):
        """Max |ad([X_i, X_j]) - [ad X_i, ad X_j]| over the basis of g"""
        table = self.structure_constants
        # ad[i][k, j] = C[i, j, k]
        ad = np.transpose(table, (0, 2, 1))
        lhs = np.einsum("ijl,lkm->ijkm", table, ad)
        products = np.einsum("ikp,jpm->ijkm", ad, ad)
        rhs = products - np.transpose(products, (1, 0, 2, 3))
        return float(np.max(np.abs(lhs - rhs))) if table.size else 0.0

    # frames

    @cached_property
    def _cholesky(self):
        return sla.cholesky(self.metric_m, lower=True)

    @cached_property
    def is_euclidean(self):
        return bool(np.array_equal(self.metric_m, np.eye(self.dim_m)))

    def frame_coordinates(self, vector):
        """Coordinates of a vector of m in the metric-orthonormal frame"""
        vector = np.asarray(vector, dtype=float)
        if vector.shape != (self.dim_m,):
            raise ValidationError(f"expected a vector of length {self.dim_m}")
        if self.is_euclidean:
            return vector
        return self._cholesky.T @ vector

    def norm(self, vector):
        vector = np.asarray(vector, dtype=float)
        return float(np.sqrt(vector @ self.metric_m @ vector))

    @cached_property
    def orthonormal(self):
        """The same algebra written in the frame f = e L^{-T}, metric = I"""
        if self.is_euclidean:
            return self
        basis = np.linalg.inv(self._cholesky.T)  # columns are the new frame vectors
        inverse = self._cholesky.T
        mm_m = np.einsum("ai,bj,abc,kc->ijk", basis, basis, self.bracket_mm_m, inverse)
        mm_k = np.einsum("ai,bj,abc->ijc", basis, basis, self.bracket_mm_k)
        km = np.einsum("bj,abc,kc->ajk", basis, self.bracket_km, inverse)
        return ReductiveAlgebra(self.dim_m, self.dim_k, mm_m, mm_k, km, self.bracket_kk,
                                np.eye(self.dim_m), check_jacobi=False)

    def to_orthonormal(self):
        return self.orthonormal

    # structural checks

    def check_naturally_reductive(self, tol=DEFAULT_SETTINGS.natural_reductivity_tol):
        """<[X,Y]_m, Z> + <[X,Z]_m, Y> = 0 on all basis triples of m"""
        lowered = np.einsum("ijl,lk->ijk", self.bracket_mm_m, self.metric_m)
        violation = lowered + np.transpose(lowered, (0, 2, 1))
        worst = float(np.max(np.abs(violation)))
        return NaturalReductivityReport(worst <= tol, worst)

    @cached_property
    def is_naturally_reductive(self):
        return self.check_naturally_reductive().is_naturally_reductive

    # operators at u (frame coordinates in, frame operators out)

    def _frame_vector(self, u, require_unit=False):
        vector = self.frame_coordinates(u)
        if require_unit and abs(np.linalg.norm(vector) - 1.0) > DEFAULT_SETTINGS.unit_norm_tol:
            raise ValidationError(f"direction must be a unit vector, |u| = {np.linalg.norm(vector):.12g}")
        return vector

    def _ad_m(self, frame_u):
        return np.einsum("i,ijk->kj", frame_u, self.orthonormal.bracket_mm_m)

    def _bracket_k(self, frame_u):
        return np.einsum("i,ija->aj", frame_u, self.orthonormal.bracket_mm_k)

    def _k_action(self, frame_u):
        # [A_a, u]^k as columns
        return np.einsum("l,alk->ka", frame_u, self.orthonormal.bracket_km)

    def torsion(self, u):
        """T_u X = -[u, X]_m"""
        matrix = -self._ad_m(self._frame_vector(u))
        if self.is_naturally_reductive:
            return skew_part(matrix)
        return EndOp(matrix)

    def s_operator(self, u):
        """S_u X = 1/2 [u, X]_m"""
        matrix = 0.5 * self._ad_m(self._frame_vector(u))
        if self.is_naturally_reductive:
            return skew_part(matrix)
        return EndOp(matrix)

    def canonical_curvature(self, u):
        """R~_u X = [[u, X]_k, u]"""
        frame_u = self._frame_vector(u)
        matrix = self._k_action(frame_u) @ self._bracket_k(frame_u)
        defect = float(np.max(np.abs(matrix - matrix.T)))
        if defect > DEFAULT_SETTINGS.natural_reductivity_tol * max(1.0, float(np.max(np.abs(matrix)))):
            raise ValidationError(f"canonical curvature operator is not self-adjoint (defect {defect:.3e})")
        return symmetric_part(matrix)

    def riemann_jacobi_operator(self, u):
        """R_u = R~_u - S_u^2 for a unit vector u"""
        self._frame_vector(u, require_unit=True)
        if not self.is_naturally_reductive:
            raise ValidationError("the Jacobi operator formula needs a naturally reductive algebra")
        return self.canonical_curvature(u) - self.s_operator(u).square()

    def full_curvature(self, x, y):
        """R_xy = R~_xy - [S_x, S_y] + 2 S_{S_x y} with R~_xy = ad_{[x,y]_k}"""
        frame_x = self._frame_vector(x)
        frame_y = self._frame_vector(y)
        algebra = self.orthonormal
        k_part = np.einsum("i,j,ija->a", frame_x, frame_y, algebra.bracket_mm_k)
        canonical = np.einsum("a,ajk->kj", k_part, algebra.bracket_km)
        s_x = 0.5 * self._ad_m(frame_x)
        s_y = 0.5 * self._ad_m(frame_y)
        s_sxy = 0.5 * self._ad_m(s_x @ frame_y)
        return EndOp(canonical - (s_x @ s_y - s_y @ s_x) + 2.0 * s_sxy)

    def sectional_curvature(self, x, y):
        """<R(x, y)x, y> / |x ^ y|^2 in the frame"""
        frame_x = self._frame_vector(x)
        frame_y = self._frame_vector(y)
        area = frame_x @ frame_x * (frame_y @ frame_y) - (frame_x @ frame_y) ** 2
        if area <= 0:
            raise ValidationError("sectional curvature needs independent vectors")
        return float(self.full_curvature(x, y).apply(frame_x) @ frame_y / area)

    def isotropy_directions(self, u) -> List[np.ndarray]:
        """Initial derivatives [A_a, u] of the isotropic Jacobi fields along u"""
        action = self._k_action(self._frame_vector(u))
        return [action[:, a].copy() for a in range(self.dim_k)]

    def invariant_directions(self):
        """Orthonormal basis (columns, frame coordinates) of {u : [k, u] = 0}"""
        if self.dim_k == 0:
            return np.eye(self.dim_m)
        stacked = np.transpose(self.orthonormal.bracket_km, (0, 2, 1)).reshape(self.dim_k * self.dim_m, self.dim_m)
        return sla.null_space(stacked)

    def ricci_diagonal(self):
        """rho(f_i, f_i) = trace R_{f_i} over the orthonormal frame"""
        values = []
        for i in range(self.dim_m):
            frame_vector = np.zeros(self.dim_m)
            frame_vector[i] = 1.0
            original = np.linalg.solve(self._cholesky.T, frame_vector) if not self.is_euclidean else frame_vector
            values.append(float(np.trace(self.riemann_jacobi_operator(original).entries)))
        return np.array(values)

    # normal homogeneity

    def bi_invariant_extension(self):
        """Search r > 0 such that B_r = metric_m + r on k (m _|_ k) is bi-invariant.

        B_r([X,Y], Z) + B_r([X,Z], Y) = 0 is affine in r, so r is the least
        squares solution of a + r b = 0 over all basis triples of g.
        """
        if self.dim_k != 1:
            raise ValidationError("bi_invariant_extension needs dim_k = 1")
        constant, slope = self._bi_invariance_terms()
        if not np.any(slope) and not np.any(constant):
            logger.info("all brackets vanish, every r is bi-invariant; returning r = 1")
            return BiInvariantResult(1.0, True, 0.0)
        if not np.any(slope):
            return BiInvariantResult(None, False, float(np.max(np.abs(constant))))
        r = -float(constant @ slope) / float(slope @ slope)
        residual = float(np.max(np.abs(constant + r * slope)))
        logger.debug("bi-invariant candidate r=%.15g residual=%.3e", r, residual)
        if r <= 0:
            return BiInvariantResult(None, False, residual)
        if BiInvariantCandidate(r, self).violation() < DEFAULT_SETTINGS.bi_invariant_tol:
            return BiInvariantResult(r, False, residual)
        return BiInvariantResult(None, False, residual)

    def _bi_invariance_terms(self):
        n = self.dim_m
        table = self.structure_constants
        base = np.zeros((self.dim, self.dim))
        base[:n, :n] = self.metric_m
        unit_k = np.zeros((self.dim, self.dim))
        unit_k[n:, n:] = np.eye(self.dim_k)
        terms = []
        for form in (base, unit_k):
            lowered = np.einsum("ijl,lk->ijk", table, form)
            terms.append((lowered + np.transpose(lowered, (0, 2, 1))).ravel())
        return terms[0], terms[1]


@dataclass(frozen=True)
class BiInvariantCandidate:
    """Inner product on g: metric_m on m, r on the single k generator"""

    r: float
    base: ReductiveAlgebra

    def __post_init__(self):
        if not self.r > 0:
            raise ValidationError("bi-invariant candidate needs r > 0")

    def violation(self):
        constant, slope = self.base._bi_invariance_terms()
        return float(np.max(np.abs(constant + self.r * slope)))
