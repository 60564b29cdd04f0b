"""Small dense real operator algebra over the reductive complement m.

Operators are immutable wrappers around square numpy arrays. ``SymOp`` and
``SkewOp`` (anti)symmetrise their input on construction and reject inputs
that are too far from the requested symmetry.
"""
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import linalg as sla

from errors import ValidationError
from settings import DEFAULT_SETTINGS

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class EndOp:
    """Endomorphism of m in a fixed orthonormal frame"""

    entries: np.ndarray

    def __post_init__(self):
        matrix = np.array(self.entries, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.shape[0] == 0:
            raise ValidationError(f"operator must be a non-empty square matrix, got shape {matrix.shape}")
        if not np.all(np.isfinite(matrix)):
            raise ValidationError("operator entries must be finite")
        matrix = self._normalise(matrix)
        matrix.setflags(write=False)
        object.__setattr__(self, "entries", matrix)

    def _normalise(self, matrix):
        return matrix

    @property
    def dim(self):
        return self.entries.shape[0]

    def apply(self, vector):
        return self.entries @ np.asarray(vector, dtype=float)

    def norm(self):
        return float(np.linalg.norm(self.entries))

    def _combine(self, other, entries):
        if type(self) is type(other):
            return type(self)(entries)
        return EndOp(entries)

    def __add__(self, other):
        _check_dims(self, other)
        return self._combine(other, self.entries + other.entries)

    def __sub__(self, other):
        _check_dims(self, other)
        return self._combine(other, self.entries - other.entries)

    def __neg__(self):
        return type(self)(-self.entries)

    def __mul__(self, scalar):
        return type(self)(float(scalar) * self.entries)

    __rmul__ = __mul__

    def __matmul__(self, other):
        _check_dims(self, other)
        return EndOp(self.entries @ other.entries)

    def allclose(self, other, atol=1e-12):
        _check_dims(self, other)
        return bool(np.max(np.abs(self.entries - other.entries)) <= atol)

    def __repr__(self):
        return f"{type(self).__name__}({np.array2string(self.entries, precision=6)})"


class SymOp(EndOp):
    """Self-adjoint operator; symmetrised on construction"""

    def _normalise(self, matrix):
        symmetric = 0.5 * (matrix + matrix.T)
        defect = np.linalg.norm(matrix - symmetric)
        if defect > DEFAULT_SETTINGS.symmetry_tol * max(np.linalg.norm(matrix), np.finfo(float).tiny):
            raise ValidationError(f"matrix is not self-adjoint (asymmetric part {defect:.3e})")
        return symmetric


class SkewOp(EndOp):
    """Skew-symmetric operator; antisymmetrised on construction, zero diagonal"""

    def _normalise(self, matrix):
        skew = 0.5 * (matrix - matrix.T)
        defect = np.linalg.norm(matrix - skew)
        if defect > DEFAULT_SETTINGS.symmetry_tol * max(np.linalg.norm(matrix), np.finfo(float).tiny):
            raise ValidationError(f"matrix is not skew-symmetric (symmetric part {defect:.3e})")
        np.fill_diagonal(skew, 0.0)
        return skew

    def square(self):
        """S² as a self-adjoint operator"""
        return symmetric_part(self.entries @ self.entries)


def symmetric_part(matrix) -> SymOp:
    """(M + Mᵀ)/2, for products that are symmetric up to round-off only"""
    matrix = np.asarray(matrix, dtype=float)
    return SymOp(0.5 * (matrix + matrix.T))


def skew_part(matrix) -> SkewOp:
    matrix = np.asarray(matrix, dtype=float)
    return SkewOp(0.5 * (matrix - matrix.T))


def _check_dims(first, second):
    if first.dim != second.dim:
        raise ValidationError(f"dimension mismatch: {first.dim} vs {second.dim}")


def identity(dim):
    return SymOp(np.eye(dim))


def zero(dim):
    return SymOp(np.zeros((dim, dim)))


def frobenius_inner(first: EndOp, second: EndOp) -> float:
    """Trace inner product sum_i <K e_i, K' e_i> = trace(K^T K')"""
    _check_dims(first, second)
    return float(np.sum(first.entries * second.entries))


def mat_exp(generator: EndOp, t: float = 1.0) -> EndOp:
    """e^{tS} by Padé scaling-and-squaring"""
    return EndOp(sla.expm(float(t) * generator.entries))


def is_orthogonal(g: EndOp, atol=1e-10):
    return bool(np.max(np.abs(g.entries @ g.entries.T - np.eye(g.dim))) <= atol)


def adjoint_action(g: EndOp, operator: EndOp) -> EndOp:
    """Conjugation g·R·g^{-1}.

    The result keeps the symmetry class of ``operator`` when g is orthogonal
    and is a plain ``EndOp`` otherwise.
    """
    _check_dims(g, operator)
    if np.linalg.cond(g.entries) > 1e12:
        raise ValidationError("adjoint action needs an invertible operator")
    left = g.entries @ operator.entries
    # X g = g R  <=>  g^T X^T = (g R)^T
    conjugated = np.linalg.solve(g.entries.T, left.T).T
    if isinstance(operator, (SymOp, SkewOp)) and is_orthogonal(g):
        if isinstance(operator, SymOp):
            return symmetric_part(conjugated)
        return skew_part(conjugated)
    return EndOp(conjugated)


def derivation_action(generator: EndOp, operator: EndOp) -> EndOp:
    """S·R = SR − RS, the derivation induced by S on End(m)"""
    _check_dims(generator, operator)
    bracket = generator.entries @ operator.entries - operator.entries @ generator.entries
    if isinstance(generator, SkewOp) and isinstance(operator, SymOp):
        return symmetric_part(bracket)
    if isinstance(generator, SkewOp) and isinstance(operator, SkewOp):
        return skew_part(bracket)
    return EndOp(bracket)


def gram_matrix(ops: Sequence[EndOp]) -> np.ndarray:
    stacked = np.array([op.entries.ravel() for op in ops])
    return stacked @ stacked.T


def numerical_rank(ops: Sequence[EndOp], tol: float = DEFAULT_SETTINGS.rank_tol, scale: float = 0.0) -> int:
    """Rank of the Gram matrix of ``ops`` under the trace inner product.

    A singular value counts when it exceeds ``tol`` times the largest one.
    ``scale`` is the natural size of the operators; Gram singular values
    below the round-off level (64 n eps scale²)² never count, so lists that
    vanish up to round-off have rank zero.
    """
    if len(ops) == 0:
        raise ValidationError("numerical_rank needs at least one operator")
    if tol <= 0:
        raise ValidationError("rank tolerance must be positive")
    for op in ops[1:]:
        _check_dims(ops[0], op)
    singular_values = np.linalg.svd(gram_matrix(ops), compute_uv=False)
    floor = (64.0 * ops[0].dim * np.finfo(float).eps * float(scale) ** 2) ** 2
    if singular_values[0] <= floor or singular_values[0] == 0.0:
        return 0
    threshold = max(tol * float(singular_values[0]), floor)
    return int(np.sum(singular_values > threshold))


def matrix_rank(matrix, rtol: float) -> int:
    """Rank of a plain matrix relative to its largest singular value"""
    singular_values = np.linalg.svd(np.asarray(matrix, dtype=float), compute_uv=False)
    if singular_values[0] == 0.0:
        return 0
    return int(np.sum(singular_values > rtol * singular_values[0]))


def random_orthogonal(dim, rng):
    """Haar-distributed orthogonal matrix, used by invariance checks"""
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    return EndOp(q * np.sign(np.diag(r)))
