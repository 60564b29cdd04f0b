from dataclasses import dataclass, replace


@dataclass(frozen=True)
class NumericalSettings:
    """Tolerances and step sizes used across the package.

    There are no configuration files or environment variables; the CLI builds
    an instance from its flags and every calculator accepts one in its
    constructor.
    """

    # operator space
    rank_tol: float = 1e-9
    symmetry_tol: float = 1e-12

    # reductive core
    natural_reductivity_tol: float = 1e-10
    jacobi_identity_tol: float = 1e-10
    unit_norm_tol: float = 1e-10
    bi_invariant_tol: float = 1e-10

    # osculating curves
    circle_spread_tol: float = 1e-8
    circle_min_samples: int = 8

    # Jacobi fields
    lambda_zero_tol: float = 1e-9
    rk4_step: float = 1e-3
    isotropy_angle_tol: float = 1e-10

    # conjugate locus
    bisection_xtol: float = 1e-15
    bisection_maxiter: int = 200
    lattice_collision_tol: float = 1e-10
    conjugate_det_tol: float = 1e-8
    conjugate_rank_tol: float = 1e-8
    lattice_multiple_tol: float = 1e-9
    membership_tol: float = 1e-9

    def with_overrides(self, **overrides):
        """Copy with the non-None overrides applied"""
        changes = {key: value for key, value in overrides.items() if value is not None}
        return replace(self, **changes)


DEFAULT_SETTINGS = NumericalSettings()
