import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from errors import ValidationError
from jacobi_fields import Branch, JacobiSolver, Trajectory, integrate_numeric, isotropy_test
from m3_geometry import Direction, M3Params, direction_vector, theta_invariants, unimodular_algebra

# (kappa, tau, theta, phi), one per branch
CASES = [
    (4.0, 1.0, 0.0, 0.0),
    (2.0, 1.5, 1.1, 0.7),
    (-1.0, 1.0, math.pi / 4, 2.0),
    (-1.0, 1.0, math.pi / 2, 0.0),
    (0.0, 0.8, 2.5, 4.0),
    (-3.0, 2.0, math.pi, 1.3),
]


def solver_for(kappa, tau):
    return JacobiSolver(M3Params(kappa, tau))


def test_branch_selection():
    solver = solver_for(-1.0, 1.0)
    assert solver.branch_for(Direction(0.0)) is Branch.HOPF_FIBER
    assert solver.branch_for(Direction(math.pi)) is Branch.HOPF_FIBER
    assert solver.branch_for(Direction(0.3)) is Branch.LAMBDA_POSITIVE
    assert solver.branch_for(Direction(math.pi / 4)) is Branch.LAMBDA_ZERO
    assert solver.branch_for(Direction(math.pi / 2)) is Branch.LAMBDA_NEGATIVE
    assert solver_for(4.0, 1.0).branch_for(Direction(math.pi / 2)) is Branch.LAMBDA_POSITIVE


@pytest.mark.parametrize("kappa, tau, theta, phi", CASES)
def test_initial_conditions(kappa, tau, theta, phi):
    xprime0 = np.array([0.4, -1.2, 0.9])
    solution = solver_for(kappa, tau).solve_closed_form(Direction(theta, phi), xprime0)
    np.testing.assert_allclose(solution.evaluate(0.0), np.zeros(3), atol=1e-15)
    h = 1e-6
    slope = (solution.evaluate(h) - solution.evaluate(-h)) / (2 * h)
    np.testing.assert_allclose(slope, xprime0, atol=1e-7)


@pytest.mark.parametrize("kappa, tau, theta, phi", CASES)
def test_closed_form_solves_jacobi_equation(kappa, tau, theta, phi):
    solver = solver_for(kappa, tau)
    direction = Direction(theta, phi)
    solution = solver.solve_closed_form(direction, [1.0, 0.5, -0.3])
    u = direction_vector(direction)
    torsion = solver.algebra.torsion(u).entries
    curvature = solver.algebra.canonical_curvature(u).entries
    t, h = 1.3, 1e-4
    before, here, after = solution.evaluate([t - h, t, t + h])
    second = (after - 2 * here + before) / h ** 2
    first = (after - before) / (2 * h)
    residual = second - torsion @ first + curvature @ here
    assert np.linalg.norm(residual) < 1e-5


@pytest.mark.parametrize("kappa, tau, theta, phi", CASES)
def test_closed_form_matches_rk4(kappa, tau, theta, phi):
    solver = solver_for(kappa, tau)
    direction = Direction(theta, phi)
    xprime0 = np.array([-0.2, 0.7, 1.0])
    trajectory = integrate_numeric(solver.algebra, direction_vector(direction), xprime0, 5.0, step=1e-3)
    reference = solver.solve_closed_form(direction, xprime0).evaluate(trajectory.times)
    assert trajectory.relative_error(reference) < 1e-6


@given(st.floats(0.05, math.pi - 0.05), st.floats(-2.0, 2.0), st.floats(-2.0, 2.0))
@settings(max_examples=40, deadline=None)
def test_solutions_are_linear(theta, a, b):
    solver = solver_for(-0.5, 1.2)
    direction = Direction(theta, 0.9)
    v, w = np.array([1.0, 0.0, 0.3]), np.array([0.0, -0.4, 1.0])
    times = np.linspace(0.0, 4.0, 9)
    combined = solver.solve_closed_form(direction, a * v + b * w).evaluate(times)
    separate = a * solver.solve_closed_form(direction, v).evaluate(times) \
        + b * solver.solve_closed_form(direction, w).evaluate(times)
    np.testing.assert_allclose(combined, separate, atol=1e-10)


def test_hopf_fibre_field():
    tau = 2.0
    solution = solver_for(1.0, tau).solve_closed_form(Direction(0.0), [0.0, tau, 0.0])
    assert solution.branch is Branch.HOPF_FIBER
    assert solution.coefficients == pytest.approx((1.0, 0.0, 0.0))
    times = np.linspace(0.0, 3.0, 7)
    expected = np.column_stack([1 - np.cos(tau * times), np.sin(tau * times), np.zeros_like(times)])
    np.testing.assert_allclose(solution.evaluate(times), expected, atol=1e-14)


def test_hopf_coefficients_follow_initial_derivative():
    tau = 1.5
    solution = solver_for(4.0, tau).solve_closed_form(Direction(0.0), [-0.6, 0.3, 2.0])
    a, b, c = solution.coefficients
    assert (-b * tau, a * tau, c) == pytest.approx((-0.6, 0.3, 2.0))


def test_isotropic_field_closes_up():
    solver = solver_for(4.0, 1.0)
    direction = Direction(1.0, 0.4)
    lam = theta_invariants(solver.params, direction.theta).lam
    xprime0 = solver.isotropic_initial_derivative(direction)
    solution = solver.solve_closed_form(direction, xprime0)
    np.testing.assert_allclose(solution.evaluate(2 * math.pi / math.sqrt(lam)), np.zeros(3), atol=1e-12)
    verdict = solver.isotropy_test(direction, xprime0)
    assert verdict.is_isotropic
    assert verdict.killing_coefficient == pytest.approx(lam / math.sin(direction.theta))


def test_isotropy_verdicts():
    solver = solver_for(4.0, 1.0)
    assert not solver.isotropy_test(Direction(1.0), [1.0, 0.0, 0.0]).is_isotropic
    zero = solver.isotropy_test(Direction(1.0), np.zeros(3))
    assert zero.is_isotropic and zero.killing_coefficient == 0.0
    hopf = solver.isotropy_test(Direction(0.0), [0.0, 1.0, 0.0])
    assert not hopf.is_isotropic and hopf.killing_coefficient is None
    group = unimodular_algebra(M3Params(4.0, 1.0))
    assert not isotropy_test(group, np.array([1.0, 0.0, 0.0]), [0.0, 1.0, 0.0]).is_isotropic


def test_solution_matrix_is_singular_at_isotropic_lattice():
    solver = solver_for(4.0, 1.0)
    direction = Direction(math.pi / 2)
    singular = np.linalg.svd(solver.solution_matrix(direction, math.pi).entries, compute_uv=False)
    regular = np.linalg.svd(solver.solution_matrix(direction, 1.0).entries, compute_uv=False)
    assert singular[-1] / singular[0] < 1e-8
    assert regular[-1] / regular[0] > 1e-3


@pytest.mark.parametrize("kappa, tau, theta, phi", CASES)
def test_determinant_matches_solution_matrix(kappa, tau, theta, phi):
    solver = solver_for(kappa, tau)
    direction = Direction(theta, phi)
    times = np.array([0.5, 1.3, 2.7])
    closed = solver.determinant(direction, times)
    for t, value in zip(times, closed):
        matrix = solver.solution_matrix(direction, t).entries
        bound = np.prod(np.linalg.norm(matrix, axis=0))
        assert abs(value - np.linalg.det(matrix)) <= 1e-9 * bound


def test_determinant_stays_positive_when_lambda_is_negative():
    solver = solver_for(-1.89, 1.638)
    direction = Direction(1.4742)
    assert theta_invariants(solver.params, direction.theta).lam < -1.8
    values = solver.determinant(direction, np.arange(1, 50001) * 1e-3)
    assert np.all(np.isfinite(values))
    assert np.all(values > 0)


def test_determinant_on_hopf_fibre_touches_zero():
    tau = 2.0
    solver = solver_for(1.0, tau)
    times = np.array([math.pi / tau, 2 * math.pi / tau])
    expected = 2 * times * (1 - np.cos(tau * times)) / tau ** 2
    np.testing.assert_allclose(solver.determinant(Direction(0.0), times), expected, atol=1e-14)


@pytest.mark.parametrize("sign", [1.0, -1.0])
def test_fields_are_continuous_across_lambda_zero(sign):
    # λ(θ) = cos 2θ for κ = −1, τ = 1
    solver = solver_for(-1.0, 1.0)
    near = Direction(math.acos(sign * 1e-8) / 2.0, 0.3)
    flat = Direction(math.pi / 4, 0.3)
    assert theta_invariants(solver.params, near.theta).lam == pytest.approx(sign * 1e-8, rel=1e-6)
    assert solver.branch_for(flat) is Branch.LAMBDA_ZERO
    expected_branch = Branch.LAMBDA_POSITIVE if sign > 0 else Branch.LAMBDA_NEGATIVE
    assert solver.branch_for(near) is expected_branch
    xprime0 = np.array([0.4, -1.2, 0.9])
    times = np.linspace(0.0, 4.0, 9)
    np.testing.assert_allclose(solver.solve_closed_form(near, xprime0).evaluate(times),
                               solver.solve_closed_form(flat, xprime0).evaluate(times), atol=1e-6)


def test_solve_rejects_bad_initial_derivative():
    solver = solver_for(4.0, 1.0)
    with pytest.raises(ValidationError):
        solver.solve_closed_form(Direction(1.0), [1.0, 2.0])
    with pytest.raises(ValidationError):
        solver.solve_closed_form(Direction(1.0), [1.0, float("inf"), 0.0])


def test_trajectory_frame_and_step_adjustment():
    solver = solver_for(0.0, 1.0)
    trajectory = integrate_numeric(solver.algebra, np.array([1.0, 0.0, 0.0]), [0.0, 1.0, 0.0], 1.0, step=0.3)
    assert len(trajectory.times) == 5
    assert trajectory.times[-1] == pytest.approx(1.0)
    frame = trajectory.to_frame()
    assert list(frame.columns) == ["t", "x1", "x2", "x3", "w1", "w2", "w3"]
    assert frame["w2"].iloc[0] == 1.0


def test_trajectory_relative_error_uses_unit_floor():
    positions = np.array([[0.0, 0.0, 0.0], [0.1, 0.0, 0.0]])
    trajectory = Trajectory(np.array([0.0, 1.0]), positions, positions)
    assert trajectory.relative_error(np.zeros((2, 3))) == pytest.approx(0.1)


def test_integrate_numeric_validation():
    algebra = solver_for(4.0, 1.0).algebra
    u = np.array([1.0, 0.0, 0.0])
    with pytest.raises(ValidationError):
        integrate_numeric(algebra, u, [0.0, 1.0, 0.0], 1.0, step=0.0)
    with pytest.raises(ValidationError):
        integrate_numeric(algebra, u, [0.0, 1.0, 0.0], -1.0)
    with pytest.raises(ValidationError):
        integrate_numeric(algebra, 2.0 * u, [0.0, 1.0, 0.0], 1.0)
