import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from errors import ValidationError
from m3_geometry import Direction, M3Params, build_algebra, direction_vector, m3_structure, theta_invariants
from operator_space import SkewOp, SymOp
from osculating import OperatorCurve, rank_profile
from sample_algebras import random_directions, round_sphere_algebra


def curve_for(kappa, tau, theta, phi=0.0):
    return OperatorCurve.for_direction(build_algebra(M3Params(kappa, tau)), direction_vector(Direction(theta, phi)))


def test_curve_at_zero_is_base():
    curve = curve_for(1.0, 2.0, 0.8)
    assert curve.curve_at(0.0) is curve.base
    assert curve.max_order == 3
    assert len(curve.derivatives) == 3


def test_circle_formula_on_equator():
    curve = curve_for(1.0, 2.0, math.pi / 2)
    tau = 2.0
    d1, d2 = curve.derivative_at_zero(1).entries, curve.derivative_at_zero(2).entries
    for t in np.linspace(-2.0, 5.0, 15):
        expected = curve.base.entries + (math.sin(tau * t) * d1 + (1 - math.cos(tau * t)) / tau * d2) / tau
        np.testing.assert_allclose(curve.curve_at(t).entries, expected, atol=1e-10)


def test_hopf_curve_is_constant():
    curve = curve_for(4.0, 1.0, 0.0)
    for t in (0.3, 1.7, 11.0):
        np.testing.assert_allclose(curve.curve_at(t).entries, curve.base.entries, atol=1e-14)
        np.testing.assert_allclose(curve.tilde_curve_at(t).entries, np.zeros((3, 3)), atol=1e-14)
    assert curve.osculating_rank() == 0


def test_tilde_curve_differs_by_constant_square():
    curve = curve_for(-1.0, 0.7, 0.4, 2.0)
    square = curve.generator.square().entries
    for t in (0.0, 0.9, 4.4):
        np.testing.assert_allclose(curve.tilde_curve_at(t).entries - curve.curve_at(t).entries, square, atol=1e-14)
    equator = curve_for(1.0, 2.0, math.pi / 2)
    np.testing.assert_allclose(equator.tilde_curve_at(0.0).entries, np.diag([0.0, -3.0, 0.0]), atol=1e-14)


def test_derivative_recursions():
    curve = curve_for(1.0, 2.0, math.pi / 3)
    d = [curve.derivative_at_zero(i) for i in range(1, 5)]
    np.testing.assert_allclose(d[2].entries, -4.0 * d[0].entries, atol=1e-10)
    np.testing.assert_allclose(d[3].entries, -4.0 * d[1].entries, atol=1e-10)
    with pytest.raises(ValidationError):
        curve.derivative_at_zero(0)


@pytest.mark.parametrize("order", [1, 2])
def test_derivatives_match_finite_differences(order):
    curve = curve_for(-2.0, 1.3, 1.1, 0.6)
    h = 1e-3
    values = {k: curve.curve_at(k * h).entries for k in (-2, -1, 0, 1, 2)}
    if order == 1:
        estimate = (values[-2] - 8 * values[-1] + 8 * values[1] - values[2]) / (12 * h)
    else:
        estimate = (-values[-2] + 16 * values[-1] - 30 * values[0] + 16 * values[1] - values[2]) / (12 * h * h)
    np.testing.assert_allclose(estimate, curve.derivative_at_zero(order).entries, atol=1e-6)


@pytest.mark.parametrize("theta", [math.pi / 6, math.pi / 4, math.pi / 2, 2 * math.pi / 3])
def test_rank_two_off_the_fibers(theta):
    assert curve_for(4.0, 1.0, theta).osculating_rank() == 2


@pytest.mark.parametrize("theta", [1e-2, 3e-3, 1e-3, 1e-4, math.pi - 1e-3])
def test_rank_two_close_to_the_fibers(theta):
    assert curve_for(1.0, 2.0, theta).osculating_rank() == 2


@pytest.mark.parametrize("phi", [0.0, math.pi / 3, 1.0, 5.1])
def test_rank_is_invariant_under_rotation(phi):
    assert curve_for(0.0, 1.0, 1.2, phi).osculating_rank() == 2
    assert curve_for(0.0, 1.0, math.pi, phi).osculating_rank() == 0


def test_critical_algebra_has_rank_zero():
    critical = m3_structure(4.0, 2.0)
    for theta in (0.0, 0.4, math.pi / 2, 2.9):
        curve = OperatorCurve.for_direction(critical, direction_vector(Direction(theta)))
        assert curve.osculating_rank() == 0


def test_fit_circle_on_equator():
    fit = curve_for(1.0, 2.0, math.pi / 2).fit_circle(64)
    assert fit.radius == pytest.approx(3 * math.sqrt(2) / 2, rel=1e-8)
    assert fit.period == pytest.approx(math.pi, rel=1e-8)
    assert fit.spread < 1e-8


@given(st.floats(0.1, math.pi - 0.1), st.floats(0.0, 6.28))
@settings(max_examples=25, deadline=None)
def test_circle_centre_and_radius(theta, phi):
    p = M3Params(-1.0, 1.5)
    curve = curve_for(p.kappa, p.tau, theta, phi)
    fit = curve.fit_circle(64)
    mu = theta_invariants(p, theta).mu
    np.testing.assert_allclose(fit.center.entries, (4 * mu - 1) * curve.generator.square().entries, atol=1e-10)
    radius = math.sqrt(2) / 2 * abs(p.tau ** 2 - p.kappa) * math.sin(theta) ** 2
    assert fit.radius == pytest.approx(radius, rel=1e-8)


def test_radius_shrinks_like_sin_squared():
    ratios = [curve_for(4.0, 1.0, theta).fit_circle().radius / math.sin(theta) ** 2 for theta in (0.01, 0.5, 1.4)]
    np.testing.assert_allclose(ratios, ratios[0], rtol=1e-6)


def test_fit_circle_rejects_rank_zero_and_few_samples():
    with pytest.raises(ValidationError):
        curve_for(4.0, 1.0, 0.0).fit_circle()
    with pytest.raises(ValidationError):
        curve_for(4.0, 1.0, 1.0).fit_circle(4)


@given(st.floats(-5.0, 5.0))
@settings(max_examples=30)
def test_curve_norm_is_constant(t):
    curve = curve_for(2.0, 0.5, 0.9, 4.0)
    assert curve.curve_at(t).norm() == pytest.approx(curve.base.norm(), rel=1e-12)


def test_curve_samples_distances():
    curve = curve_for(1.0, 2.0, math.pi / 2)
    fit = curve.fit_circle()
    samples = curve.curve_samples(np.linspace(0.0, 3.0, 7), center=fit.center)
    assert samples.operators.shape == (7, 3, 3)
    np.testing.assert_allclose(samples.distances, fit.radius, rtol=1e-10)


def test_rank_profiles():
    sphere = round_sphere_algebra()
    profile = rank_profile(sphere, random_directions(3, 4))
    assert profile.ranks == (0, 0, 0, 0)
    assert profile.description == "constant rank zero"
    berger = build_algebra(M3Params(4.0, 1.0))
    mixed = rank_profile(berger, [np.array([0.0, 0.0, 1.0]), np.array([1.0, 0.0, 0.0])])
    assert mixed.ranks == (0, 2)
    assert mixed.description == "non-constant"
    assert rank_profile(berger, [np.array([1.0, 0.0, 0.0])]).description == "constant"


def test_manual_curve_validation():
    with pytest.raises(ValidationError):
        OperatorCurve(SymOp(np.eye(2)), SkewOp(np.zeros((3, 3))))
    with pytest.raises(ValidationError):
        OperatorCurve(SymOp(np.eye(3)), SkewOp(np.zeros((3, 3))), max_order=0)
