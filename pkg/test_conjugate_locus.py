import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conjugate_locus import (ConjugateKind, ConjugateLocusCalculator, GeodesicClass, LocusFamily,
                             exact_closed_geodesic_invariant)
from errors import ValidationError
from m3_geometry import Direction, M3Params, theta_invariants

S0_BERGER = 3.5163  # first branch root for kappa=4, tau=1 on the equator


def calculator(kappa, tau):
    return ConjugateLocusCalculator(M3Params(kappa, tau))


@pytest.fixture
def berger():
    return calculator(4.0, 1.0)


@pytest.fixture
def heisenberg():
    return calculator(0.0, 1.0)


def test_f_theta_vanishes_on_lattice(berger):
    for theta in (0.3, math.pi / 2, 2.0):
        assert abs(berger.f_theta(theta, 2 * math.pi)) < 1e-13
        assert abs(berger.f_theta(theta, 4 * math.pi)) < 1e-13
    values = berger.f_theta(1.0, np.array([0.0, 1.0]))
    assert values.shape == (2,)
    assert values[0] == 0.0


def test_branch_root_on_berger_equator(berger):
    s0 = berger.branch_root(math.pi / 2, 0)
    assert s0 == pytest.approx(S0_BERGER, abs=1e-3)
    assert math.pi < s0 < 2 * math.pi
    assert abs(berger.f_theta(math.pi / 2, s0)) < 1e-12
    assert abs(math.tan(s0 / 2) + 1.5 * s0) < 1e-9


def test_branch_windows(berger, heisenberg):
    assert berger.branch_window(math.pi / 2, 0) == (math.pi, 2 * math.pi)
    assert berger.branch_window(math.pi / 2, 2) == pytest.approx((5 * math.pi, 6 * math.pi))
    assert heisenberg.branch_window(1.0, 1) == pytest.approx((2 * math.pi, 3 * math.pi))
    assert berger.branch_window(0.0, 1) is None
    assert heisenberg.branch_window(math.pi / 2, 1) is None
    with pytest.raises(ValidationError, match="kappa > tau\\^2"):
        heisenberg.branch_window(1.0, 0)
    for bad in (-1, 1.5):
        with pytest.raises(ValidationError):
            berger.branch_window(1.0, bad)


@given(st.floats(0.05, math.pi - 0.05), st.integers(0, 4))
@settings(max_examples=40, deadline=None)
def test_branch_roots_solve_the_equation(theta, p):
    calc = calculator(3.0, 1.2)
    s = calc.branch_root(theta, p)
    lo, hi = calc.branch_window(theta, p)
    assert lo <= s <= hi
    assert abs(calc.f_theta(theta, s)) < 1e-10 * max(1.0, s)


def test_branch_value_at_the_poles(berger, heisenberg):
    assert berger.branch_value(0.0, 0) == pytest.approx(2 * math.pi)
    assert berger.branch_value(math.pi, 1) == pytest.approx(4 * math.pi)
    assert heisenberg.branch_value(0.0, 1) == pytest.approx(2 * math.pi)
    with pytest.raises(ValidationError):
        heisenberg.branch_value(0.0, 0)
    assert berger.branch_value(1e-4, 0) == pytest.approx(2 * math.pi, abs=1e-3)


def test_conjugate_points_on_berger_equator(berger):
    first, second = berger.conjugate_points(Direction(math.pi / 2), 4.0)
    assert first.kind is ConjugateKind.NON_ISOTROPIC_BRANCH
    assert first.label == "NonIsotropicBranch(0)"
    assert first.t == pytest.approx(S0_BERGER / 2, abs=1e-3)
    assert first.multiplicity == 1 and not first.is_isotropic
    assert second.kind is ConjugateKind.ISOTROPIC_LATTICE
    assert second.t == pytest.approx(math.pi)
    assert second.p == 1 and second.multiplicity == 1 and second.is_isotropic


def test_conjugate_points_on_hopf_fibre():
    points = calculator(1.0, 2.0).conjugate_points(Direction(0.0), 10.0)
    assert [point.t for point in points] == pytest.approx([math.pi, 2 * math.pi, 3 * math.pi])
    assert all(point.kind is ConjugateKind.HOPF_FIBER for point in points)
    assert all(point.multiplicity == 2 for point in points)


def test_no_conjugate_points_without_positive_lambda():
    calc = calculator(-1.0, 1.0)
    assert calc.conjugate_points(Direction(math.pi / 2), 100.0) == []
    assert calc.conjugate_points(Direction(math.pi / 4, 1.0), 100.0) == []
    with pytest.raises(ValidationError):
        calc.conjugate_points(Direction(1.0), 0.0)


def test_kernel_of_isotropic_point_is_isotropic(berger):
    direction = Direction(math.pi / 2)
    kernel = berger.kernel_directions(direction, math.pi)
    assert kernel.shape == (3, 1)
    np.testing.assert_allclose(np.abs(kernel[:, 0]), [0.0, 1.0, 0.0], atol=1e-8)
    assert berger.solver.isotropy_test(direction, kernel[:, 0]).is_isotropic


@pytest.mark.parametrize("kappa, tau, theta", [(-0.5, 1.0, 0.6), (2.0, 0.8, 2.0), (0.5, 1.5, 0.7),
                                               (3.0, 1.0, 1.2), (-2.0, 1.5, 0.4)])
def test_conjugate_points_agree_with_determinant_scan(kappa, tau, theta):
    calc = calculator(kappa, tau)
    direction = Direction(theta, 0.8)
    points = calc.conjugate_points(direction, 15.0)
    zeros = calc.scan_conjugate_times(direction, 15.0)
    assert len(points) == len(zeros)
    for point, zero in zip(points, zeros):
        assert zero.t == pytest.approx(point.t, abs=1e-6)
        assert zero.multiplicity == point.multiplicity


def test_scan_finds_double_zeros_on_hopf_fibre():
    zeros = calculator(1.0, 2.0).scan_conjugate_times(Direction(0.0), 7.0)
    assert [zero.t for zero in zeros] == pytest.approx([math.pi, 2 * math.pi], abs=1e-6)
    assert [zero.multiplicity for zero in zeros] == [2, 2]


def test_singularity_of_stacks():
    ratios = ConjugateLocusCalculator.singularity(np.stack([np.eye(3), np.diag([1.0, 2.0, 0.0]), np.zeros((3, 3))]))
    np.testing.assert_allclose(ratios, [1.0, 0.0, 0.0])
    assert ConjugateLocusCalculator.singularity(np.diag([4.0, 2.0, 1.0])) == pytest.approx(0.25)


def test_conjugate_radii(berger, heisenberg):
    assert heisenberg.global_conjugate_radius() == pytest.approx(2 * math.pi)
    assert heisenberg.conjugate_radius(math.pi / 2) == math.inf
    assert heisenberg.conjugate_radius(0.0) == pytest.approx(2 * math.pi)
    assert heisenberg.conjugate_radius(math.pi / 4) == pytest.approx(2 * math.pi / math.sqrt(0.5))
    assert berger.global_conjugate_radius() == pytest.approx(S0_BERGER / 2, abs=1e-3)
    assert berger.conjugate_radius(math.pi / 2) == pytest.approx(berger.global_conjugate_radius())
    assert berger.conjugate_radius(math.pi) == pytest.approx(2 * math.pi)


@given(st.floats(0.01, math.pi - 0.01))
@settings(max_examples=30, deadline=None)
def test_radius_matches_first_conjugate_point(theta):
    calc = calculator(2.0, 1.0)
    radius = calc.conjugate_radius(theta)
    (first, *_) = calc.conjugate_points(Direction(theta), radius * 1.01)
    assert first.t == pytest.approx(radius, rel=1e-12)


def test_classification_and_first_family(berger):
    sl2 = calculator(-1.0, 1.0)
    assert sl2.classify_geodesic(0.0) is GeodesicClass.HOPF_FIBER
    assert sl2.classify_geodesic(math.pi / 2) is GeodesicClass.ISOTROPIC
    assert sl2.classify_geodesic(0.3) is GeodesicClass.HAS_NON_ISOTROPIC_CONJUGATES
    with pytest.raises(ValidationError):
        sl2.classify_geodesic(4.0)
    assert berger.first_conjugate_family() == (LocusFamily.S2, 0)
    assert sl2.first_conjugate_family() == (LocusFamily.S1, 1)


def test_closed_geodesic_invariants():
    assert exact_closed_geodesic_invariant(5, 1, Fraction(1, 2)) == -1
    assert exact_closed_geodesic_invariant(5, 1, Fraction(1, 2), multiple=3) == -3
    assert exact_closed_geodesic_invariant(3, 1, Fraction(1, 2)) is None
    assert exact_closed_geodesic_invariant(4, 1, 0) == 0
    with pytest.raises(ValidationError):
        exact_closed_geodesic_invariant(-1, 1, Fraction(1, 2))
    with pytest.raises(ValidationError):
        exact_closed_geodesic_invariant(5, 1, 1)

    calc = calculator(5.0, 1.0)
    assert calc.closed_geodesic_invariant(math.pi / 3, math.pi) == pytest.approx(-1.0)
    assert calc.closed_geodesic_invariant(math.pi / 3, 2 * math.pi) == pytest.approx(-2.0)
    with pytest.raises(ValidationError):
        calc.closed_geodesic_invariant(math.pi / 3, 1.0)
    with pytest.raises(ValidationError):
        calculator(0.0, 1.0).closed_geodesic_invariant(math.pi / 3, math.pi)


def test_sample_locus_examples(berger):
    thetas = [0.0, math.pi / 2]
    s1 = berger.sample_locus("S1", 1, thetas, [0.0])
    np.testing.assert_allclose(s1.samples[0, 0], [0.0, 0.0, 2 * math.pi], atol=1e-12)
    np.testing.assert_allclose(s1.samples[1, 0], [math.pi, 0.0, 0.0], atol=1e-12)
    s2 = berger.sample_locus(LocusFamily.S2, 0, thetas, [0.0])
    np.testing.assert_allclose(s2.samples[0, 0], [0.0, 0.0, 2 * math.pi], atol=1e-12)
    assert s2.samples[1, 0, 0] == pytest.approx(S0_BERGER / 2, abs=1e-3)
    np.testing.assert_allclose(s2.samples[1, 0, 1:], [0.0, 0.0], atol=1e-12)


@pytest.mark.parametrize("kappa, tau, family, p", [(4.0, 1.0, "S1", 2), (4.0, 1.0, "S2", 1),
                                                   (0.0, 1.5, "S2", 1), (-1.0, 1.0, "S1", 1)])
def test_locus_lies_on_quadric(kappa, tau, family, p):
    calc = calculator(kappa, tau)
    phis = np.linspace(0.0, 2 * math.pi, 12, endpoint=False)
    for thetas in calc.theta_segments(9):
        surface = calc.sample_locus(family, p, thetas, phis)
        assert surface.samples.shape == (9, 12, 3)
        assert surface.quadric_residual() < 1e-9


def test_sample_locus_validation(heisenberg):
    with pytest.raises(ValidationError):
        heisenberg.sample_locus("S1", 0, [1.0], [0.0])
    with pytest.raises(ValidationError):
        heisenberg.sample_locus("S2", 0, [1.0], [0.0])
    with pytest.raises(ValidationError):
        heisenberg.sample_locus("S1", 1, [math.pi / 2], [0.0])
    with pytest.raises(ValidationError):
        heisenberg.sample_locus("S1", 1, [], [0.0])
    with pytest.raises(ValueError):
        heisenberg.sample_locus("S3", 1, [1.0], [0.0])


def test_locus_frame_layout(berger):
    surface = berger.sample_locus("S1", 1, [0.5, 1.0, 1.5], [0.0, 1.0])
    frame = surface.to_frame()
    assert list(frame.columns) == ["theta", "phi", "x", "y", "z", "s"]
    assert len(frame) == 6
    assert list(frame["phi"][:2]) == [0.0, 1.0]
    assert (frame["s"] == 2 * math.pi).all()


def test_heisenberg_branch_point_matches_s2_sample():
    calc = calculator(0.0, 1.5)
    theta, phi = 0.6, 2.2
    point = calc.heisenberg_branch_point(theta, phi, 1)
    sample = calc.sample_locus("S2", 1, [theta], [phi]).samples[0, 0]
    np.testing.assert_allclose(point, sample, rtol=1e-12)
    lower = calc.heisenberg_branch_point(theta, phi, 1, sign=-1)
    assert lower[2] == pytest.approx(-point[2])
    with pytest.raises(ValidationError):
        calc.heisenberg_branch_point(math.pi / 2, 0.0, 1)
    with pytest.raises(ValidationError):
        calculator(4.0, 1.0).heisenberg_branch_point(0.5, 0.0, 1)


def test_isotropic_locus_membership(berger):
    assert berger.isotropic_locus_membership([math.pi, 0.0, 0.0])
    assert berger.isotropic_locus_membership([0.0, 2 * math.pi, 0.0])
    assert not berger.isotropic_locus_membership([0.0, 0.0, 2 * math.pi])
    assert not berger.isotropic_locus_membership([1.0, 0.0, 0.0])
    assert not berger.isotropic_locus_membership([0.0, 0.0, 0.0])


def test_theta_segments():
    (whole,) = calculator(4.0, 1.0).theta_segments(5)
    np.testing.assert_allclose(whole, np.linspace(0.0, math.pi, 5))
    params = M3Params(-1.0, 1.0)
    low, high = ConjugateLocusCalculator(params).theta_segments(11, lambda_floor=0.01)
    assert low[0] == 0.0 and high[-1] == math.pi
    assert theta_invariants(params, low[-1]).lam == pytest.approx(0.01)
    assert theta_invariants(params, high[0]).lam == pytest.approx(0.01)
    with pytest.raises(ValidationError):
        calculator(4.0, 1.0).theta_segments(1)


def test_f_curve(berger):
    frame = berger.f_curve(math.pi / 2, 10.0, samples=11)
    assert list(frame.columns) == ["s", "f_theta_s"]
    assert len(frame) == 11
    assert frame["f_theta_s"].iloc[0] == 0.0
    with pytest.raises(ValidationError):
        berger.f_curve(1.0, 0.0)
    with pytest.raises(ValidationError):
        berger.f_curve(1.0, 5.0, samples=1)
