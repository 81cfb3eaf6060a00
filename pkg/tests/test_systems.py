# Copyright (c) 2024 The wh-cert-lib authors
# SPDX-License-Identifier: AGPL-3.0

import numpy as np
import pytest

from wh_cert_lib.classes.polynomial import Polynomial
from wh_cert_lib.classes.system import AugmentedState, LinearController, PolynomialSystem, Strategy
from wh_cert_lib.exceptions import DegreeError, DimensionError
from wh_cert_lib.utils.dynamics_utils import iterate_open, step_closed, step_open, step_open_hold, step_open_zero
from wh_cert_lib.utils.polynomial_utils import poly_compose, poly_eval
from wh_cert_lib.utils.set_utils import box, ellipsoid, membership, sample_set


def test_closed_loop_step_of_the_academic_system(academic_system, academic_controller):
    x = step_closed(academic_system, academic_controller, np.array([1.0, 0.0]))
    np.testing.assert_allclose(x, [-0.5, 0.5])


def test_zero_gain_reduces_to_the_open_loop(academic_system):
    x = np.array([0.3, -1.2])
    np.testing.assert_allclose(step_closed(academic_system, LinearController(np.zeros((1, 2))), x), academic_system.A @ x)


def test_open_loop_steps(academic_system):
    np.testing.assert_allclose(step_open_zero(academic_system, np.array([1.0, 0.0])), [0.0, 1.0])
    np.testing.assert_allclose(step_open_zero(academic_system, np.zeros(2)), [0.0, 0.0])


def test_held_input_is_applied_and_kept(academic_system):
    aug = step_open_hold(academic_system, AugmentedState([1.0, 0.0], [1.0]))
    np.testing.assert_allclose(aug.x, [1.0, 2.0])
    np.testing.assert_allclose(aug.u_held, [1.0])
    twice = step_open_hold(academic_system, aug)
    np.testing.assert_allclose(twice.u_held, [1.0])
    zero = step_open_hold(academic_system, AugmentedState([1.0, 0.0], [0.0]))
    np.testing.assert_allclose(zero.x, step_open(academic_system, Strategy.ZERO, np.array([1.0, 0.0])))


def test_iterate_open_zero_strategy(academic_system, academic_controller):
    A, B, K = academic_system.A, academic_system.B, academic_controller.K
    x = np.array([0.4, -0.1])
    np.testing.assert_allclose(
        iterate_open(academic_system, academic_controller, "zero", x, 0), step_closed(academic_system, academic_controller, x)
    )
    np.testing.assert_allclose(
        iterate_open(academic_system, academic_controller, "zero", x, 2), A @ A @ (A + B @ K) @ x
    )


def test_iterate_open_hold_strategy(academic_system, academic_controller):
    A, B, K = academic_system.A, academic_system.B, academic_controller.K
    x = np.array([0.4, -0.1])
    expected = A @ ((A + B @ K) @ x) + B @ (K @ x)
    np.testing.assert_allclose(iterate_open(academic_system, academic_controller, "hold", x, 1), expected)


def test_iterate_open_works_on_batches(academic_system, academic_controller):
    xs = np.array([[0.4, -0.1], [1.0, 0.0]])
    batch = iterate_open(academic_system, academic_controller, "hold", xs, 2)
    single = [iterate_open(academic_system, academic_controller, "hold", x, 2) for x in xs]
    np.testing.assert_allclose(batch, single)


def test_platoon_steps(case_study_3):
    system, controller = case_study_3.system, case_study_3.controller
    np.testing.assert_allclose(step_open_zero(system, np.array([0.0, 0.0])), [1.495, 1.495])
    x = np.array([2.0, 5.0])
    np.testing.assert_allclose(controller(x), [-2.5])
    np.testing.assert_allclose(step_closed(system, controller, x), [0.715, 4.995], atol=1e-12)


def test_linear_system_embeds_as_polynomials(academic_system):
    poly = academic_system.to_polynomial()
    x, u = np.array([0.3, -0.7]), np.array([0.25])
    np.testing.assert_allclose(poly.step(x, u), academic_system.step(x, u))


def test_step_rejects_wrong_dimensions(academic_system):
    with pytest.raises(DimensionError):
        academic_system.step(np.zeros(3), np.zeros(1))


def test_poly_compose_substitutes_exactly():
    p = Polynomial.from_expression("x1**2", ["x1"])
    maps = [Polynomial.from_expression("x1 + x2", ["x1", "x2"])]
    expected = Polynomial.from_expression("x1**2 + 2*x1*x2 + x2**2", ["x1", "x2"])
    assert poly_compose(p, maps) == expected


def test_identity_composition():
    ring = ["x1", "x2"]
    p = Polynomial.from_expression("3*x1**2*x2 - x2 + 1/7", ring)
    identity = [Polynomial.variable(v, ring) for v in ring]
    assert poly_compose(p, identity) == p


def test_composition_degree_cap():
    p = Polynomial.from_expression("x1**3", ["x1"])
    maps = [Polynomial.from_expression("x1**5", ["x1"])]
    with pytest.raises(DegreeError):
        poly_compose(p, maps, degree_cap=12)


def test_platoon_double_step_composition(case_study_3):
    system: PolynomialSystem = case_study_3.system
    ring = ["x1", "x2"]
    xs = [Polynomial.variable(v, ring) for v in ring]
    zero = [Polynomial.constant(0, ring)]
    once = [poly_compose(f, xs + zero) for f in system.as_polynomials()]
    twice = [poly_compose(f, once + zero) for f in system.as_polynomials()]

    points = np.random.default_rng(0).uniform(0, 10, size=(100, 2))
    expected = step_open_zero(system, step_open_zero(system, points))
    composed = np.stack([poly_eval(p, points) for p in twice], axis=-1)
    assert np.max(np.abs(composed - expected)) < 1e-9


def test_polynomial_parameters_are_exact():
    p = Polynomial.from_expression("c_u - gamma1 + x1", ["x1"], {"c_u": 1.5, "gamma1": 0.005})
    assert poly_eval(p, np.array([0.0])) == pytest.approx(1.495)


def test_ellipsoid_membership():
    circle = ellipsoid([0, 0], [1, 1])
    assert membership(circle, np.array([0.0, 0.0]))
    case_1 = ellipsoid([0, 0], [0.4, 0.4])
    assert membership(case_1, np.array([0.4, 0.0]))
    assert not membership(case_1, np.array([0.41, 0.0]))


def test_case_study_2_initial_set(case_study_2):
    assert not case_study_2.sets.X0.contains(np.array([0.5, 0.0]))
    assert case_study_2.sets.X0.contains(np.array([0.2, 0.0]))


def test_box_membership_and_bounds():
    b = box([-1, 0], [1, 2])
    assert b.contains(np.array([0.0, 1.0]))
    assert not b.contains(np.array([1.5, 1.0]))
    np.testing.assert_allclose(b.bounds[0], [-1, 0])
    with pytest.raises(ValueError):
        box([1, 0], [0, 1])


def test_samples_stay_inside_the_set():
    s = ellipsoid([1, -1], [0.5, 0.2])
    points = sample_set(s, 500, seed=1)
    assert len(points) == 500
    assert np.all(s.contains(points, tol=1e-9))
    np.testing.assert_allclose(points, sample_set(s, 500, seed=1))
