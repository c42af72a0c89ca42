import math

import numpy as np
import pytest
from scipy.linalg import expm

from convreach.geometry import Ball, BallIntersection, Box, SupportPatch
from convreach.fixtures import linear_field, rotation_field, zero_field
from convreach.pendulum import PendulumParams, pendulum_constants, pendulum_field
from convreach.reach import (DomainExitError, GrowthBounds,
                             InfeasibleRadiusError, VectorField, estimate_bounds,
                             flow, flow_states, flowed_ball_membership,
                             l1_empirical, propagate_normal, radius_c11,
                             radius_c2, reach_overapprox, support_point,
                             trajectory_hull_box)
from convreach.pendulum import sample_ball


# ---------------------------------------------------------------------------
# flow and derived quantities


def test_flow_zero_field():
    vf = zero_field(2)
    b = flow(vf, np.array([0.3, -0.7]), 1.0, steps=16, p0=np.array([1.0, 0.0]))
    assert np.allclose(b.final_state, [0.3, -0.7])
    assert np.allclose(b.final_variational, np.eye(2))
    assert np.allclose(b.adjoint[-1], [1.0, 0.0])


def test_flow_linear_matches_matrix_exponential():
    A = np.diag([1.0, -1.0])
    b = flow(linear_field(A), np.array([1.0, 1.0]), 1.0, steps=1024)
    assert np.abs(b.final_variational - expm(A)).max() <= 1e-8
    assert np.allclose(b.variational[0], np.eye(2))


def test_flow_pendulum_energy_conservation():
    vf = pendulum_field(PendulumParams(1.0, 0.0, 0.0))
    x0 = np.array([0.1, 0.0])
    b = flow(vf, x0, 0.32, steps=1024)

    def energy(x):
        return (1.0 - math.cos(x[0])) + 0.5 * x[1] ** 2

    assert abs(energy(b.final_state) - energy(x0)) <= 1e-8


def test_flow_domain_exit():
    vf = linear_field(np.array([[1.0]]))
    with pytest.raises(DomainExitError) as err:
        flow(vf, np.array([1.0]), 3.0, steps=64, box=Box([-2.0], [2.0]))
    assert 0.0 < err.value.exit_time <= 3.0


def test_variational_matches_finite_differences():
    vf = pendulum_field(PendulumParams(1.0, 0.01, 0.0))
    rng = np.random.default_rng(43)
    x0 = np.array([0.2, -0.1])
    b = flow(vf, x0, 0.32, steps=512)
    eps = 1e-5
    for _ in range(5):
        h = rng.standard_normal(2)
        h /= np.linalg.norm(h)
        fd = (flow(vf, x0 + eps * h, 0.32, steps=512).final_state - b.final_state) / eps
        exact = b.final_variational @ h
        assert np.linalg.norm(fd - exact) <= 1e-3 * max(1.0, np.linalg.norm(exact))


def test_adjoint_variational_pairing_is_first_integral():
    vf = pendulum_field(PendulumParams(1.0, 0.01, 0.0))
    p0 = np.array([0.6, 0.8])
    b = flow(vf, np.array([0.2, 0.1]), 0.32, steps=256, p0=p0)
    h = np.array([-0.3, 1.1])
    pairing = np.einsum("ki,kij,j->k", b.adjoint, b.variational, h)
    assert np.abs(pairing - pairing[0]).max() <= 1e-8


def test_propagate_normal_examples():
    # identity flow keeps the normal
    b0 = flow(zero_field(2), np.zeros(2), 1.0, steps=8)
    assert np.allclose(propagate_normal(b0, np.array([0.0, 1.0])), [0.0, 1.0])
    # diagonal linear field preserves axis directions
    bd = flow(linear_field(np.diag([1.0, -1.0])), np.zeros(2), 1.0, steps=256)
    assert np.allclose(propagate_normal(bd, np.array([1.0, 0.0])), [1.0, 0.0],
                       atol=1e-12)
    # rotation rotates normals with the flow
    br = flow(rotation_field(), np.array([1.0, 0.0]), math.pi / 2, steps=1024)
    assert np.allclose(propagate_normal(br, np.array([1.0, 0.0])), [0.0, 1.0],
                       atol=1e-9)


def test_variational_norm_bounds_from_lambda():
    # ||Y(t)|| <= exp(lambda_+ t) and ||Y(t)^-1|| <= exp(-lambda_- t)
    for vf, box in [
        (pendulum_field(PendulumParams(1.0, 0.01, 0.0)), Box([-math.pi, -2], [math.pi, 2])),
        (linear_field(np.array([[0.3, 1.0], [-0.2, -0.5]])), Box([-1, -1], [1, 1])),
    ]:
        gb = estimate_bounds(vf, box, grid_points=21)
        for x0 in [np.array([0.1, 0.2]), np.array([-0.4, 0.3])]:
            b = flow(vf, x0, 0.32, steps=512)
            Y = b.final_variational
            assert np.linalg.norm(Y, 2) <= math.exp(gb.lambda_plus * 0.32) + 1e-9
            assert np.linalg.norm(np.linalg.inv(Y), 2) <= math.exp(-gb.lambda_minus * 0.32) + 1e-9


# ---------------------------------------------------------------------------
# growth bounds


def test_estimate_bounds_constant_jacobian():
    A = np.array([[0.0, 2.0], [0.0, 0.0]])
    gb = estimate_bounds(linear_field(A), Box([-1, -1], [1, 1]), grid_points=5)
    # symmetric part eigenvalues are exactly +-1
    assert gb.lambda_plus == pytest.approx(1.0, abs=1e-12)
    assert gb.lambda_minus == pytest.approx(-1.0, abs=1e-12)
    assert gb.m1 == pytest.approx(3.0, abs=1e-12)
    assert gb.m2 == 0.0 and not gb.m2_heuristic


def test_estimate_bounds_pendulum_paper_values():
    vf = pendulum_field(PendulumParams(1.0, 0.01, 0.0))
    gb = estimate_bounds(vf, Box([-math.pi, -2.0], [math.pi, 2.0]))
    assert gb.lambda_plus <= 1.0
    assert gb.lambda_minus >= -1.02
    assert not gb.m2_heuristic  # exact Lipschitz constant shipped with the field


def test_estimate_bounds_heuristic_m2():
    vf = VectorField(
        dim=2,
        f=lambda x: np.stack([np.sin(np.asarray(x)[..., 1]),
                              np.zeros_like(np.asarray(x)[..., 0])], axis=-1),
        jac=lambda x: np.array([[0.0, math.cos(x[1])], [0.0, 0.0]]),
    )
    gb = estimate_bounds(vf, Box([-2, -2], [2, 2]), seed=47)
    assert gb.m2_heuristic
    # true Lipschitz constant of the Jacobian is 1; the estimate inflates by 1.1
    assert 1.0 <= gb.m2 <= 1.1 + 1e-9


def test_trajectory_hull_box_covers_flow():
    vf = rotation_field()
    pts = np.array([[1.0, 0.0], [0.9, 0.1]])
    hull = trajectory_hull_box(vf, pts, math.pi, steps=128, inflate=0.05)
    assert hull.contains(np.array([-1.0, 0.0]))


# ---------------------------------------------------------------------------
# radius formulas


def _bounds(m1, m2, lam_minus, lam_plus):
    return GrowthBounds(m1=m1, m2=m2, lambda_minus=lam_minus, lambda_plus=lam_plus,
                        box=Box([-1, -1], [1, 1]))


def test_radius_c11_linear_field_closed_form():
    b = _bounds(0.7, 0.0, -0.2, 0.5)
    r = radius_c11(0.3, 2.0, b)
    assert r == pytest.approx(0.3 * math.exp((2 * 0.5 + 0.2) * 2.0))


def test_radius_c11_infeasible_boundary():
    # s * M2 * I == 1 exactly: infeasible
    b = _bounds(0.0, 1.0, -1.0, 1.0)  # |M1| ~ 0 so I = t
    assert radius_c11(0.5, 2.0, b) is None


def test_radius_c11_vs_c2_pendulum():
    # c2 with the closed-form L1 must be tighter than c11 with M2 = 1
    consts = pendulum_constants(PendulumParams(1.0, 0.01, 0.0), 0.32)
    b = _bounds(2 * consts.lambda_plus - consts.lambda_minus, 1.0,
                consts.lambda_minus, consts.lambda_plus)
    r11 = radius_c11(0.4, 0.32, b)
    r2 = radius_c2(0.4, 0.32, consts.l1(0.32), b)
    assert r11 is not None and r2 is not None
    assert 0.4 < r2 < r11


def test_radius_c2_examples():
    b = _bounds(3.0, 0.0, -1.01005, 0.99005)
    r = radius_c2(0.4, 0.32, 0.36467, b)
    assert r == pytest.approx(0.4 * math.exp(2.99015 * 0.32) / (1 - 0.4 * 0.36467), rel=1e-9)
    assert r <= 1.24
    assert radius_c2(0.4, 0.32, 0.0, b) == pytest.approx(0.4 * math.exp(2.99015 * 0.32))
    assert radius_c2(0.5, 1.0, 2.0, b) is None  # s L1 = 1


def test_radius_monotone_in_s_and_l1_and_limits():
    b = _bounds(1.5, 0.5, -0.5, 0.5)
    rs = [radius_c11(s, 1.0, b) for s in (0.1, 0.2, 0.4)]
    assert rs[0] < rs[1] < rs[2]
    l1s = [radius_c2(0.3, 1.0, l1, b) for l1 in (0.0, 0.5, 1.5)]
    assert l1s[0] < l1s[1] < l1s[2]
    # r -> s as t -> 0 for both formulas
    for t in (1e-6, 1e-9):
        assert radius_c11(0.3, t, b) == pytest.approx(0.3, rel=1e-5)
        assert radius_c2(0.3, t, 0.5, b) == pytest.approx(0.3 / (1 - 0.15), rel=1e-5)


# ---------------------------------------------------------------------------
# L1 empirical


def test_l1_empirical_linear_field_zero():
    vf = linear_field(np.array([[0.0, 1.0], [-1.0, 0.0]]))
    vf2 = VectorField(dim=2, f=vf.f, jac=vf.jac,
                      hess_quadform=lambda x, h: np.zeros(2))
    samples = np.array([[0.1, 0.0], [0.0, 0.2]])
    assert l1_empirical(vf2, samples, 0.5, h_samples=4, steps=32) == 0.0


def test_l1_empirical_pendulum_below_closed_form():
    p = PendulumParams(1.0, 0.01, 0.0)
    vf = pendulum_field(p)
    consts = pendulum_constants(p, 0.32)
    rng = np.random.default_rng(53)
    samples = sample_ball(rng, Ball(np.zeros(2), 0.3), 16)
    val = l1_empirical(vf, samples, 0.32, h_samples=8, steps=128)
    assert 0.0 < val <= consts.l1(0.32) + 1e-6
    assert val <= 0.37


def test_l1_empirical_requires_c2():
    vf = VectorField(dim=2, f=lambda x: np.zeros(2), jac=lambda x: np.zeros((2, 2)))
    with pytest.raises(ValueError):
        l1_empirical(vf, np.zeros((1, 2)), 0.1)


def test_l1_empirical_short_horizon_near_zero():
    vf = pendulum_field(PendulumParams(1.0, 0.01, 0.0))
    val = l1_empirical(vf, np.array([[0.1, 0.1]]), 1e-6, h_samples=4, steps=8)
    assert val <= 1e-5


# ---------------------------------------------------------------------------
# support points and over-approximation


def test_support_point_single_ball_exact():
    ball = Ball(np.array([1.0, 2.0]), 0.5)
    v = np.array([0.0, 1.0])
    assert np.allclose(support_point(ball, v), [1.0, 2.5])


def test_support_point_intersection():
    # two unit balls through (+-1, 0): intersection is the unit-lens around 0
    patches = (
        SupportPatch(np.array([1.0, 0.0]), np.array([1.0, 0.0]), 1.0),
        SupportPatch(np.array([-1.0, 0.0]), np.array([-1.0, 0.0]), 1.0),
    )
    approx = BallIntersection(patches)  # both balls equal the unit ball
    z = support_point(approx, np.array([0.0, 1.0]))
    assert np.allclose(z, [0.0, 1.0], atol=1e-6)


def test_reach_overapprox_identity_flow():
    init = Ball(np.zeros(2), 0.4)
    approx = reach_overapprox(zero_field(2), init, 0.4, 1.0, 0.4, directions=4,
                              steps=16)
    assert len(approx.patches) == 4
    # all four supporting balls coincide with the initial ball
    rng = np.random.default_rng(59)
    for z in sample_ball(rng, init, 200):
        assert approx.contains(z, tol=1e-9)


def test_reach_overapprox_rotation_contains_rotated_ball():
    init = Ball(np.array([1.0, 0.0]), 0.1)
    approx = reach_overapprox(rotation_field(), init, 0.1, math.pi / 2, 0.1,
                              directions=8, steps=512)
    center = np.array([0.0, 1.0])
    for ang in np.linspace(0, 2 * math.pi, 64):
        z = center + 0.1 * np.array([math.cos(ang), math.sin(ang)])
        assert approx.contains(z, tol=1e-6)


def test_reach_overapprox_infeasible_radius():
    with pytest.raises(InfeasibleRadiusError):
        reach_overapprox(zero_field(2), Ball(np.zeros(2), 0.1), 0.1, 1.0, None)


def test_reach_overapprox_singleton():
    approx = reach_overapprox(rotation_field(), Ball(np.array([1.0, 0.0]), 0.0),
                              0.0, math.pi / 2, 0.25, steps=256)
    assert len(approx.patches) == 1
    assert np.allclose(approx.patches[0].point, [0.0, 1.0], atol=1e-9)


def test_flowed_ball_membership_polygon():
    member = flowed_ball_membership(rotation_field(), Ball(np.zeros(2), 0.5),
                                    math.pi / 4, boundary_points=512, steps=128)
    assert member.contains(np.zeros(2))
    assert member.contains(np.array([0.45, 0.0]))
    assert not member.contains(np.array([0.55, 0.0]))


def test_flow_states_batch_matches_single():
    vf = pendulum_field(PendulumParams(1.0, 0.01, 0.0))
    x0 = np.array([[0.1, 0.2], [-0.3, 0.05]])
    batch = flow_states(vf, x0, 0.32, steps=256)
    for k in range(2):
        single = flow(vf, x0[k], 0.32, steps=256).final_state
        assert np.allclose(batch[k], single, atol=1e-12)
