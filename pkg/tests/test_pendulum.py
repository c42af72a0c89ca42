import json
import math
from pathlib import Path

import numpy as np
import pytest

from convreach.geometry import Ball, Box
from convreach.fixtures import zero_field
from convreach.pendulum import (CellGrid, PendulumParams, abstraction_step,
                                ball_box_nonempty, cell_embedding,
                                halfspace_box_nonempty, pendulum_constants,
                                pendulum_field, pendulum_radius, sample_ball)
from convreach.reach import estimate_bounds, flow_states, l1_empirical, reach_overapprox

SCENARIO = json.loads((Path(__file__).resolve().parents[1] / "scenario.json").read_text())


def _scenario_grid():
    g = SCENARIO["grid"]
    return CellGrid.regular(g["lo"], g["cell_size"], g["shape"])


def test_pendulum_field_values():
    vf = pendulum_field(PendulumParams(1.0, 0.0, 0.0))
    assert np.allclose(vf.f(np.zeros(2)), [0.0, 0.0])
    assert np.allclose(vf.jac(np.zeros(2)), [[0.0, 1.0], [-1.0, 0.0]])
    vf2 = pendulum_field(PendulumParams(1.0, 0.01, 0.0))
    assert np.allclose(vf2.f(np.array([math.pi / 2, 1.0])), [1.0, -1.0 - 0.02])


def test_pendulum_jacobian_matches_finite_differences():
    vf = pendulum_field(PendulumParams(1.3, 0.05, -0.7))
    box = Box([-math.pi, -2.0], [math.pi, 2.0])
    assert vf.check_jacobian(box, seed=61, points=100, rtol=1e-6) <= 1e-6


def test_pendulum_params_validation():
    with pytest.raises(ValueError):
        PendulumParams(0.0)
    with pytest.raises(ValueError):
        PendulumParams(1.0, -0.1)


def test_pendulum_constants_example_step1():
    c = pendulum_constants(PendulumParams(1.0, 0.01, 0.0), 0.32)
    assert c.omega_hat == 1.0
    assert c.l1(0.32) <= 0.37
    assert c.lambda_plus <= 1.0
    assert c.lambda_minus >= -1.02
    assert c.preconditions_ok


def test_pendulum_constants_omega_hat_u_minus_one():
    c = pendulum_constants(PendulumParams(1.0, 0.0, -1.0), 0.32)
    assert c.omega_hat == pytest.approx(2.0 ** 0.25)


def test_pendulum_constants_boundary_precondition():
    # 2 * sqrt(omega_hat^2 - gamma^2) * t == pi exactly: still admissible
    c = pendulum_constants(PendulumParams(1.0, 0.0, 0.0), math.pi / 2)
    assert c.preconditions_ok
    c2 = pendulum_constants(PendulumParams(1.0, 0.0, 0.0), math.pi / 2 + 1e-6)
    assert not c2.preconditions_ok


def test_pendulum_radius_examples():
    r1 = pendulum_radius(PendulumParams(1.0, 0.01, 0.0), 0.4, 0.32)
    assert r1 is not None and r1 <= 1.24
    r2 = pendulum_radius(PendulumParams(1.0, 0.01, -1.0), 1.24, 0.32)
    assert r2 is not None and r2 <= 12.0
    # s -> 0: r -> s * exp((2 lam+ - lam-) t) * (1 + O(s))
    c = pendulum_constants(PendulumParams(1.0, 0.01, 0.0), 0.32)
    growth = math.exp((2 * c.lambda_plus - c.lambda_minus) * 0.32)
    for s in (1e-4, 1e-6):
        r = pendulum_radius(PendulumParams(1.0, 0.01, 0.0), s, 0.32)
        assert r == pytest.approx(s * growth, rel=1e-3)


def test_pendulum_radius_infeasible():
    p = PendulumParams(1.0, 0.01, 0.0)
    l1 = pendulum_constants(p, 0.32).l1(0.32)
    assert pendulum_radius(p, 1.0 / l1 + 0.1, 0.32) is None


def test_closed_form_l1_dominates_empirical():
    p = PendulumParams(1.0, 0.01, 0.0)
    vf = pendulum_field(p)
    consts = pendulum_constants(p, 0.32)
    rng = np.random.default_rng(67)
    samples = sample_ball(rng, Ball(np.zeros(2), 0.4), 12)
    for t in (0.15, 0.32):
        assert l1_empirical(vf, samples, t, h_samples=8, steps=128) <= consts.l1(t) + 1e-6


def test_closed_form_lambda_bounds_dominate_estimates():
    p = PendulumParams(1.0, 0.01, 0.0)
    consts = pendulum_constants(p, 0.32)
    vf = pendulum_field(p)
    for box in (Box([-0.5, -0.5], [0.5, 0.5]), Box([-math.pi, -2], [math.pi, 2])):
        gb = estimate_bounds(vf, box)
        assert gb.lambda_plus <= consts.lambda_plus + 1e-9
        assert gb.lambda_minus >= consts.lambda_minus - 1e-9


# ---------------------------------------------------------------------------
# grids, emptiness tests, abstraction


def test_cell_grid_and_embedding():
    grid = CellGrid.regular([0.0, 0.0], 1.0, [2, 3])
    assert len(grid) == 6
    assert grid.cell_containing(np.array([0.5, 0.5])) == 0
    assert grid.cell_containing(np.array([1.5, 2.5])) == 5
    assert grid.cell_containing(np.array([5.0, 5.0])) is None
    ball = cell_embedding(grid.boxes[0])
    assert np.allclose(ball.center, [0.5, 0.5])
    assert ball.radius == pytest.approx(math.sqrt(2) / 2)


def test_ball_box_emptiness():
    from convreach.geometry import BallIntersection, SupportPatch

    approx = BallIntersection((
        SupportPatch(np.array([1.0, 0.0]), np.array([1.0, 0.0]), 1.0),
    ))  # the unit ball
    assert ball_box_nonempty(approx, Box([0.5, 0.5], [1.5, 1.5]))
    assert not ball_box_nonempty(approx, Box([1.5, 1.5], [2.0, 2.0]))
    # touching at a single point counts as non-empty (conservative)
    assert ball_box_nonempty(approx, Box([1.0, -0.5], [2.0, 0.5]))


def test_halfspace_box_emptiness():
    from convreach.geometry import SupportPatch

    patches = (SupportPatch(np.array([1.0, 0.0]), np.array([1.0, 0.0]), 1.0),)
    assert halfspace_box_nonempty(patches, Box([0.0, 0.0], [2.0, 2.0]))
    assert not halfspace_box_nonempty(patches, Box([1.1, 0.0], [2.0, 1.0]))


def test_abstraction_zero_field_identity():
    # embedding ball stays put: transitions are the overlapped cells, and the
    # two methods agree
    grid = CellGrid.regular([-1.5, -1.5], 1.0, [3, 3])
    rep = abstraction_step(grid, 4, [0.0], PendulumParams(1.0), s=0.7072,
                           T=1.0, method="both", patches=16, steps=32, seed=1,
                           field_override=zero_field(2))
    assert rep.transitions["balls"] == rep.transitions["halfspaces"]
    targets = {t[2] for t in rep.transitions["balls"]}
    assert targets == set(range(9))  # circumscribed disk touches all neighbors
    assert rep.spurious_eliminated == 0


def test_abstraction_zero_field_small_ball_single_cell():
    grid = CellGrid.regular([-1.5, -1.5], 1.0, [3, 3])
    rep = abstraction_step(grid, Ball(np.zeros(2), 0.3), [0.0], PendulumParams(1.0),
                           s=0.3, T=1.0, method="both", patches=16, steps=32,
                           seed=1, field_override=zero_field(2))
    assert {t[2] for t in rep.transitions["balls"]} == {4}
    assert {t[2] for t in rep.transitions["halfspaces"]} == {4}


def test_abstraction_singleton_source():
    grid = _scenario_grid()
    x0 = grid.boxes[12].center
    rep = abstraction_step(grid, Ball(x0, 0.0), [0.0], PendulumParams(1.0, 0.01),
                           s=0.0, T=0.32, method="both", patches=4, steps=256,
                           seed=1)
    vf = pendulum_field(PendulumParams(1.0, 0.01, 0.0))
    target = grid.cell_containing(flow_states(vf, x0[None, :], 0.32, steps=256)[0])
    assert {t[2] for t in rep.transitions["balls"]} == {target}


def test_abstraction_rejects_oversized_cell():
    grid = CellGrid.regular([-1.5, -1.5], 1.0, [3, 3])  # half-diagonal 0.707
    with pytest.raises(ValueError):
        abstraction_step(grid, 4, [0.0], PendulumParams(1.0), s=0.4, T=0.32)


def test_abstraction_scenario_ball_subset_and_strict_reduction():
    grid = _scenario_grid()
    p = PendulumParams(SCENARIO["omega"], SCENARIO["gamma"])
    rep = abstraction_step(grid, SCENARIO["source_cell"], SCENARIO["controls"], p,
                           s=SCENARIO["s"], T=SCENARIO["T"], method="both",
                           patches=SCENARIO["patches"], steps=256,
                           seed=SCENARIO["seed"])
    balls = set(rep.transitions["balls"])
    halfs = set(rep.transitions["halfspaces"])
    assert balls <= halfs
    assert rep.spurious_eliminated >= 1


def test_abstraction_transition_soundness_monte_carlo():
    grid = _scenario_grid()
    p = PendulumParams(SCENARIO["omega"], SCENARIO["gamma"])
    rep = abstraction_step(grid, SCENARIO["source_cell"], SCENARIO["controls"], p,
                           s=SCENARIO["s"], T=SCENARIO["T"], method="both",
                           patches=SCENARIO["patches"], steps=256,
                           seed=SCENARIO["seed"])
    emb = cell_embedding(grid.boxes[SCENARIO["source_cell"]])
    pts = sample_ball(np.random.default_rng(71), emb, 2000)
    for ui, u in enumerate(SCENARIO["controls"]):
        vf = pendulum_field(PendulumParams(p.omega, p.gamma, u))
        flowed = flow_states(vf, pts, SCENARIO["T"], steps=128)
        hit = {grid.cell_containing(z) for z in flowed} - {None}
        for method in ("balls", "halfspaces"):
            listed = {t[2] for t in rep.transitions[method] if t[1] == ui}
            assert hit <= listed


def test_abstraction_deterministic_ordering():
    grid = _scenario_grid()
    p = PendulumParams(1.0, 0.01)
    kwargs = dict(s=0.4, T=0.32, method="balls", patches=4, steps=128, seed=3)
    a = abstraction_step(grid, 12, [-1.0, 0.0], p, **kwargs)
    b = abstraction_step(grid, 12, [-1.0, 0.0], p, **kwargs)
    assert a.transitions == b.transitions
    rows = a.transitions["balls"]
    assert rows == tuple(sorted(rows, key=lambda t: (t[2], t[1])))


def test_intersection_step_combines_patch_radii():
    # second-step over-approximation: patches of both operands keep their radii
    from convreach.geometry import combine_intersections

    p0 = PendulumParams(1.0, 0.01, 0.0)
    pm1 = PendulumParams(1.0, 0.01, -1.0)
    vf = pendulum_field(pm1)
    r_a = pendulum_radius(pm1, 0.4, 0.32)
    r_b = pendulum_radius(pm1, 1.24, 0.32)
    omega2 = Ball(np.array([0.2, 0.2]), 0.4)
    omega1_hat = reach_overapprox(pendulum_field(p0), Ball(np.zeros(2), 0.4),
                                  0.4, 0.32, pendulum_radius(p0, 0.4, 0.32),
                                  directions=4, steps=128)
    step_a = reach_overapprox(vf, omega2, 0.4, 0.32, r_a, directions=4, steps=128)
    step_b = reach_overapprox(vf, omega1_hat, 1.24, 0.32, r_b, directions=4, steps=128)
    combined = combine_intersections(step_a, step_b)
    radii = {round(p.radius, 6) for p in combined.patches}
    assert radii == {round(r_a, 6), round(r_b, 6)}
    # soundness: flowed samples of the intersection stay inside
    rng = np.random.default_rng(73)
    pts = [z for z in sample_ball(rng, omega2, 4000) if omega1_hat.contains(z)]
    flowed = flow_states(vf, np.asarray(pts), 0.32, steps=128)
    assert all(combined.contains(z, tol=1e-6) for z in flowed)
