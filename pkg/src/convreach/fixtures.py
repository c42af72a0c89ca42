"""Built-in constraint-set and vector-field fixtures.

The constraint fixtures reproduce the running examples: the unit disk, the
diag(1,4) ellipse, the annulus (empty cone interior everywhere), the
two-disk set (dependent gradients at (1,0)), the non-convex 3-D five-
constraint set, the quartic disk and a half-plane.  Measure-zero fixtures
ship their own member-point and boundary samplers since rejection sampling
cannot find them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, Optional, Sequence

import numpy as np

from .geometry import Box, MembershipPredicate
from .polynomials import Polynomial
from .sublevel import (BoundarySampler, ConstraintFunction, FixedPointsSampler,
                       SublevelSet)
from .reach import VectorField
from .pendulum import PendulumParams, pendulum_field


@dataclass(frozen=True)
class Fixture:
    """A named sublevel set with samplers suited to its geometry."""

    name: str
    set: SublevelSet
    boundary_sampler: Optional[BoundarySampler] = None
    point_sampler: Optional[Callable[[np.random.Generator, int], np.ndarray]] = None

    def membership(self) -> MembershipPredicate:
        return self.set.membership_predicate(point_sampler=self.point_sampler)


def constraint_from_polynomial(poly: Polynomial, name: str = "") -> ConstraintFunction:
    """Exact-derivative constraint from a polynomial."""
    return ConstraintFunction(
        value=poly.__call__,
        gradient=poly.gradient,
        hessian_quadform=poly.hessian_quadform,
        name=name,
        value_batch=poly.__call__,
    )


def field_from_polynomials(polys: Sequence[Polynomial], name: str = "") -> VectorField:
    """Vector field with exact Jacobian/second form from component polynomials."""
    polys = list(polys)
    n = len(polys)
    if any(p.nvars != n for p in polys):
        raise ValueError("need one n-variable polynomial per component")

    def f(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return np.array([p(x) for p in polys])
        flat = x.reshape(-1, n)
        out = np.array([[p(row) for p in polys] for row in flat])
        return out.reshape(x.shape)

    def jac(x: np.ndarray) -> np.ndarray:
        return np.array([p.gradient(x) for p in polys])

    def hess_quadform(x: np.ndarray, h: np.ndarray) -> np.ndarray:
        return np.array([p.hessian_quadform(x, h) for p in polys])

    return VectorField(dim=n, f=f, jac=jac, hess_quadform=hess_quadform, name=name)


def quadratic_constraint(P: np.ndarray, name: str = "") -> ConstraintFunction:
    """g(x) = <x, Px> - 1 with exact derivatives."""
    P = np.asarray(P, dtype=float)
    return ConstraintFunction(
        value=lambda x: float(x @ P @ x) - 1.0,
        gradient=lambda x: 2.0 * (P @ x),
        hessian_quadform=lambda x, h: 2.0 * float(h @ P @ h),
        name=name,
        value_batch=lambda pts: np.einsum("...i,ij,...j->...", pts, P, pts) - 1.0,
    )


# ---------------------------------------------------------------------------
# constraint fixtures


def disk_fixture(box_half: float = 2.0) -> Fixture:
    g = quadratic_constraint(np.eye(2), name="unit-disk")
    box = Box([-box_half, -box_half], [box_half, box_half])
    return Fixture("disk", SublevelSet((g,), box))


def ellipse_fixture(P: Optional[np.ndarray] = None) -> Fixture:
    P = np.diag([1.0, 4.0]) if P is None else np.asarray(P, dtype=float)
    g = quadratic_constraint(P, name="ellipse")
    box = Box([-1.5, -1.5], [1.5, 1.5])
    return Fixture("ellipse", SublevelSet((g,), box))


def quartic_fixture() -> Fixture:
    def value(x):
        return float(np.dot(x, x)) ** 2 - 1.0

    def gradient(x):
        return 4.0 * float(np.dot(x, x)) * x

    def hess_quadform(x, h):
        return 4.0 * float(np.dot(x, x)) * float(np.dot(h, h)) + 8.0 * float(np.dot(x, h)) ** 2

    g = ConstraintFunction(value, gradient, hess_quadform, name="quartic-disk",
                           value_batch=lambda pts: np.sum(pts * pts, axis=-1) ** 2 - 1.0)
    box = Box([-1.5, -1.5], [1.5, 1.5])
    return Fixture("quartic", SublevelSet((g,), box))


def halfplane_fixture() -> Fixture:
    g = ConstraintFunction(
        value=lambda x: float(x[0]),
        gradient=lambda x: np.array([1.0, 0.0]),
        hessian_quadform=lambda x, h: 0.0,
        name="half-plane",
        value_batch=lambda pts: pts[..., 0],
    )
    box = Box([-1.0, -1.0], [1.0, 1.0])
    pts = np.stack([np.zeros(64), np.linspace(-0.9, 0.9, 64)], axis=-1)
    return Fixture("halfplane", SublevelSet((g,), box),
                   boundary_sampler=FixedPointsSampler(pts))


def _circle_points(count: int) -> np.ndarray:
    ang = 2.0 * np.pi * (np.arange(count) + 0.5) / count
    return np.stack([np.cos(ang), np.sin(ang)], axis=-1)


def annulus_fixture(boundary_count: int = 64) -> Fixture:
    """Omega = unit circle: g and -g together; interior C(x) empty everywhere."""
    g1 = quadratic_constraint(np.eye(2), name="annulus-outer")
    g2 = ConstraintFunction(
        value=lambda x: 1.0 - float(np.dot(x, x)),
        gradient=lambda x: -2.0 * x,
        hessian_quadform=lambda x, h: -2.0 * float(np.dot(h, h)),
        name="annulus-inner",
        value_batch=lambda pts: 1.0 - np.sum(pts * pts, axis=-1),
    )
    box = Box([-2.0, -2.0], [2.0, 2.0])
    S = SublevelSet((g1, g2), box, membership_tol=1e-12)
    pts = _circle_points(boundary_count)

    def point_sampler(rng: np.random.Generator, count: int) -> np.ndarray:
        ang = rng.uniform(0.0, 2.0 * np.pi, size=count)
        return np.stack([np.cos(ang), np.sin(ang)], axis=-1)

    return Fixture("annulus", S, boundary_sampler=FixedPointsSampler(pts),
                   point_sampler=point_sampler)


def two_disk_fixture() -> Fixture:
    """Omega = unit disk; gradients of g1, g2 linearly dependent at (1,0)."""
    g1 = quadratic_constraint(np.eye(2), name="two-disk-g1")
    g2 = ConstraintFunction(
        value=lambda x: -((x[0] - 2.0) ** 2 + x[1] ** 2 - 1.0),
        gradient=lambda x: np.array([-2.0 * (x[0] - 2.0), -2.0 * x[1]]),
        hessian_quadform=lambda x, h: -2.0 * float(np.dot(h, h)),
        name="two-disk-g2",
        value_batch=lambda pts: -((pts[..., 0] - 2.0) ** 2 + pts[..., 1] ** 2 - 1.0),
    )
    box = Box([-2.0, -2.0], [2.0, 2.0])
    return Fixture("two-disk", SublevelSet((g1, g2), box))


def cross3d_fixture(boundary_count: int = 96) -> Fixture:
    """Paper's 3-D non-convex set from five constraints (m = 5).

    Omega = {x1 <= 0, x2 = x3 = 0} ∪ {x1 = x3 = 0}: the second-order
    inequality holds at every point for every index, yet the set is not
    convex; the cone interior is empty everywhere.
    """
    p1 = Polynomial.from_terms(3, [[1.0, 3, 3, 0], [1.0, 0, 0, 1]])  # x1^3 x2^3 + x3
    g1 = constraint_from_polynomial(p1, "cross3d-g1")
    g2 = constraint_from_polynomial(
        Polynomial(3, -p1.coeffs, p1.exponents), "cross3d-g2")
    g3 = constraint_from_polynomial(Polynomial.from_terms(3, [[1.0, 1, 0, 0]]), "cross3d-g3")
    p4 = Polynomial.from_terms(3, [[1.0, 0, 0, 1]])
    g4 = constraint_from_polynomial(p4, "cross3d-g4")
    g5 = constraint_from_polynomial(Polynomial(3, -p4.coeffs, p4.exponents), "cross3d-g5")
    box = Box([-1.5, -1.5, -1.5], [1.5, 1.5, 1.5])
    S = SublevelSet((g1, g2, g3, g4, g5), box, membership_tol=1e-12)

    half = boundary_count // 2
    ray = np.stack([-np.linspace(0.05, 1.4, half), np.zeros(half), np.zeros(half)], axis=-1)
    line = np.stack([np.zeros(boundary_count - half),
                     np.linspace(-1.4, 1.4, boundary_count - half),
                     np.zeros(boundary_count - half)], axis=-1)
    pts = np.concatenate([ray, line], axis=0)

    def point_sampler(rng: np.random.Generator, count: int) -> np.ndarray:
        out = np.zeros((count, 3))
        on_ray = rng.random(count) < 0.5
        out[on_ray, 0] = -rng.uniform(0.02, 1.4, size=int(on_ray.sum()))
        out[~on_ray, 1] = rng.uniform(-1.4, 1.4, size=int((~on_ray).sum()))
        return out

    return Fixture("cross3d", S, boundary_sampler=FixedPointsSampler(pts),
                   point_sampler=point_sampler)


# ---------------------------------------------------------------------------
# vector-field fixtures


def zero_field(dim: int = 2) -> VectorField:
    return VectorField(
        dim=dim,
        f=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        jac=lambda x: np.zeros((dim, dim)),
        hess_quadform=lambda x, h: np.zeros(dim),
        lipschitz_jac=0.0,
        name="zero",
    )


def linear_field(A: np.ndarray) -> VectorField:
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    return VectorField(
        dim=n,
        f=lambda x: np.asarray(x, dtype=float) @ A.T,
        jac=lambda x: A,
        hess_quadform=lambda x, h: np.zeros(n),
        lipschitz_jac=0.0,
        name="linear",
    )


def rotation_field() -> VectorField:
    vf = linear_field(np.array([[0.0, -1.0], [1.0, 0.0]]))
    return VectorField(dim=2, f=vf.f, jac=vf.jac, hess_quadform=vf.hess_quadform,
                       lipschitz_jac=0.0, name="rotation")


CONSTRAINT_FIXTURES: Dict[str, Callable[[], Fixture]] = {
    "disk": disk_fixture,
    "ellipse": ellipse_fixture,
    "quartic": quartic_fixture,
    "annulus": annulus_fixture,
    "two-disk": two_disk_fixture,
    "cross3d": cross3d_fixture,
    "halfplane": halfplane_fixture,
}

FIELD_FIXTURES: Dict[str, Callable[..., VectorField]] = {
    "zero": zero_field,
    "linear": linear_field,
    "rotation": rotation_field,
    "pendulum": lambda omega=1.0, gamma=0.0, u=0.0: pendulum_field(
        PendulumParams(omega, gamma, u)),
}
