"""ODE flow with variational and adjoint dynamics, and attainable-set radii.

The joint system integrated by `flow` is

    x' = F(x),   Y' = F'(x) Y with Y(0) = I,   p' = -F'(x)^T p,

with a fixed-step classical 4th-order scheme for bitwise reproducibility.
`radius_c11` / `radius_c2` evaluate the strong-convexity radii of attainable
sets of s-convex initial sets, and `reach_overapprox` emits the supporting
balls B(phi(t,x0) - r v(t), r) that over-approximate phi(t, init).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .geometry import (Ball, BallIntersection, Box, MembershipPredicate,
                       SupportPatch, unit_directions)


class DomainExitError(RuntimeError):
    """Trajectory left the supplied domain box."""

    def __init__(self, message: str, exit_time: float):
        super().__init__(message)
        self.exit_time = exit_time


class SingularVariationalError(RuntimeError):
    """Variational matrix numerically singular (condition > 1e12)."""


class InfeasibleRadiusError(ValueError):
    """A radius formula's smallness condition failed (flag is None)."""


@dataclass(frozen=True)
class VectorField:
    """Right-hand side F with Jacobian and optional exact second form.

    ``f`` must broadcast over leading axes (arrays of shape (..., dim)) so
    that Monte-Carlo containment checks can flow sample batches; ``jac`` and
    ``hess_quadform`` are pointwise.  ``hess_quadform(x, h)`` returns the
    vector F''(x)h^2; ``lipschitz_jac`` bounds the Lipschitz constant of F'.
    """

    dim: int
    f: Callable[[np.ndarray], np.ndarray]
    jac: Callable[[np.ndarray], np.ndarray]
    hess_quadform: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    lipschitz_jac: Optional[float] = None
    name: str = ""

    def check_jacobian(self, box: Box, seed: int = 0, points: int = 20,
                       rtol: float = 1e-5) -> float:
        rng = np.random.default_rng(seed)
        worst = 0.0
        eps = 1e-6
        for x in box.sample(rng, points):
            J = self.jac(x)
            fd = np.empty_like(J)
            for i in range(self.dim):
                e = np.zeros(self.dim)
                e[i] = eps
                fd[:, i] = (self.f(x + e) - self.f(x - e)) / (2 * eps)
            scale = max(1.0, float(np.linalg.norm(J)))
            worst = max(worst, float(np.linalg.norm(J - fd)) / scale)
        if worst > rtol:
            raise ValueError(f"jacobian mismatch: rel err {worst:.2e} > {rtol:.0e}")
        return worst


@dataclass(frozen=True)
class FlowBundle:
    """Trajectory grid with state, variational matrices and adjoint covectors."""

    times: np.ndarray        # (N+1,)
    states: np.ndarray       # (N+1, n)
    variational: np.ndarray  # (N+1, n, n), identity at t=0
    adjoint: Optional[np.ndarray] = None  # (N+1, n) unit covectors

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    @property
    def final_variational(self) -> np.ndarray:
        return self.variational[-1]


@dataclass(frozen=True)
class GrowthBounds:
    """Jacobian growth bounds over a region: M1, M2 and lambda_- <= lambda_+."""

    m1: float
    m2: float
    lambda_minus: float
    lambda_plus: float
    box: Box
    m2_heuristic: bool = False

    def __post_init__(self):
        if self.lambda_minus > self.lambda_plus:
            raise ValueError("lambda_minus must not exceed lambda_plus")
        if self.m2 < 0:
            raise ValueError("m2 must be nonnegative")

    def to_dict(self) -> dict:
        return {
            "m1": self.m1, "m2": self.m2,
            "lambda_minus": self.lambda_minus, "lambda_plus": self.lambda_plus,
            "m2_heuristic": self.m2_heuristic,
        }


def _sym_extremes(J: np.ndarray) -> tuple:
    """(mu_-, mu_+) of the symmetric part; 2x2 closed form in dimension 2."""
    S = 0.5 * (J + J.T)
    if S.shape == (2, 2):
        mean = 0.5 * (S[0, 0] + S[1, 1])
        disc = math.hypot(0.5 * (S[0, 0] - S[1, 1]), S[0, 1])
        return mean - disc, mean + disc
    eigs = np.linalg.eigvalsh(S)
    return float(eigs[0]), float(eigs[-1])


def flow(vf: VectorField, x0: np.ndarray, t: float, steps: int = 1024,
         p0: Optional[np.ndarray] = None, box: Optional[Box] = None) -> FlowBundle:
    """Fixed-step RK4 of the joint state/variational/adjoint system.

    The adjoint column is integrated only when an initial covector ``p0``
    is given (it can be recovered later via `propagate_normal`).  With a
    domain ``box``, every accepted step is checked and DomainExitError
    carries the exit time.
    """
    if t <= 0:
        raise ValueError("horizon must be positive")
    n = vf.dim
    x = np.asarray(x0, dtype=float).copy()
    Y = np.eye(n)
    p = None if p0 is None else np.asarray(p0, dtype=float).copy()
    h = t / steps
    times = np.linspace(0.0, t, steps + 1)
    states = np.empty((steps + 1, n))
    variationals = np.empty((steps + 1, n, n))
    adjoints = None if p is None else np.empty((steps + 1, n))
    states[0] = x
    variationals[0] = Y
    if p is not None:
        adjoints[0] = p

    def rhs(xk, Yk, pk):
        J = vf.jac(xk)
        dx = vf.f(xk)
        dY = J @ Yk
        dp = None if pk is None else -J.T @ pk
        return dx, dY, dp

    for k in range(steps):
        k1 = rhs(x, Y, p)
        k2 = rhs(x + 0.5 * h * k1[0], Y + 0.5 * h * k1[1],
                 None if p is None else p + 0.5 * h * k1[2])
        k3 = rhs(x + 0.5 * h * k2[0], Y + 0.5 * h * k2[1],
                 None if p is None else p + 0.5 * h * k2[2])
        k4 = rhs(x + h * k3[0], Y + h * k3[1],
                 None if p is None else p + h * k3[2])
        x = x + (h / 6.0) * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        Y = Y + (h / 6.0) * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        if p is not None:
            p = p + (h / 6.0) * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
        if box is not None and not box.contains(x):
            raise DomainExitError(f"trajectory left the domain at t={times[k + 1]:.6g}",
                                  exit_time=float(times[k + 1]))
        states[k + 1] = x
        variationals[k + 1] = Y
        if p is not None:
            adjoints[k + 1] = p
    return FlowBundle(times=times, states=states, variational=variationals,
                      adjoint=adjoints)


def flow_states(vf: VectorField, x0: np.ndarray, t: float, steps: int = 256) -> np.ndarray:
    """Batched state-only RK4: x0 of shape (N, n) -> final states (N, n)."""
    x = np.asarray(x0, dtype=float).copy()
    h = t / steps
    for _ in range(steps):
        k1 = vf.f(x)
        k2 = vf.f(x + 0.5 * h * k1)
        k3 = vf.f(x + 0.5 * h * k2)
        k4 = vf.f(x + h * k3)
        x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return x


def propagate_normal(bundle: FlowBundle, v0: np.ndarray) -> np.ndarray:
    """Normal at the flowed boundary point: D2phi^{-T} v0, renormalized.

    Valid as the outward normal of phi(t, Omega) at phi(t, x0) when the
    attainable set is convex.
    """
    Y = bundle.final_variational
    if np.linalg.cond(Y) > 1e12:
        raise SingularVariationalError("variational matrix condition exceeds 1e12")
    v = np.linalg.solve(Y.T, np.asarray(v0, dtype=float))
    return v / np.linalg.norm(v)


def estimate_bounds(vf: VectorField, box: Box, grid_points: int = 33,
                    seed: int = 0, lipschitz_pairs: int = 256) -> GrowthBounds:
    """Grid estimates of M1, M2 and lambda_+/- over the box.

    M2 comes from ``vf.lipschitz_jac`` when present; otherwise from a
    finite-difference maximum inflated by 1.1 and flagged heuristic.
    """
    lam_lo = math.inf
    lam_hi = -math.inf
    m1 = -math.inf
    for x in box.grid(grid_points):
        mu_lo, mu_hi = _sym_extremes(vf.jac(x))
        lam_lo = min(lam_lo, mu_lo)
        lam_hi = max(lam_hi, mu_hi)
        m1 = max(m1, 2.0 * mu_hi - mu_lo)
    if vf.lipschitz_jac is not None:
        m2 = float(vf.lipschitz_jac)
        heuristic = False
    else:
        rng = np.random.default_rng(seed)
        delta = 1e-4 * float(np.max(box.hi - box.lo))
        m2 = 0.0
        for x in box.sample(rng, lipschitz_pairs):
            d = rng.standard_normal(vf.dim)
            d *= delta / np.linalg.norm(d)
            m2 = max(m2, float(np.linalg.norm(vf.jac(box.clip(x + d)) - vf.jac(x), 2))
                     / float(np.linalg.norm(box.clip(x + d) - x)))
        m2 *= 1.1
        heuristic = True
    return GrowthBounds(m1=m1, m2=m2, lambda_minus=lam_lo, lambda_plus=lam_hi,
                        box=box, m2_heuristic=heuristic)


def trajectory_hull_box(vf: VectorField, points: np.ndarray, t: float,
                        steps: int = 256, inflate: float = 0.1) -> Box:
    """Bounding box of flowed sample trajectories, inflated by a safety factor."""
    pts = np.asarray(points, dtype=float)
    lo = pts.min(axis=0).astype(float)
    hi = pts.max(axis=0).astype(float)
    x = pts.copy()
    h = t / steps
    for _ in range(steps):
        k1 = vf.f(x)
        k2 = vf.f(x + 0.5 * h * k1)
        k3 = vf.f(x + 0.5 * h * k2)
        k4 = vf.f(x + h * k3)
        x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        lo = np.minimum(lo, x.min(axis=0))
        hi = np.maximum(hi, x.max(axis=0))
    pad = inflate * np.maximum(hi - lo, 1e-12)
    return Box(lo - pad, hi + pad)


def radius_c11(s: float, t: float, b: GrowthBounds) -> Optional[float]:
    """Radius for C^{1,1} right-hand sides; None when s*M2*I >= 1.

    I is the integral of exp(M1*rho) over [0, t], with the limit value t
    when |M1| is negligible.
    """
    if s < 0 or t <= 0:
        raise ValueError("need s >= 0 and t > 0")
    if abs(b.m1) < 1e-12:
        integral = t
    else:
        integral = (math.exp(b.m1 * t) - 1.0) / b.m1
    if s * b.m2 * integral >= 1.0:
        return None
    return s * math.exp((2.0 * b.lambda_plus - b.lambda_minus) * t) / (1.0 - s * b.m2 * integral)


def radius_c2(s: float, t: float, l1: float, b: GrowthBounds) -> Optional[float]:
    """Radius for C^2 right-hand sides; None when s*L1 >= 1."""
    if s < 0 or t <= 0 or l1 < 0:
        raise ValueError("need s >= 0, t > 0 and L1 >= 0")
    if s * l1 >= 1.0:
        return None
    return s * math.exp((2.0 * b.lambda_plus - b.lambda_minus) * t) / (1.0 - s * l1)


def l1_empirical(vf: VectorField, omega_samples: np.ndarray, t: float,
                 h_samples: int = 16, steps: int = 256) -> float:
    """Empirical maximum of the variational curvature integral norm.

    For each sample x and unit h, trapezoid-integrates
    D2phi(tau,x)^{-1} F''(phi(tau,x)) (D2phi(tau,x) h)^2 over [0, delta]
    for every grid delta <= t and returns the largest norm found.  A
    sampled lower estimate of the true L1 (heuristic).
    """
    if vf.hess_quadform is None:
        raise ValueError("C^2 right-hand side (hess_quadform) required")
    hs = unit_directions(vf.dim, h_samples)
    worst = 0.0
    for x in np.asarray(omega_samples, dtype=float):
        bundle = flow(vf, x, t, steps=steps)
        dt = bundle.times[1] - bundle.times[0]
        for h in hs:
            integrand = np.empty((len(bundle.times), vf.dim))
            for k, (xk, Yk) in enumerate(zip(bundle.states, bundle.variational)):
                yk = Yk @ h
                integrand[k] = np.linalg.solve(Yk, vf.hess_quadform(xk, yk))
            acc = np.zeros(vf.dim)
            for k in range(1, len(bundle.times)):
                acc = acc + 0.5 * dt * (integrand[k - 1] + integrand[k])
                worst = max(worst, float(np.linalg.norm(acc)))
    return worst


def flowed_ball_membership(vf: VectorField, init: Ball, t: float,
                           boundary_points: int = 2048,
                           steps: int = 512) -> MembershipPredicate:
    """Membership predicate of phi(t, init) for a 2-D ball init.

    Flows a dense parameterization of the initial circle and tests points
    against the resulting polygon (inscribed in the true attainable set).
    """
    if vf.dim != 2:
        raise ValueError("flowed-boundary membership is 2-D only")
    from matplotlib.path import Path

    ang = 2.0 * np.pi * np.arange(boundary_points) / boundary_points
    circle = init.center + init.radius * np.stack([np.cos(ang), np.sin(ang)], axis=-1)
    poly = flow_states(vf, circle, t, steps=steps)
    path = Path(poly, closed=True)
    lo = poly.min(axis=0)
    hi = poly.max(axis=0)
    pad = 0.05 * np.maximum(hi - lo, 1e-9)
    return MembershipPredicate(
        contains=lambda z: bool(path.contains_point(np.asarray(z, dtype=float))),
        box=Box(lo - pad, hi + pad),
        contains_many=lambda pts: path.contains_points(np.asarray(pts, dtype=float)),
    )


def support_point(init: Union[Ball, BallIntersection], v0: np.ndarray,
                  iters: int = 50, tol: float = 1e-10) -> np.ndarray:
    """Support point of init in direction v0 (exact for a single ball)."""
    v0 = np.asarray(v0, dtype=float)
    if isinstance(init, Ball):
        return init.center + init.radius * v0
    balls = [(p.point - p.radius * p.normal, p.radius) for p in init.patches]

    def project(z: np.ndarray) -> np.ndarray:
        # Dykstra's algorithm onto the intersection of the balls
        y = z.copy()
        corrections = [np.zeros_like(z) for _ in balls]
        for _ in range(60):
            moved = 0.0
            for i, (c, r) in enumerate(balls):
                w = y + corrections[i]
                d = np.linalg.norm(w - c)
                proj = w if d <= r else c + (r / d) * (w - c)
                corrections[i] = w - proj
                moved = max(moved, float(np.linalg.norm(proj - y)))
                y = proj
            if moved < 1e-13:
                break
        return y

    step = min(r for _, r in balls)
    z = project(np.mean([c for c, _ in balls], axis=0))
    for _ in range(iters):
        z_new = project(z + step * v0)
        if np.linalg.norm(z_new - z) < tol:
            z = z_new
            break
        if float(np.dot(v0, z_new - z)) <= 0:
            step *= 0.5
        z = z_new
    return z


def reach_overapprox(vf: VectorField, init: Union[Ball, BallIntersection],
                     s: float, t: float, r: Optional[float],
                     directions: int = 16, steps: int = 1024,
                     angle_offset: float = 0.0) -> BallIntersection:
    """Supporting-ball over-approximation of phi(t, init).

    The caller certifies init s-convex and supplies r from one of the radius
    theorems.  For each of ``directions`` outward normals the support point
    of init is flowed and its normal propagated through the variational
    matrix; the returned intersection of balls of radius r contains
    phi(t, init).
    """
    if r is None:
        raise InfeasibleRadiusError("radius condition failed (flag is None)")
    if isinstance(init, Ball) and init.radius == 0.0:
        bundle = flow(vf, init.center, t, steps=steps)
        e1 = np.zeros(vf.dim)
        e1[0] = 1.0
        v = propagate_normal(bundle, e1)
        # s = 0 forces r = 0; the patch type needs a positive radius
        return BallIntersection((SupportPatch(bundle.final_state, v, max(r, 1e-12)),))
    normals = unit_directions(vf.dim, directions)
    if angle_offset != 0.0 and vf.dim == 2:
        ca, sa = math.cos(angle_offset), math.sin(angle_offset)
        rot = np.array([[ca, -sa], [sa, ca]])
        normals = normals @ rot.T
    patches = []
    for v0 in normals:
        x0 = support_point(init, v0)
        bundle = flow(vf, x0, t, steps=steps)
        v_t = propagate_normal(bundle, v0)
        patches.append(SupportPatch(bundle.final_state, v_t, r))
    return BallIntersection(tuple(patches))
