"""Cart-pendulum fixture: closed-form radius constants and abstraction steps.

The pole dynamics under constant cart acceleration u are

    x1' = x2,    x2' = -w^2 sin(x1) - u w^2 cos(x1) - 2 g x2,

and the closed forms below (omega_hat, L1(t), lambda_+/-) bound the growth
quantities of the attainable-set radius theorem for this system.  The
abstraction step over-approximates one sampling period from a grid cell and
compares ball-based against half-space-based transition sets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Union

import numpy as np
from scipy.optimize import linprog

from .geometry import Ball, BallIntersection, Box, SupportPatch
from .reach import InfeasibleRadiusError, VectorField, reach_overapprox

GOLDEN_CONJUGATE = 0.6180339887498949


@dataclass(frozen=True)
class PendulumParams:
    omega: float
    gamma: float = 0.0
    u: float = 0.0

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError("omega must be positive")
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")


@dataclass(frozen=True)
class PendulumConstants:
    """Closed-form bounds for the pendulum radius theorem."""

    omega_hat: float
    lambda_plus: float
    lambda_minus: float
    l1: Callable[[float], float]
    preconditions_ok: bool
    reasons: tuple = ()

    def to_dict(self, t: Optional[float] = None) -> dict:
        out = {
            "omega_hat": self.omega_hat,
            "lambda_plus": self.lambda_plus,
            "lambda_minus": self.lambda_minus,
            "preconditions_ok": self.preconditions_ok,
            "reasons": list(self.reasons),
        }
        if t is not None:
            out["l1"] = self.l1(t)
        return out


def pendulum_field(p: PendulumParams) -> VectorField:
    """Vector field with exact Jacobian and second quadratic form."""
    w2 = p.omega ** 2
    u = p.u
    gamma = p.gamma

    def f(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.stack(
            [x[..., 1],
             -w2 * np.sin(x[..., 0]) - u * w2 * np.cos(x[..., 0]) - 2.0 * gamma * x[..., 1]],
            axis=-1,
        )

    def jac(x: np.ndarray) -> np.ndarray:
        return np.array([
            [0.0, 1.0],
            [-w2 * math.cos(x[0]) + u * w2 * math.sin(x[0]), -2.0 * gamma],
        ])

    def hess_quadform(x: np.ndarray, h: np.ndarray) -> np.ndarray:
        curv = w2 * math.sin(x[0]) + u * w2 * math.cos(x[0])
        return np.array([0.0, curv * h[0] ** 2])

    return VectorField(dim=2, f=f, jac=jac, hess_quadform=hess_quadform,
                       lipschitz_jac=w2 * math.sqrt(1.0 + u ** 2), name="pendulum")


def pendulum_constants(p: PendulumParams, t: float) -> PendulumConstants:
    """omega_hat, L1(.), lambda_+/- and the two theorem preconditions."""
    omega_hat = max(1.0, p.omega * (1.0 + p.u ** 2) ** 0.25)
    disc = math.sqrt(p.gamma ** 2 + (1.0 + omega_hat ** 2) ** 2 / 4.0)
    lam_plus = -p.gamma + disc
    lam_minus = -p.gamma - disc

    def l1(tau: float) -> float:
        num = math.sinh(3.0 * omega_hat * tau) + math.sinh(omega_hat * tau) * (
            12.0 * (omega_hat ** -2 + 1.0) ** -1.5 - 3.0
        )
        den = 12.0 * omega_hat ** 2 * (1.0 + (omega_hat + p.gamma) ** 2) ** -1.5
        return num / den

    reasons: List[str] = []
    if p.gamma > 3.0 * omega_hat / 4.0:
        reasons.append(f"gamma = {p.gamma} exceeds 3*omega_hat/4 = {0.75 * omega_hat}")
    freq_sq = omega_hat ** 2 - p.gamma ** 2
    if freq_sq <= 0 or 2.0 * math.sqrt(max(freq_sq, 0.0)) * t > math.pi:
        reasons.append("2*sqrt(omega_hat^2 - gamma^2)*t exceeds pi")
    return PendulumConstants(
        omega_hat=omega_hat, lambda_plus=lam_plus, lambda_minus=lam_minus,
        l1=l1, preconditions_ok=not reasons, reasons=tuple(reasons),
    )


def pendulum_radius(p: PendulumParams, s: float, t: float) -> Optional[float]:
    """Closed-form radius of the flowed set, or None when s*L1(t) >= 1."""
    if s < 0 or t <= 0:
        raise ValueError("need s >= 0 and t > 0")
    c = pendulum_constants(p, t)
    l1 = c.l1(t)
    if s * l1 >= 1.0:
        return None
    return s * math.exp((2.0 * c.lambda_plus - c.lambda_minus) * t) / (1.0 - s * l1)


# ---------------------------------------------------------------------------
# cell grids and the abstraction step


@dataclass(frozen=True)
class CellGrid:
    """Non-overlapping axis-aligned cells covering a region of state space."""

    boxes: tuple
    labels: tuple = ()

    def __post_init__(self):
        boxes = tuple(self.boxes)
        labels = tuple(self.labels) if self.labels else tuple(str(i) for i in range(len(boxes)))
        if len(labels) != len(boxes):
            raise ValueError("one label per cell required")
        object.__setattr__(self, "boxes", boxes)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def regular(cls, lo: Sequence[float], cell_size: float, shape: Sequence[int]) -> "CellGrid":
        lo = np.asarray(lo, dtype=float)
        nx, ny = int(shape[0]), int(shape[1])
        boxes = []
        for i in range(nx):
            for j in range(ny):
                c_lo = lo + cell_size * np.array([i, j], dtype=float)
                boxes.append(Box(c_lo, c_lo + cell_size))
        return cls(tuple(boxes))

    def __len__(self) -> int:
        return len(self.boxes)

    def cell_containing(self, z: np.ndarray) -> Optional[int]:
        for idx, b in enumerate(self.boxes):
            if b.contains(z):
                return idx
        return None


def cell_embedding(box: Box) -> Ball:
    """Circumscribed ball of a cell: the canonical strongly convex embedding."""
    return Ball(box.center, 0.5 * float(np.linalg.norm(box.hi - box.lo)))


def _circle_intersections(c1: np.ndarray, r1: float, c2: np.ndarray, r2: float):
    d = float(np.linalg.norm(c2 - c1))
    if d < 1e-15 or d > r1 + r2 or d < abs(r1 - r2):
        return []
    a = (d * d + r1 * r1 - r2 * r2) / (2.0 * d)
    h_sq = r1 * r1 - a * a
    if h_sq < 0.0:
        return []
    h = math.sqrt(max(h_sq, 0.0))
    axis = (c2 - c1) / d
    base = c1 + a * axis
    perp = np.array([-axis[1], axis[0]])
    return [base + h * perp, base - h * perp]


def _support_min(balls, u: np.ndarray, slack: float = 1e-9) -> float:
    """Lower bound on min over the ball intersection of <u, z>.

    Exact in 2-D (candidates: per-arc stationary points and circle-circle
    corners, admitted with a feasibility slack that can only lower the
    bound); the single-ball bound max_i(<u, c_i> - r_i) otherwise.
    Returns +inf when the intersection itself is certified empty.
    """
    dim = balls[0][0].size
    if dim != 2:
        return max(float(np.dot(u, c)) - r for c, r in balls)
    candidates = []
    for i, (c, r) in enumerate(balls):
        p = c - r * u
        if all(np.linalg.norm(p - cj) <= rj + slack
               for j, (cj, rj) in enumerate(balls) if j != i):
            candidates.append(p)
    for i in range(len(balls)):
        for j in range(i + 1, len(balls)):
            for p in _circle_intersections(*balls[i], *balls[j]):
                if all(np.linalg.norm(p - ck) <= rk + slack for ck, rk in balls):
                    candidates.append(p)
    if not candidates:
        return math.inf
    return min(float(np.dot(u, p)) for p in candidates)


def ball_box_nonempty(approx: BallIntersection, box: Box, iters: int = 100,
                      gap_tol: float = 1e-9) -> bool:
    """Emptiness of (ball intersection) ∩ box by alternating projections.

    Projection gaps only upper-bound the distance between the sets, so
    emptiness is declared solely on a separation certificate: the support
    of the ball intersection along the current projection direction must
    clear the box support.  Without a certificate the verdict stays
    non-empty (conservative, over-reporting keeps the abstraction sound).
    """
    balls = [(p.point - p.radius * p.normal, p.radius) for p in approx.patches]

    def project_balls(z: np.ndarray) -> np.ndarray:
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

    z = box.center.copy()
    for _ in range(iters):
        zk = project_balls(z)
        zb = box.clip(zk)
        gap = float(np.linalg.norm(zk - zb))
        if gap <= gap_tol:
            return True
        u = (zk - zb) / gap
        box_support = float(np.sum(np.where(u > 0, u * box.hi, u * box.lo)))
        if _support_min(balls, u) > box_support + 1e-12:
            return False  # certified: a hyperplane separates the sets
        z = zb
    return True  # no certificate found: conservative


def halfspace_box_nonempty(patches: Sequence[SupportPatch], box: Box) -> bool:
    """Emptiness of (half-space intersection) ∩ box via an LP feasibility check."""
    A = np.asarray([p.normal for p in patches])
    b = np.asarray([float(np.dot(p.normal, p.point)) for p in patches])
    n = box.dim
    res = linprog(np.zeros(n), A_ub=A, b_ub=b,
                  bounds=list(zip(box.lo, box.hi)), method="highs")
    if res.status == 2:  # proven infeasible
        return False
    return True


@dataclass(frozen=True)
class TransitionReport:
    """Transition lists per method, deterministically ordered."""

    source: str
    controls: tuple
    transitions: dict            # method name -> tuple of (source, control, target)
    spurious_eliminated: Optional[int] = None
    radii: tuple = ()

    def rows(self, method: str) -> List[tuple]:
        return list(self.transitions[method])

    def to_dict(self) -> dict:
        return {
            "source": self.source,
            "controls": list(self.controls),
            "transitions": {m: [list(t) for t in ts] for m, ts in self.transitions.items()},
            "spurious_eliminated": self.spurious_eliminated,
            "radii": list(self.radii),
        }


def abstraction_step(grid: CellGrid, source: Union[int, BallIntersection],
                     controls: Sequence[float], p: PendulumParams, s: float,
                     T: float, method: str = "both", patches: int = 16,
                     steps: int = 1024, seed: int = 1,
                     field_override: Optional[VectorField] = None,
                     radius_override: Optional[float] = None) -> TransitionReport:
    """One discrete-abstraction transition step from a source region.

    Over-approximates the flowed source for each control, intersects with
    every grid cell, and reports the non-empty intersections as transitions.
    ``source`` is a cell index (embedded in its circumscribed disk), a Ball
    (possibly degenerate) or a BallIntersection from a previous step.
    ``field_override``/``radius_override`` support the zero-field test mode.
    """
    if method not in ("balls", "halfspaces", "both"):
        raise ValueError("method must be 'balls', 'halfspaces' or 'both'")
    if isinstance(source, (Ball, BallIntersection)):
        init: Union[Ball, BallIntersection] = source
        source_name = "region"
    else:
        ball = cell_embedding(grid.boxes[source])
        if ball.radius > s + 1e-9:
            raise ValueError(
                f"cell embedding radius {ball.radius:.6g} exceeds requested s = {s:.6g}"
            )
        init = ball
        source_name = grid.labels[source]
    offset = (2.0 * math.pi / patches) * ((seed * GOLDEN_CONJUGATE) % 1.0)
    methods = ["balls", "halfspaces"] if method == "both" else [method]
    found = {m: [] for m in methods}
    radii = []
    for ui, u in enumerate(controls):
        if field_override is not None:
            vf = field_override
            r = radius_override if radius_override is not None else s
        else:
            vf = pendulum_field(PendulumParams(p.omega, p.gamma, u))
            r = pendulum_radius(PendulumParams(p.omega, p.gamma, u), s, T)
            if r is None:
                raise InfeasibleRadiusError(f"s*L1(T) >= 1 for control u = {u}")
        radii.append(r)
        approx = reach_overapprox(vf, init, s, T, r, directions=patches,
                                  steps=steps, angle_offset=offset)
        for ci in range(len(grid)):
            cell = grid.boxes[ci]
            if "balls" in methods and ball_box_nonempty(approx, cell):
                found["balls"].append((source_name, ui, ci))
            if "halfspaces" in methods and halfspace_box_nonempty(approx.patches, cell):
                found["halfspaces"].append((source_name, ui, ci))
    transitions = {}
    for m in methods:
        transitions[m] = tuple(sorted(found[m], key=lambda t: (t[2], t[1])))
    spurious = None
    if method == "both":
        ball_set = set(transitions["balls"])
        half_set = set(transitions["halfspaces"])
        spurious = len(half_set - ball_set)
    return TransitionReport(source=source_name, controls=tuple(controls),
                            transitions=transitions, spurious_eliminated=spurious,
                            radii=tuple(radii))


def sample_ball(rng: np.random.Generator, ball: Ball, count: int) -> np.ndarray:
    """Uniform samples in a ball (rejection from the bounding box)."""
    out = []
    while len(out) < count:
        cand = rng.uniform(-1.0, 1.0, size=(4 * count, ball.center.size))
        keep = cand[np.linalg.norm(cand, axis=1) <= 1.0]
        for z in keep:
            out.append(ball.center + ball.radius * z)
            if len(out) == count:
                break
    return np.asarray(out)
