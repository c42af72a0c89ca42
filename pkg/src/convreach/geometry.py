"""Geometric predicates and brute-force oracles for strong convexity.

A closed set is r-convex exactly when it contains, around every convex
combination of two of its points, a ball whose radius grows like
alpha*(1-alpha)*||x-y||^2 / (2r).  This module checks that inclusion by
sampling, checks the parabolic (quadratic support) relaxation of the
supporting-ball condition, and evaluates ball-intersection
over-approximations built from (point, normal, radius) patches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

UNIT_NORM_TOL = 1e-12


class EmptySampleError(RuntimeError):
    """No member point of the set was found within the rejection budget."""


@dataclass(frozen=True)
class Box:
    """Axis-aligned box, the sampling window for all oracles."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("box corners must be 1-D arrays of equal length")
        if np.any(hi < lo):
            raise ValueError("box upper corner below lower corner")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.lo.size

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def volume(self) -> float:
        return float(np.prod(self.hi - self.lo))

    def contains(self, z: np.ndarray) -> bool:
        return bool(np.all(z >= self.lo) and np.all(z <= self.hi))

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return rng.uniform(self.lo, self.hi, size=(count, self.dim))

    def clip(self, z: np.ndarray) -> np.ndarray:
        return np.clip(z, self.lo, self.hi)

    def grid(self, points_per_axis: int) -> np.ndarray:
        axes = [np.linspace(l, h, points_per_axis) for l, h in zip(self.lo, self.hi)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)


@dataclass(frozen=True)
class Ball:
    """Closed ball; radius 0 degenerates to the single point {center}."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float)
        if self.radius < 0:
            raise ValueError("ball radius must be nonnegative")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(self.radius))

    def contains(self, z: np.ndarray, tol: float = 0.0) -> bool:
        return bool(np.linalg.norm(np.asarray(z, dtype=float) - self.center) <= self.radius + tol)


@dataclass(frozen=True)
class SupportPatch:
    """Boundary point, outward unit normal and radius of one supporting ball."""

    point: np.ndarray
    normal: np.ndarray
    radius: float

    def __post_init__(self):
        x = np.asarray(self.point, dtype=float)
        v = np.asarray(self.normal, dtype=float)
        if abs(np.linalg.norm(v) - 1.0) > UNIT_NORM_TOL:
            raise ValueError("patch normal must be a unit vector (1e-12)")
        if not self.radius > 0:
            raise ValueError("patch radius must be positive")
        object.__setattr__(self, "point", x)
        object.__setattr__(self, "normal", v)
        object.__setattr__(self, "radius", float(self.radius))


def ball_contains(b: Ball, z: np.ndarray) -> bool:
    """Closed-ball membership ||z - c|| <= r."""
    return b.contains(z)


def supporting_ball(p: SupportPatch) -> Ball:
    """Ball through p.point with outward normal p.normal: B(x - r*v, r)."""
    return Ball(p.point - p.radius * p.normal, p.radius)


@dataclass(frozen=True)
class BallIntersection:
    """Intersection of supporting balls, the over-approximation of the set."""

    patches: tuple

    def __post_init__(self):
        patches = tuple(self.patches)
        if not patches:
            raise ValueError("ball intersection needs at least one patch")
        object.__setattr__(self, "patches", patches)

    @property
    def dim(self) -> int:
        return self.patches[0].point.size

    def contains(self, z: np.ndarray, tol: float = 0.0) -> bool:
        z = np.asarray(z, dtype=float)
        for p in self.patches:
            if not supporting_ball(p).contains(z, tol=tol):
                return False
        return True

    def contains_halfspaces(self, z: np.ndarray, tol: float = 0.0) -> bool:
        """Membership in the half-space relaxation <v, z - x> <= 0 per patch."""
        z = np.asarray(z, dtype=float)
        for p in self.patches:
            if float(np.dot(p.normal, z - p.point)) > tol:
                return False
        return True

    def bounding_box(self, margin: float = 0.0) -> Box:
        # any single supporting ball bounds the whole intersection
        b = supporting_ball(self.patches[0])
        r = b.radius + margin
        return Box(b.center - r, b.center + r)


def ball_intersection_membership(approx: BallIntersection, z: np.ndarray) -> bool:
    """Conjunction of ball_contains over all patches."""
    return approx.contains(z)


def combine_intersections(*parts: BallIntersection) -> BallIntersection:
    """Intersection of several patch sets (patch lists concatenate)."""
    patches = []
    for part in parts:
        patches.extend(part.patches)
    return BallIntersection(tuple(patches))


@dataclass(frozen=True)
class MembershipPredicate:
    """Black-box set membership plus a bounding box to sample in.

    ``point_sampler``, when given, yields member points directly; it is
    required for measure-zero sets where rejection sampling cannot succeed.
    ``contains_many`` is an optional vectorized fast path over (N, n) point
    arrays; the scalar ``contains`` stays authoritative (FAIL witnesses are
    re-verified through it).
    """

    contains: Callable[[np.ndarray], bool]
    box: Box
    point_sampler: Optional[Callable[[np.random.Generator, int], np.ndarray]] = None
    contains_many: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def batch(self, pts: np.ndarray) -> np.ndarray:
        if self.contains_many is not None:
            return np.asarray(self.contains_many(pts), dtype=bool)
        return np.array([self.contains(z) for z in pts], dtype=bool)


@dataclass(frozen=True)
class SampleConfig:
    """Sampling effort and seed for the geometric oracles."""

    pairs: int = 500
    alphas: int = 8
    probes: int = 64
    seed: int = 0
    rejection_budget: int = 200_000


@dataclass(frozen=True)
class OracleVerdict:
    """PASS is sampled evidence; FAIL carries a re-verified counterexample."""

    passed: bool
    witness: Optional[dict] = None
    pairs_checked: int = 0
    probes_checked: int = 0
    warnings: tuple = ()

    def to_dict(self) -> dict:
        out = {
            "passed": self.passed,
            "pairs_checked": self.pairs_checked,
            "probes_checked": self.probes_checked,
            "warnings": list(self.warnings),
        }
        if self.witness is not None:
            out["witness"] = {
                k: (v.tolist() if isinstance(v, np.ndarray) else v)
                for k, v in self.witness.items()
            }
        return out


def unit_directions(dim: int, count: int, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Deterministic low-discrepancy unit vectors.

    Uniform angles in 2-D, spherical Fibonacci in 3-D, seeded Gaussian
    directions in higher dimension (rng required there).
    """
    if count <= 0:
        return np.zeros((0, dim))
    if dim == 1:
        signs = np.array([1.0, -1.0])
        return signs[np.arange(count) % 2].reshape(-1, 1)
    if dim == 2:
        ang = 2.0 * np.pi * np.arange(count) / count
        return np.stack([np.cos(ang), np.sin(ang)], axis=-1)
    if dim == 3:
        k = np.arange(count) + 0.5
        phi = np.arccos(1.0 - 2.0 * k / count)
        theta = np.pi * (1.0 + math.sqrt(5.0)) * k
        return np.stack(
            [np.sin(phi) * np.cos(theta), np.sin(phi) * np.sin(theta), np.cos(phi)],
            axis=-1,
        )
    if rng is None:
        rng = np.random.default_rng(0)
    vecs = rng.standard_normal((count, dim))
    return vecs / np.linalg.norm(vecs, axis=1, keepdims=True)


def _member_points(pred: MembershipPredicate, rng: np.random.Generator, count: int,
                   budget: int) -> np.ndarray:
    """Rejection-sample member points, or delegate to the fixture sampler."""
    if pred.point_sampler is not None:
        pts = np.asarray(pred.point_sampler(rng, count), dtype=float)
        if pts.shape[0] < count:
            raise EmptySampleError("point sampler produced too few points")
        return pts[:count]
    found = []
    spent = 0
    batch = max(256, count)
    while len(found) < count:
        if spent >= budget:
            raise EmptySampleError(
                f"no member point found in bounding box after {spent} rejections"
            )
        cand = pred.box.sample(rng, batch)
        spent += batch
        for z in cand[pred.batch(cand)]:
            found.append(z)
            if len(found) == count:
                break
    return np.asarray(found)


def refine_to_boundary(pred: MembershipPredicate, x: np.ndarray, direction: np.ndarray,
                       iters: int = 60) -> Optional[np.ndarray]:
    """Bisect from the member point x along direction to just inside the boundary.

    Returns None when the ray never leaves the set inside the bounding box.
    """
    if not pred.contains(x):
        return None
    d = direction / np.linalg.norm(direction)
    # exit scale: distance to the box boundary along d
    box = pred.box
    t_hi = np.inf
    for i in range(box.dim):
        if d[i] > 1e-300:
            t_hi = min(t_hi, (box.hi[i] - x[i]) / d[i])
        elif d[i] < -1e-300:
            t_hi = min(t_hi, (box.lo[i] - x[i]) / d[i])
    if not np.isfinite(t_hi) or t_hi <= 0:
        return None
    # march outward until non-member
    t_out = None
    t = t_hi / 32.0
    while t <= t_hi:
        if not pred.contains(x + t * d):
            t_out = t
            break
        t *= 2.0
    if t_out is None:
        if not pred.contains(x + t_hi * d):
            t_out = t_hi
        else:
            return None
    t_in = 0.0
    for _ in range(iters):
        mid = 0.5 * (t_in + t_out)
        if pred.contains(x + mid * d):
            t_in = mid
        else:
            t_out = mid
    return x + t_in * d


def membership_flips_near(pred: MembershipPredicate, x: np.ndarray, v: np.ndarray,
                          radius: float = 1e-7) -> bool:
    """Boundary test per ledger: membership flips within `radius` along +-v."""
    inner = pred.contains(x - radius * v)
    outer = pred.contains(x + radius * v)
    return inner != outer or (pred.contains(x) != outer)


def _sample_pairs(pred: MembershipPredicate, rng: np.random.Generator,
                  cfg: SampleConfig) -> np.ndarray:
    """Pairs of member points: half uniform, half pushed to the boundary.

    Boundary-biased pairs are what actually expose sigma-regularity
    violations near the critical radius; witnesses are re-verified, so the
    bias cannot fabricate a FAIL.
    """
    base = _member_points(pred, rng, 2 * cfg.pairs, cfg.rejection_budget)
    if pred.point_sampler is not None:
        return base.reshape(cfg.pairs, 2, -1)
    pts = []
    for k, x in enumerate(base):
        if (k // 2) % 2 == 1:  # both endpoints of every other pair
            d = rng.standard_normal(pred.box.dim)
            refined = refine_to_boundary(pred, x, d)
            pts.append(refined if refined is not None else x)
        else:
            pts.append(x)
    return np.asarray(pts).reshape(cfg.pairs, 2, -1)


def sigma_regularity_oracle(set_: MembershipPredicate, r: float,
                            samples: SampleConfig = SampleConfig()) -> OracleVerdict:
    """Sampled check of sigma-regularity with sigma = 1/(2r).

    Probes, for member pairs (x, y) and each alpha on a grid, the ball of
    radius sigma*alpha*(1-alpha)*||x-y||^2 around alpha*x + (1-alpha)*y.
    PASS is evidence only; FAIL is a certified counterexample to
    r-convexity of a closed set.
    """
    if r <= 0:
        raise ValueError("radius must be positive")
    sigma = 1.0 / (2.0 * r)
    rng = np.random.default_rng(samples.seed)
    pairs = _sample_pairs(set_, rng, samples)
    dirs = unit_directions(set_.box.dim, samples.probes, rng)
    alphas = np.arange(1, samples.alphas + 1) / (samples.alphas + 1.0)
    probes_checked = 0
    for x, y in pairs:
        gap2 = float(np.dot(x - y, x - y))
        if gap2 == 0.0:
            continue
        for a in alphas:
            center = a * x + (1.0 - a) * y
            rho = sigma * a * (1.0 - a) * gap2
            probes = np.concatenate([center[None, :], center + rho * dirs])
            inside = set_.batch(probes)
            probes_checked += len(probes)
            if not inside.all():
                probe = probes[int(np.argmin(inside))]
                # re-verify with the scalar predicate (tolerance artifacts)
                if set_.contains(probe):
                    continue
                return OracleVerdict(
                    passed=False,
                    witness={
                        "x": x, "y": y, "alpha": float(a),
                        "probe": probe, "inner_radius": rho,
                    },
                    pairs_checked=len(pairs),
                    probes_checked=probes_checked,
                )
    return OracleVerdict(passed=True, pairs_checked=len(pairs),
                         probes_checked=probes_checked)


def quadratic_support_check(set_: MembershipPredicate, x: np.ndarray, v: np.ndarray,
                            r: float, neighborhood: float,
                            samples: SampleConfig = SampleConfig(),
                            tol: float = 1e-9) -> OracleVerdict:
    """Sampled check of local quadratic support ||h||^2 <= 2*r*mu at x.

    Member points z near x are split as z - x = h - mu*v with h ⟂ v; any
    sample with ||h||^2 > 2*r*mu + tol is a re-verified FAIL witness.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    v = v / np.linalg.norm(v)
    rng = np.random.default_rng(samples.seed)
    local_box = Box(np.maximum(x - neighborhood, set_.box.lo),
                    np.minimum(x + neighborhood, set_.box.hi))
    local = MembershipPredicate(
        contains=lambda z: set_.contains(z) and np.linalg.norm(z - x) <= neighborhood,
        box=local_box,
        point_sampler=set_.point_sampler,
    )
    warnings = ()
    try:
        pts = _member_points(local, rng, samples.pairs, samples.rejection_budget)
    except EmptySampleError:
        return OracleVerdict(passed=True, warnings=("no samples in neighborhood",))
    if set_.point_sampler is not None:
        pts = np.asarray([z for z in pts if np.linalg.norm(z - x) <= neighborhood])
        if pts.size == 0:
            return OracleVerdict(passed=True, warnings=("no samples in neighborhood",))
    checked = []
    for k, z in enumerate(pts):
        checked.append(z)
        if k % 2 == 1 and set_.point_sampler is None:
            refined = refine_to_boundary(local, z, rng.standard_normal(x.size))
            if refined is not None:
                checked.append(refined)
    n_checked = 0
    for z in checked:
        mu = -float(np.dot(v, z - x))
        h = (z - x) + mu * v
        n_checked += 1
        lhs = float(np.dot(h, h))
        if lhs > 2.0 * r * mu + tol:
            if float(np.dot(h, h)) <= 2.0 * r * mu + tol:  # re-verify
                continue
            return OracleVerdict(
                passed=False,
                witness={"z": z, "h_norm_sq": lhs, "mu": mu,
                         "violation": lhs - 2.0 * r * mu},
                probes_checked=n_checked,
            )
    return OracleVerdict(passed=True, probes_checked=n_checked, warnings=warnings)


@dataclass(frozen=True)
class ComparisonReport:
    """Monte-Carlo volumes of ball vs. half-space intersections."""

    ball_volume: float
    halfspace_volume: float
    ratio: float
    samples: int
    seed: int

    def to_dict(self) -> dict:
        return {
            "ball_volume": self.ball_volume,
            "halfspace_volume": self.halfspace_volume,
            "ratio": self.ratio,
            "samples": self.samples,
            "seed": self.seed,
        }


def compare_ball_vs_halfspace(patches: Sequence[SupportPatch], box: Box,
                              volume_samples: SampleConfig = SampleConfig()) -> ComparisonReport:
    """Estimate both intersection volumes on one fixed-seed sample.

    Shared sample points make the reported ball volume <= half-space volume
    structurally (each supporting ball lies inside its half-space).
    """
    if not patches:
        raise ValueError("at least one patch required")
    approx = BallIntersection(tuple(patches))
    rng = np.random.default_rng(volume_samples.seed)
    n = max(volume_samples.pairs * volume_samples.probes, 1)
    pts = box.sample(rng, n)
    in_ball = 0
    in_half = 0
    for z in pts:
        if approx.contains_halfspaces(z):
            in_half += 1
            if approx.contains(z):
                in_ball += 1
    vol = box.volume()
    ball_v = vol * in_ball / n
    half_v = vol * in_half / n
    ratio = ball_v / half_v if half_v > 0 else math.nan
    return ComparisonReport(ball_v, half_v, ratio, n, volume_samples.seed)
