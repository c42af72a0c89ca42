"""Sublevel sets {x : g_1(x) <= 0, ..., g_m(x) <= 0} and their certificates.

Implements the local second-order conditions: sampled sufficient certificates
for convexity and r-convexity, the corresponding necessary-condition check
under linearly independent active gradients, constraint-qualification (cone
interior) tests, and conservative finite estimation of the generalized
second-order directional derivatives that appear in all of them.

Certificates are sampled-sufficient: they certify at finite boundary/direction
resolution and always carry the connectedness caveat (the hypothesis is
assumed, never verified).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy.optimize import linprog

from .geometry import Box, MembershipPredicate, unit_directions

CONNECTEDNESS_CAVEAT = "connectedness assumed, not verified"
SAMPLED_CAVEAT = "sampling-based certificate at finite resolution"


class NotInSetError(ValueError):
    """Point violates a constraint beyond tolerance."""


class BoundarySamplingError(RuntimeError):
    """The boundary sampler produced no points."""


class UnsupportedError(ValueError):
    """Operation restricted to a smaller class of sublevel sets."""


class NotPositiveDefiniteError(ValueError):
    """Matrix is not symmetric positive definite."""


class DomainError(ValueError):
    """Finite-difference schedule cannot stay inside the domain box."""


@dataclass(frozen=True)
class ConstraintFunction:
    """Scalar C^{1,1} constraint with gradient and optional exact second form.

    ``hessian_quadform(x, h)`` must equal g''(x)h^2 when supplied (the C^2
    case); ``lipschitz_hint`` is an optional Lipschitz constant of the
    gradient.
    """

    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    hessian_quadform: Optional[Callable[[np.ndarray, np.ndarray], float]] = None
    lipschitz_hint: Optional[float] = None
    name: str = ""
    value_batch: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def check_gradient(self, box: Box, seed: int = 0, points: int = 20,
                       rtol: float = 1e-5) -> float:
        """Max relative error of the gradient vs. central differences."""
        rng = np.random.default_rng(seed)
        worst = 0.0
        eps = 1e-6
        for x in box.sample(rng, points):
            g = self.gradient(x)
            fd = np.empty_like(g)
            for i in range(x.size):
                e = np.zeros_like(x)
                e[i] = eps
                fd[i] = (self.value(x + e) - self.value(x - e)) / (2 * eps)
            scale = max(1.0, float(np.linalg.norm(g)))
            worst = max(worst, float(np.linalg.norm(g - fd)) / scale)
        if worst > rtol:
            raise ValueError(f"gradient mismatch: rel err {worst:.2e} > {rtol:.0e}")
        return worst

    def check_hessian_quadform(self, box: Box, seed: int = 0, points: int = 20,
                               rtol: float = 1e-4) -> float:
        """Max relative error of g''(x)h^2 vs. the second difference quotient."""
        if self.hessian_quadform is None:
            return 0.0
        rng = np.random.default_rng(seed)
        worst = 0.0
        eps = 1e-4
        for x in box.sample(rng, points):
            h = rng.standard_normal(x.size)
            h /= np.linalg.norm(h)
            exact = self.hessian_quadform(x, h)
            fd = (self.value(x + eps * h) - 2 * self.value(x) + self.value(x - eps * h)) / eps**2
            worst = max(worst, abs(exact - fd) / max(1.0, abs(exact)))
        if worst > rtol:
            raise ValueError(f"hessian quadform mismatch: rel err {worst:.2e} > {rtol:.0e}")
        return worst


@dataclass(frozen=True)
class SublevelSet:
    """Closed set {x in box : g_i(x) <= 0 for all i}; assumed connected."""

    constraints: tuple
    box: Box
    membership_tol: float = 0.0

    def __post_init__(self):
        cs = tuple(self.constraints)
        if not cs:
            raise ValueError("at least one constraint required")
        object.__setattr__(self, "constraints", cs)

    @property
    def m(self) -> int:
        return len(self.constraints)

    @property
    def dim(self) -> int:
        return self.box.dim

    def values(self, x: np.ndarray) -> np.ndarray:
        return np.array([g.value(x) for g in self.constraints])

    def contains(self, x: np.ndarray, tol: Optional[float] = None) -> bool:
        tol = self.membership_tol if tol is None else tol
        if not self.box.contains(x):
            return False
        for g in self.constraints:
            if g.value(x) > tol:
                return False
        return True

    def contains_many(self, pts: np.ndarray, tol: Optional[float] = None):
        """Vectorized membership, or None when a constraint has no batch path."""
        if any(g.value_batch is None for g in self.constraints):
            return None
        tol = self.membership_tol if tol is None else tol
        pts = np.asarray(pts, dtype=float)
        ok = np.all((pts >= self.box.lo) & (pts <= self.box.hi), axis=-1)
        for g in self.constraints:
            ok &= np.asarray(g.value_batch(pts)) <= tol
        return ok

    def membership_predicate(self, point_sampler=None) -> MembershipPredicate:
        batch = None
        if all(g.value_batch is not None for g in self.constraints):
            batch = self.contains_many
        return MembershipPredicate(contains=self.contains, box=self.box,
                                   point_sampler=point_sampler,
                                   contains_many=batch)


@dataclass(frozen=True)
class ToleranceConfig:
    """All certificate tolerances in one place (surfaced through the CLI)."""

    active: float = 1e-9         # active-set tolerance |g_i(x)| <= active
    cone: float = 1e-10          # cone inequality slack for sampled directions
    lp_margin: float = 1e-9      # interior-cone nonemptiness threshold
    inequality: float = 1e-9     # certificate inequality slack
    rank_sv: float = 1e-8        # singular-value threshold for independence
    boundary: float = 1e-12      # bisection tolerance of the boundary sampler


@dataclass(frozen=True)
class TSchedule:
    """Geometric t-grid for the liminf/limsup difference quotients."""

    t0: float = 1e-2
    beta: float = 0.5
    steps: int = 20

    def values(self) -> np.ndarray:
        return self.t0 * self.beta ** np.arange(self.steps)


@dataclass(frozen=True)
class ActiveCone:
    active_indices: tuple
    cone_generators: np.ndarray     # (k, n) active gradients
    interior_nonempty: bool
    interior_direction: Optional[np.ndarray]


@dataclass(frozen=True)
class Witness:
    point: np.ndarray
    index: Optional[int]
    direction: Optional[np.ndarray]
    lhs: Optional[float]
    rhs: Optional[float]
    reason: str

    def to_dict(self) -> dict:
        return {
            "point": self.point.tolist(),
            "index": self.index,
            "direction": None if self.direction is None else self.direction.tolist(),
            "lhs": self.lhs,
            "rhs": self.rhs,
            "reason": self.reason,
        }


@dataclass(frozen=True)
class Certificate:
    """Outcome of a sampled certificate run.

    ``worst_margin`` is tolerance-adjusted (lhs - rhs + tol), so a passing
    certificate always has worst_margin >= 0.
    """

    kind: str
    passed: bool
    boundary_points_checked: int
    worst_margin: float
    witnesses: tuple = ()
    radius: Optional[float] = None
    caveats: tuple = (CONNECTEDNESS_CAVEAT, SAMPLED_CAVEAT)
    notes: tuple = ()
    per_index_margins: tuple = ()

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "passed": self.passed,
            "boundary_points_checked": self.boundary_points_checked,
            "worst_margin": self.worst_margin,
            "radius": self.radius,
            "witnesses": [w.to_dict() for w in self.witnesses],
            "caveats": list(self.caveats),
            "notes": list(self.notes),
            "per_index_margins": [[i, m] for i, m in self.per_index_margins],
        }


# ---------------------------------------------------------------------------
# boundary sampling


class BoundarySampler:
    """Strategy interface: produce points of the topological boundary of S."""

    def points(self, S: SublevelSet) -> np.ndarray:
        raise NotImplementedError


class FixedPointsSampler(BoundarySampler):
    """Explicit boundary points, for fixtures whose boundary is known."""

    def __init__(self, pts: np.ndarray):
        self._pts = np.asarray(pts, dtype=float)

    def points(self, S: SublevelSet) -> np.ndarray:
        if self._pts.size == 0:
            raise BoundarySamplingError("no fixed boundary points supplied")
        return self._pts


class RayBoundarySampler(BoundarySampler):
    """Default sampler: rays from interior seeds, bisecting constraint zeros.

    Each sign change of a constraint along a ray is bisected; the candidate
    is kept when it is a member (all constraints <= active tolerance), which
    under the submersion hypothesis makes it a boundary point of S.
    """

    def __init__(self, count: Optional[int] = None, seed: int = 0,
                 scan_steps: int = 48, tol: ToleranceConfig = ToleranceConfig()):
        self.count = count
        self.seed = seed
        self.scan_steps = scan_steps
        self.tol = tol

    def points(self, S: SublevelSet) -> np.ndarray:
        count = self.count if self.count is not None else (256 if S.dim == 2 else 1024)
        rng = np.random.default_rng(self.seed)
        seeds = self._seed_points(S, rng)
        if not seeds:
            raise BoundarySamplingError("no member seed point found in the box")
        found: List[np.ndarray] = []
        n_dirs = max(8, int(math.ceil(count / max(1, len(seeds)))))
        for x0 in seeds:
            for d in unit_directions(S.dim, n_dirs, rng):
                for pt in self._ray_hits(S, x0, d):
                    found.append(pt)
                    if len(found) >= count:
                        return np.asarray(found)
        if not found:
            raise BoundarySamplingError("no boundary point located along sampled rays")
        return np.asarray(found)

    def _seed_points(self, S: SublevelSet, rng: np.random.Generator) -> List[np.ndarray]:
        seeds = []
        center = S.box.center
        if S.contains(center):
            seeds.append(center)
        cand = S.box.sample(rng, 4096)
        for z in cand:
            if S.contains(z):
                seeds.append(z)
                if len(seeds) >= 4:
                    break
        return seeds

    def _ray_hits(self, S: SublevelSet, x0: np.ndarray, d: np.ndarray):
        box = S.box
        t_hi = np.inf
        for i in range(box.dim):
            if d[i] > 1e-300:
                t_hi = min(t_hi, (box.hi[i] - x0[i]) / d[i])
            elif d[i] < -1e-300:
                t_hi = min(t_hi, (box.lo[i] - x0[i]) / d[i])
        if not np.isfinite(t_hi) or t_hi <= 0:
            return
        ts = np.linspace(0.0, t_hi, self.scan_steps + 1)
        for gi, g in enumerate(S.constraints):
            vals = np.array([g.value(x0 + t * d) for t in ts])
            signs = np.sign(vals)
            for k in range(len(ts) - 1):
                if signs[k] == 0 or signs[k] * signs[k + 1] < 0:
                    lo, hi = ts[k], ts[k + 1]
                    flo = vals[k]
                    for _ in range(60):
                        mid = 0.5 * (lo + hi)
                        fm = g.value(x0 + mid * d)
                        if fm == 0.0:
                            lo = hi = mid
                            break
                        if (fm < 0) == (flo < 0):
                            lo, flo = mid, fm
                        else:
                            hi = mid
                    x_star = x0 + 0.5 * (lo + hi) * d
                    if np.all(S.values(x_star) <= self.tol.active):
                        yield x_star


# ---------------------------------------------------------------------------
# pointwise operations


def active_set(S: SublevelSet, x: np.ndarray, tol: float = 1e-9) -> set:
    """Indices of constraints active at x: {i : |g_i(x)| <= tol} (1-based)."""
    vals = S.values(x)
    if np.any(vals > tol):
        raise NotInSetError(f"point violates constraints by {float(vals.max()):.3e}")
    return {i + 1 for i, v in enumerate(vals) if abs(v) <= tol}


def interior_cone(S: SublevelSet, x: np.ndarray,
                  tol: ToleranceConfig = ToleranceConfig()) -> ActiveCone:
    """Cone of feasible directions at x and whether its interior is nonempty.

    Solves max t s.t. g_j'(x) p <= -t for active j, ||p||_inf <= 1; the
    interior is nonempty iff the optimum exceeds the margin.
    """
    act = sorted(active_set(S, x, tol.active))
    if not act:
        return ActiveCone((), np.zeros((0, S.dim)), True, None)
    grads = np.asarray([S.constraints[i - 1].gradient(x) for i in act])
    n = S.dim
    # variables (p, t); maximize t
    c = np.zeros(n + 1)
    c[-1] = -1.0
    A_ub = np.hstack([grads, np.ones((len(act), 1))])
    b_ub = np.zeros(len(act))
    bounds = [(-1.0, 1.0)] * n + [(0.0, None)]
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if not res.success:
        return ActiveCone(tuple(act), grads, False, None)
    t_star = float(res.x[-1])
    nonempty = t_star > tol.lp_margin
    direction = res.x[:n].copy() if nonempty else None
    return ActiveCone(tuple(act), grads, nonempty, direction)


def dir_second_lower(g: ConstraintFunction, x: np.ndarray, h: np.ndarray,
                     schedule: TSchedule = TSchedule(),
                     box: Optional[Box] = None) -> float:
    """Lower second-order directional derivative of g at x along h.

    Uses the exact quadratic form when available (C^2 case); otherwise the
    minimum over a geometric t-schedule of the difference quotients
    (g'(x + t h) - g'(x)) h / t, a conservative finite stand-in for the
    liminf.  On the kernel directions h of g'(x) used by the certificates
    the subtracted term vanishes exactly.
    """
    x = np.asarray(x, dtype=float)
    h = np.asarray(h, dtype=float)
    if g.hessian_quadform is not None:
        return float(g.hessian_quadform(x, h))
    t0 = schedule.t0
    if box is not None:
        attempts = 0
        while not box.contains(x + t0 * h):
            t0 *= schedule.beta
            attempts += 1
            if attempts > 60:
                raise DomainError("schedule cannot stay inside the domain box")
    ts = t0 * schedule.beta ** np.arange(schedule.steps)
    grad0_h = float(np.dot(g.gradient(x), h))
    quotients = [(float(np.dot(g.gradient(x + t * h), h)) - grad0_h) / t for t in ts]
    return min(quotients)


def _pointwise_active(fs: Sequence[ConstraintFunction], y: np.ndarray,
                      tie_tol: float = 1e-12) -> List[int]:
    vals = np.array([f.value(y) for f in fs])
    top = vals.max()
    return [i for i, v in enumerate(vals) if v >= top - tie_tol * max(1.0, abs(top))]


def _max_dir_derivative(fs: Sequence[ConstraintFunction], y: np.ndarray,
                        h: np.ndarray) -> float:
    """f'(y; h) for f = max f_i: the max over the pointwise-active gradients."""
    idx = _pointwise_active(fs, y)
    return max(float(np.dot(fs[i].gradient(y), h)) for i in idx)


@dataclass(frozen=True)
class MaxSecondEstimate:
    upper: float        # finite-schedule estimate of the upper derivative of max f_i
    lower_bound: float  # max over argmax indices of the lower derivatives
    argmax_indices: tuple


def max_dir_second_upper(fs: Sequence[ConstraintFunction], x: np.ndarray,
                         h: np.ndarray,
                         schedule: TSchedule = TSchedule()) -> MaxSecondEstimate:
    """Upper second-order derivative of f = max f_i along h, with its bound.

    Returns the schedule estimate (max of quotients of f'(.; h)) together
    with the argmax-restricted lower bound it must dominate.
    """
    x = np.asarray(x, dtype=float)
    h = np.asarray(h, dtype=float)
    fprime0 = _max_dir_derivative(fs, x, h)
    ts = schedule.values()
    quotients = [(_max_dir_derivative(fs, x + t * h, h) - fprime0) / t for t in ts]
    upper = max(quotients)
    active0 = _pointwise_active(fs, x)
    derivs = {i: float(np.dot(fs[i].gradient(x), h)) for i in active0}
    top = max(derivs.values())
    argmax = tuple(i for i, d in derivs.items() if d >= top - 1e-10 * max(1.0, abs(top)))
    lower = max(dir_second_lower(fs[i], x, h, schedule) for i in argmax)
    return MaxSecondEstimate(upper=upper, lower_bound=lower, argmax_indices=argmax)


# ---------------------------------------------------------------------------
# certificates


def _kernel_basis(grad: np.ndarray, rank_sv: float) -> np.ndarray:
    """Orthonormal basis of ker(grad) via QR on the gradient."""
    n = grad.size
    norm = np.linalg.norm(grad)
    if norm <= rank_sv:
        return np.eye(n)
    q, _ = np.linalg.qr(np.column_stack([grad / norm, np.eye(n)]))
    return q[:, 1:n]


def _cone_kernel_directions(S: SublevelSet, x: np.ndarray, i: int,
                            active: Sequence[int], n_dirs: int,
                            rng: np.random.Generator,
                            tol: ToleranceConfig) -> np.ndarray:
    """Unit directions in C(x) ∩ ker g_i'(x) (sampled in the kernel subspace)."""
    grad_i = S.constraints[i - 1].gradient(x)
    basis = _kernel_basis(grad_i, tol.rank_sv)
    k = basis.shape[1]
    if k == 0:
        return np.zeros((0, S.dim))
    raw = unit_directions(k, 2 if k == 1 else n_dirs, rng)
    dirs = raw @ basis.T
    act_grads = np.asarray([S.constraints[j - 1].gradient(x) for j in active])
    keep = []
    for d in dirs:
        if np.all(act_grads @ d <= tol.cone):
            keep.append(d)
    return np.asarray(keep) if keep else np.zeros((0, S.dim))


def _certify(S: SublevelSet, boundary: BoundarySampler, kind: str,
             r: Optional[float], mode: str, n_dirs: int, seed: int,
             tol: ToleranceConfig, schedule: TSchedule) -> Certificate:
    pts = boundary.points(S)
    rng = np.random.default_rng(seed)
    witnesses: List[Witness] = []
    worst = math.inf
    index_margins = {}
    for x in pts:
        act = sorted(active_set(S, x, tol.active))
        if not act:
            continue
        if mode == "exists-i":
            cone = interior_cone(S, x, tol)
            if not cone.interior_nonempty:
                witnesses.append(Witness(x, None, None, None, None,
                                         "constraint qualification: interior C(x) empty"))
                continue
        # tolerance-adjusted margin and the witnessing direction, per index
        margins = {}
        index_witness = {}
        for i in act:
            grad_norm = float(np.linalg.norm(S.constraints[i - 1].gradient(x)))
            margin_i = math.inf
            witness_i = None
            for h in _cone_kernel_directions(S, x, i, act, n_dirs, rng, tol):
                lhs = dir_second_lower(S.constraints[i - 1], x, h, schedule, S.box)
                rhs = 0.0 if r is None else grad_norm * float(np.dot(h, h)) / r
                margin = lhs - rhs + tol.inequality
                if margin < margin_i:
                    margin_i = margin
                    witness_i = Witness(x, i, h, lhs, rhs, "second-order inequality")
            if not math.isfinite(margin_i):  # no admissible direction: vacuous
                margin_i = tol.inequality
            margins[i] = margin_i
            index_witness[i] = witness_i
            index_margins[i] = min(index_margins.get(i, math.inf), margin_i)
        if mode == "exists-i":
            accepted = next((i for i in act if margins[i] >= 0.0), None)
            if accepted is not None:
                point_margin = margins[accepted]
            else:
                best = max(act, key=lambda i: margins[i])  # least violated index
                point_margin = margins[best]
                if index_witness[best] is not None:
                    witnesses.append(index_witness[best])
        else:  # all-i: every active index must pass
            point_margin = min(margins.values())
            if point_margin < 0.0:
                bad = min(act, key=lambda i: margins[i])
                if index_witness[bad] is not None:
                    witnesses.append(index_witness[bad])
        worst = min(worst, point_margin)
    if not math.isfinite(worst):
        worst = 0.0
    passed = not witnesses
    return Certificate(
        kind=kind,
        passed=passed,
        boundary_points_checked=len(pts),
        worst_margin=float(worst),
        witnesses=tuple(witnesses),
        radius=r,
        per_index_margins=tuple(sorted(index_margins.items())),
    )


def certify_convexity(S: SublevelSet, boundary: Optional[BoundarySampler] = None,
                      mode: str = "exists-i", n_dirs: int = 64, seed: int = 0,
                      tol: ToleranceConfig = ToleranceConfig(),
                      schedule: TSchedule = TSchedule()) -> Certificate:
    """Sampled sufficient certificate for convexity.

    At each boundary sample: the cone interior must be nonempty and some
    active index must satisfy the second-order inequality (>= 0) on all
    sampled directions of C(x) ∩ ker g_i'(x).

    mode "all-i" is a diagnostic only: it checks the inequality for every
    active index without the constraint qualification. Unlike the
    r-convexity case, passing it does NOT certify convexity (the 3-D
    five-constraint fixture passes it while being non-convex).
    """
    if mode not in ("exists-i", "all-i"):
        raise ValueError("mode must be 'exists-i' or 'all-i'")
    boundary = boundary or RayBoundarySampler(seed=seed, tol=tol)
    kind = "convex-sufficient" if mode == "exists-i" else "convex-inequality-all-i"
    return _certify(S, boundary, kind, None, mode, n_dirs, seed, tol, schedule)


def certify_r_convexity(S: SublevelSet, r: float, mode: str = "exists-i",
                        boundary: Optional[BoundarySampler] = None,
                        n_dirs: int = 64, seed: int = 0,
                        tol: ToleranceConfig = ToleranceConfig(),
                        schedule: TSchedule = TSchedule()) -> Certificate:
    """Sampled sufficient certificate for r-convexity.

    mode "exists-i" requires the cone-interior constraint qualification and
    one passing active index per point; mode "all-i" drops the CQ but
    requires the inequality for every active index.
    """
    if r <= 0:
        raise ValueError("radius must be positive")
    if mode not in ("exists-i", "all-i"):
        raise ValueError("mode must be 'exists-i' or 'all-i'")
    boundary = boundary or RayBoundarySampler(seed=seed, tol=tol)
    kind = f"r-convex-sufficient-({'i' if mode == 'exists-i' else 'ii'})"
    return _certify(S, boundary, kind, r, mode, n_dirs, seed, tol, schedule)


def max_radius(S: SublevelSet, boundary: Optional[BoundarySampler] = None,
               n_dirs: int = 64, seed: int = 0,
               tol: ToleranceConfig = ToleranceConfig(),
               schedule: TSchedule = TSchedule()) -> float:
    """Best certified strong-convexity radius for a single-constraint set.

    Samples the supremum of ||g'(x)|| / D2_lower(g, x, h) over boundary
    points x and unit h in ker g'(x): the smallest radius for which the
    r-convexity inequality holds at the sampled resolution.  Returns
    math.inf when some sampled second derivative is nonpositive (not
    strongly convex at this resolution).
    """
    if S.m != 1:
        raise UnsupportedError("max_radius requires a single constraint (m = 1)")
    boundary = boundary or RayBoundarySampler(seed=seed, tol=tol)
    pts = boundary.points(S)
    if len(pts) == 0:
        raise BoundarySamplingError("no boundary points")
    rng = np.random.default_rng(seed)
    g = S.constraints[0]
    best = 0.0
    found = False
    for x in pts:
        grad = g.gradient(x)
        grad_norm = float(np.linalg.norm(grad))
        basis = _kernel_basis(grad, tol.rank_sv)
        if basis.shape[1] == 0:
            continue
        for hk in unit_directions(basis.shape[1], n_dirs, rng):
            h = basis @ hk
            d2 = dir_second_lower(g, x, h, schedule, S.box)
            if d2 <= 0.0:
                return math.inf
            found = True
            best = max(best, grad_norm / d2)
    if not found:
        raise BoundarySamplingError("no kernel directions at any boundary sample")
    return best


def ellipsoid_min_radius(P: np.ndarray) -> float:
    """Tight strong-convexity radius of {<x, Px> <= 1}: sqrt(mu_max)/mu_min."""
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise NotPositiveDefiniteError("matrix must be square")
    if not np.allclose(P, P.T, rtol=0, atol=1e-12 * max(1.0, float(np.abs(P).max()))):
        raise NotPositiveDefiniteError("matrix must be symmetric")
    eigs = np.linalg.eigvalsh(P)
    if eigs[0] <= 0:
        raise NotPositiveDefiniteError("matrix must be positive definite")
    return float(math.sqrt(eigs[-1]) / eigs[0])


def check_necessary(S: SublevelSet, r: Optional[float] = None,
                    boundary: Optional[BoundarySampler] = None,
                    n_dirs: int = 64, seed: int = 0,
                    tol: ToleranceConfig = ToleranceConfig(),
                    schedule: TSchedule = TSchedule()) -> Certificate:
    """Necessary-condition audit for a set asserted convex (or r-convex).

    At boundary samples with linearly independent active gradients the
    inequality must hold for EVERY active index; a violation certifies a
    contradiction with the asserted (r-)convexity.  Dependent-gradient
    points are skipped with a note.
    """
    boundary = boundary or RayBoundarySampler(seed=seed, tol=tol)
    pts = boundary.points(S)
    rng = np.random.default_rng(seed)
    witnesses: List[Witness] = []
    notes: List[str] = []
    worst = math.inf
    checked = 0
    for x in pts:
        act = sorted(active_set(S, x, tol.active))
        if not act:
            continue
        grads = np.asarray([S.constraints[i - 1].gradient(x) for i in act])
        sv = np.linalg.svd(grads, compute_uv=False)
        if sv[-1] <= tol.rank_sv:
            notes.append(
                f"point {np.round(x, 6).tolist()}: dependent active gradients,"
                " necessary condition not applicable"
            )
            continue
        checked += 1
        for i in act:
            grad_norm = float(np.linalg.norm(S.constraints[i - 1].gradient(x)))
            for h in _cone_kernel_directions(S, x, i, act, n_dirs, rng, tol):
                lhs = dir_second_lower(S.constraints[i - 1], x, h, schedule, S.box)
                rhs = 0.0 if r is None else grad_norm * float(np.dot(h, h)) / r
                margin = lhs - rhs + tol.inequality
                worst = min(worst, margin)
                if margin < 0.0:
                    witnesses.append(Witness(x, i, h, lhs, rhs,
                                             "necessary condition violated"))
    if worst is math.inf:
        worst = 0.0
    passed = not witnesses
    return Certificate(
        kind="necessary-ok" if passed else "necessary-violation",
        passed=passed,
        boundary_points_checked=checked,
        worst_margin=float(worst),
        witnesses=tuple(witnesses),
        radius=r,
        notes=tuple(notes),
    )
