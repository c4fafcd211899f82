"""Equal-entropy, equal-area families of non-isometric metrics, and gap constants."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from . import entropy as en
from . import metric as mt
from .errors import (
    BoxExceededError,
    DomainError,
    NotApplicableError,
    PreconditionError,
    SliceError,
    TrackingError,
)

CERTIFIED = "CERTIFIED-NONISOMETRIC"
INCONCLUSIVE = "INCONCLUSIVE"


@dataclass(frozen=True)
class FamilyPoint:
    t: tuple
    entropy: en.EntropyEstimate
    area: float
    curvature_multiset: tuple
    curvature_bound: float

    def to_dict(self):
        return {
            "t": list(self.t),
            "entropy": json.loads(self.entropy.to_json()),
            "area": self.area,
            "curvature_multiset": list(self.curvature_multiset),
            "curvature_bound": self.curvature_bound,
        }


def curvature_multiset(kappa0, t):
    """Plateau curvatures kappa0 exp(-2 t_i), sorted."""
    return tuple(sorted(float(kappa0 * np.exp(-2 * x)) for x in t))


@dataclass
class EntropyFunctional:
    """F(t): entropy estimate of g_t with a fixed census and fit window."""

    base: mt.ConformalMetric
    R_max: float = 8.0
    step: float = 0.01
    window: tuple = (4.0, 8.0)
    cache: dict = field(default_factory=dict, repr=False)

    def __call__(self, t):
        key = tuple(float(x) for x in t)
        if key not in self.cache:
            census = en.orbit_census(self.base.with_t(key), self.R_max, self.step)
            self.cache[key] = en.entropy_estimate(census, window=self.window)
        return self.cache[key]


def certified_box(metric, cap=0.1, target=-1.0):
    """Parameter radius on which curvature stays <= target and the area condition holds.

    The area condition compares the inner ball of one bump with the outer
    ball of another at the worst box corner: Area(V; -eps) >= 3/4 Area(U; +eps).
    """
    p, k = metric.profile, metric.kappa0
    eps = min(cap, mt.certified_parameter_radius(p, k, target))

    def area_ok(e):
        return mt.bump_area(p, k, -e, p.r1) >= 0.75 * mt.bump_area(p, k, e, p.r2)

    while not area_ok(eps):
        eps *= 0.5
    return float(eps)


def make_point(metric, t, F):
    m = metric.with_t(t)
    return FamilyPoint(
        t=tuple(float(x) for x in t),
        entropy=F(t),
        area=mt.surface_area(m),
        curvature_multiset=curvature_multiset(metric.kappa0, t),
        curvature_bound=mt.curvature_bound(m),
    )


def _check_point(point, box):
    if point.curvature_bound > -1.0:
        raise BoxExceededError("curvature bound above -1", t=point.t, bound=point.curvature_bound)
    if np.max(np.abs(point.t)) >= box:
        raise BoxExceededError("parameters left the certified box", t=point.t, box=box)


def track_level_set(metric, v, steps, step=None, F=None, tol_F=None, box=None, max_corrections=6):
    """Predictor-corrector walk along the entropy level set through t = 0.

    Predict along the tangent ``v`` (sum zero), then correct along
    <1,...,1>, the gradient direction at 0, with Newton steps that use the
    analytic derivative.
    """
    v = np.asarray(v, float)
    n = metric.n_bumps
    if v.shape != (n,):
        raise PreconditionError(f"tangent must have length {n}")
    if abs(v.sum()) > 1e-12 * max(1.0, np.abs(v).max()):
        raise PreconditionError("tangent must satisfy sum(v) = 0")
    if len(np.unique(np.round(v, 12))) != n:
        raise PreconditionError("tangent coordinates must be pairwise distinct")
    box = certified_box(metric) if box is None else box
    step = box / (2 * max(steps, 1) * np.abs(v).max()) if step is None else step
    if steps * step * np.abs(v).max() >= box:
        raise BoxExceededError("requested path leaves the certified box", box=box)
    F = EntropyFunctional(metric.with_t((0.0,) * n)) if F is None else F
    zero = np.zeros(n)
    F0 = F(zero)
    tol_F = 2 * F0.stderr if tol_F is None else tol_F
    slope = en.entropy_gradient(metric.with_t(zero)).sum() / np.sqrt(n)
    ones = np.ones(n) / np.sqrt(n)

    points = [make_point(metric, zero, F)]
    t = zero.copy()
    for k in range(steps):
        t = t + step * v
        for it in range(max_corrections + 1):
            gap = F(t).s - F0.s
            if abs(gap) < tol_F:
                break
            if it == max_corrections:
                raise TrackingError(
                    "entropy correction did not converge", step=k + 1, t=t.tolist(), gap=gap
                )
            t = t - (gap / slope) * ones
        if len(np.unique(np.round(t, 15))) != n:
            raise TrackingError("coordinates collided", step=k + 1, t=t.tolist())
        p = make_point(metric, t, F)
        _check_point(p, box)
        points.append(p)
    return points


def _area_gradient(metric, t):
    p, k = metric.profile, metric.kappa0
    c = np.sqrt(-k)

    def dA(x):
        def f(r):
            rho = p(r)
            return 2 * rho * np.exp(2 * x * rho) * 2 * np.pi * np.sinh(c * r) / c

        outer, _ = integrate.quad(f, p.r1, p.r2, epsabs=0, epsrel=1e-12)
        return 2 * np.exp(2 * x) * mt.ball_area(p.r1, k) + outer

    return np.array([dA(x) for x in t])


@dataclass
class SliceResult:
    points: list
    rejected: list
    target: float


def equal_area_slice(metric, points, target=None, tol_A=1e-4, F=None, tol_F=None, box=None):
    """Move each point inside the level set until its area equals ``target``.

    The move is along the projection of the area gradient onto sum(t) = 0,
    with a 1-d root find; tol_A is relative to the target area.
    """
    areas = np.array([p.area for p in points])
    target = float(np.median(areas)) if target is None else float(target)
    atol = tol_A * target
    if target < areas.min() - atol or target > areas.max() + atol:
        raise SliceError("target area outside the attained range", lo=areas.min(), hi=areas.max())
    box = certified_box(metric) if box is None else box
    n = metric.n_bumps
    F = EntropyFunctional(metric.with_t((0.0,) * n)) if F is None else F
    F0 = F(np.zeros(n))
    tol_F = 2 * F0.stderr if tol_F is None else tol_F

    out, rejected = [], []
    for p in points:
        if abs(p.area - target) < atol:
            out.append(p)
            continue
        t = np.asarray(p.t)
        g = _area_gradient(metric, t)
        d = g - g.mean()
        if np.linalg.norm(d) == 0:
            raise SliceError("area is stationary in the level set", t=p.t)
        d /= np.linalg.norm(d)
        lam_max = np.min((box * (1 - 1e-9) - np.abs(t)) / np.maximum(np.abs(d), 1e-300))

        def f(lam):
            return mt.surface_area(metric.with_t(t + lam * d)) - target

        lo, hi = -lam_max, lam_max
        if f(lo) * f(hi) > 0:
            raise SliceError("no bracket for the area root", t=p.t)
        lam = optimize.brentq(f, lo, hi, xtol=1e-15, rtol=1e-14)
        q = make_point(metric, t + lam * d, F)
        if abs(q.entropy.s - F0.s) >= tol_F or q.curvature_bound > -1.0:
            rejected.append(q)
        else:
            out.append(q)
    return SliceResult(out, rejected, target)


def nonisometry_certificate(p, q, eps_box, kappa0=-2.0, tol=1e-6):
    """CERTIFIED-NONISOMETRIC when the plateau curvature multisets differ."""
    for point in (p, q):
        t = np.asarray(point.t if isinstance(point, FamilyPoint) else point, float)
        if np.any(np.abs(t) >= eps_box):
            raise BoxExceededError("parameters outside the certified box", t=t.tolist(), box=eps_box)
        if np.any(t == 0):
            raise PreconditionError("parameters must be nonzero", t=t.tolist())
    tp = p.t if isinstance(p, FamilyPoint) else p
    tq = q.t if isinstance(q, FamilyPoint) else q
    a = np.array(curvature_multiset(kappa0, tp))
    b = np.array(curvature_multiset(kappa0, tq))
    if a.shape != b.shape or np.abs(a - b).max() > tol:
        return CERTIFIED
    return INCONCLUSIVE


def certified_pairs(points, eps_box, kappa0):
    pairs = []
    for i in range(len(points)):
        for j in range(i + 1, len(points)):
            if nonisometry_certificate(points[i], points[j], eps_box, kappa0) == CERTIFIED:
                pairs.append([i, j])
    return pairs


def family_json(points, eps_box, kappa0):
    pairs = certified_pairs(points, eps_box, kappa0)
    data = [p.to_dict() for p in points]
    for d in data:
        d["certified_pairs"] = pairs
    return json.dumps(data)


def rescale_to_common_dimension(s1, s2):
    if s1 <= 0 or s2 <= 0:
        raise DomainError("dimensions must be positive")
    return (s1 / s2, 1.0) if s1 <= s2 else (1.0, s2 / s1)


@dataclass(frozen=True)
class GapReport:
    s1: float
    s2: float
    epsilon: float
    lambdas: tuple
    note: str = "any (C, K)-quasi-isometry between the covers has C >= 1 + epsilon"

    def to_json(self):
        return json.dumps(
            {"s1": self.s1, "s2": self.s2, "epsilon": self.epsilon, "lambdas": list(self.lambdas), "note": self.note}
        )


def gap_bound(s1, s2):
    if s1 <= 0 or s2 <= 0:
        raise DomainError("dimensions must be positive")
    if s1 == s2:
        raise NotApplicableError("equal dimensions give no gap")
    lo, hi = sorted((float(s1), float(s2)))
    return GapReport(lo, hi, hi / lo - 1.0, rescale_to_common_dimension(lo, hi))
