"""Visual metrics on the boundary circle, box-counting dimension, regularity and expansion.

Boundary points are angles of base-metric rays from the origin. For a
perturbed metric the boundary is identified with the base one through
these angles.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import fuchsian as fx
from . import metric as mt
from .errors import FitFailureError, PreconditionError, UndefinedProductError

TWO_PI = 2 * np.pi
GOLDEN = (np.sqrt(5.0) - 1) / 2


@dataclass(frozen=True)
class BoundaryPoint:
    angle: float

    def __post_init__(self):
        object.__setattr__(self, "angle", float(np.mod(self.angle, TWO_PI)))

    @property
    def z(self):
        return np.exp(1j * self.angle)


def _angles(x):
    if isinstance(x, BoundaryPoint):
        return np.float64(x.angle)
    if isinstance(x, (list, tuple)) and x and isinstance(x[0], BoundaryPoint):
        return np.array([p.angle for p in x])
    return np.mod(np.asarray(x, float), TWO_PI)


def angular_gap(a, b):
    """Unsigned angle between boundary points, in [0, pi]."""
    return np.abs(np.angle(np.exp(1j * (np.asarray(b) - np.asarray(a)))))


def low_discrepancy_angles(n, seed=0):
    """Golden-ratio sequence of n angles with a seeded offset, sorted."""
    offset = np.random.default_rng(seed).random()
    return np.sort(TWO_PI * np.mod(offset + GOLDEN * np.arange(n), 1.0))


def act_on_boundary(alpha, beta, theta):
    """Angle of gamma(e^{i theta}) for gamma in SU(1,1) form."""
    return np.mod(np.angle(fx.su_act(alpha, beta, np.exp(1j * np.asarray(theta)))), TWO_PI)


def _flat_pair_distance_unit(T, gap):
    # cosh d = cosh^2 T - sinh^2 T cos(gap) = 1 + 2 sinh^2 T sin^2(gap/2)
    x = 2 * np.sinh(T) ** 2 * np.sin(gap / 2) ** 2
    return np.log1p(x + np.sqrt(x * (x + 2)))


@dataclass(frozen=True, eq=False)
class VisualMetricContext:
    metric: mt.ConformalMetric
    T: float = 10.0
    variant: str = "gromov"
    basepoint: complex = 0j

    def __post_init__(self):
        if self.variant not in ("gromov", "geodesic"):
            raise ValueError("variant must be 'gromov' or 'geodesic'")
        if self.T > mt.MESH_RADIUS:
            raise PreconditionError(f"ray depth exceeds the meshed radius {mt.MESH_RADIUS}")
        if self.basepoint != 0:
            raise PreconditionError("only the origin is supported as basepoint")

    @property
    def scale(self):
        return self.metric.scale

    @property
    def flat(self):
        return self.metric.is_flat

    @property
    def resolution(self):
        """Smallest visual distance the truncation can resolve."""
        return float(np.exp(-self.T))

    def with_variant(self, variant):
        return VisualMetricContext(self.metric, self.T, variant, self.basepoint)

    # --- truncated products ---

    def ray_lengths(self, theta, depth=None):
        depth = self.T if depth is None else depth
        theta = np.asarray(theta, float)
        if self.flat:
            return np.full(theta.shape, float(depth))
        flat = theta.ravel()
        return mt.ray_lengths(self.metric, flat, np.full(flat.shape, depth)).reshape(theta.shape)

    def pair_lengths(self, a, b, depth=None):
        depth = self.T if depth is None else depth
        a, b = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float))
        Tu = depth / self.scale
        if self.flat:
            return _flat_pair_distance_unit(Tu, angular_gap(a, b)) * self.scale
        # base geodesic lengths in g_t: first-order exact in t, an upper bound
        return mt.path_length(self.metric, mt.ray_point(a, Tu), mt.ray_point(b, Tu))

    def products(self, a, b, depth=None):
        """Truncated Gromov products (x_T | y_T)_w for arrays of angles."""
        a, b = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float))
        da = self.ray_lengths(a, depth)
        db = self.ray_lengths(b, depth)
        return 0.5 * (da + db - self.pair_lengths(a, b, depth))

    def geodesic_distances(self, a, b):
        """d(w, geodesic(a, b)) for arrays of angles."""
        a, b = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float))
        gap = angular_gap(a, b)
        if self.flat:
            with np.errstate(divide="ignore"):
                return np.arccosh(1.0 / np.sin(gap / 2)) * self.scale
        out = np.empty(a.shape)
        for k in np.ndindex(a.shape):
            out[k] = mt.distance_to_geodesic(self.metric, 0, a[k], b[k], depth=self.T)[0]
        return out

    def distances(self, a, b):
        """Visual distances for arrays of angles (zero where they coincide)."""
        a, b = np.broadcast_arrays(_angles(a), _angles(b))
        same = angular_gap(a, b) < 1e-15
        a2 = np.where(same, 0.0, a)
        b2 = np.where(same, 1.0, b)
        if self.variant == "gromov":
            v = np.exp(-self.products(a2, b2))
        else:
            v = np.exp(-self.geodesic_distances(a2, b2))
        return np.where(same, 0.0, v)


def gromov_product(ctx, x, y, certify=True):
    """(x|y)_w truncated at depth T; compared against depth T/2 when certifying."""
    a, b = float(_angles(x)), float(_angles(y))
    if angular_gap(a, b) < 1e-15:
        raise UndefinedProductError("Gromov product of a point with itself")
    full = float(ctx.products(a, b))
    if certify:
        half = float(ctx.products(a, b, ctx.T / 2))
        band = 10 * np.exp(-ctx.T / ctx.scale / 2) * ctx.scale
        if abs(full - half) >= band:
            raise PreconditionError(
                "truncated product not converged; separation below resolution",
                full=full,
                half=half,
                band=band,
            )
    return full


def visual_distance(ctx, x, y):
    return float(ctx.distances(_angles(x), _angles(y)))


def flat_visual_distance(gap, kappa0, variant="gromov"):
    """Closed forms at t = 0: sin(gap/2)^(1/c) and tan(gap/4)^(1/c)."""
    c = np.sqrt(-kappa0)
    gap = np.asarray(gap, float)
    if variant == "gromov":
        return np.sin(gap / 2) ** (1 / c)
    return np.tan(gap / 4) ** (1 / c)


# --- ball arcs ---

def _reach_index(ctx, theta, eps, rounds=None):
    """For sorted angles, largest forward offset j with d(theta_i, theta_{i+j}) <= eps."""
    m = len(theta)
    lo = np.zeros(m, int)
    hi = np.full(m, m // 2)
    ext = np.concatenate([theta, theta + TWO_PI])
    idx = np.arange(m)
    ok_hi = ctx.distances(theta, ext[idx + hi]) <= eps
    lo = np.where(ok_hi, hi, lo)
    hi = np.where(ok_hi, hi, hi)
    active = ~ok_hi
    while np.any(active & (hi - lo > 1)):
        sel = np.flatnonzero(active & (hi - lo > 1))
        mid = (lo[sel] + hi[sel]) // 2
        ok = ctx.distances(theta[sel], ext[sel + mid]) <= eps
        lo[sel] = np.where(ok, mid, lo[sel])
        hi[sel] = np.where(ok, hi[sel], mid)
    return lo


def cover_counts(ctx, theta, scales):
    """Greedy chain cover of sorted angles by sets of visual diameter <= eps."""
    counts = []
    m = len(theta)
    for eps in scales:
        reach = _reach_index(ctx, theta, eps)
        n, i = 0, 0
        while i < m:
            n += 1
            i += reach[i] + 1
        counts.append(n)
    return np.array(counts)


@dataclass(frozen=True)
class BoxCountResult:
    dimension: float
    stderr: float
    scales: np.ndarray
    counts: np.ndarray
    residuals: np.ndarray

    def to_csv(self):
        rows = ["scale,count"] + [f"{s:.17g},{n}" for s, n in zip(self.scales, self.counts)]
        return "\n".join(rows) + "\n"

    def to_json(self):
        return json.dumps({"dimension": self.dimension, "stderr": self.stderr})


def boxcount_dimension(ctx, m=4000, scales=None, seed=0):
    """Slope of log N(eps) against -log eps over dyadic scales."""
    if m < 1000:
        raise PreconditionError("need a sample of at least 1000 boundary points")
    scales = 2.0 ** -np.arange(2, 7) if scales is None else np.asarray(scales, float)
    if np.any(scales <= ctx.resolution):
        raise PreconditionError("scales below the truncation resolution")
    theta = low_discrepancy_angles(m, seed)
    counts = cover_counts(ctx, theta, scales)
    x = -np.log(scales)
    y = np.log(counts.astype(float))
    if np.any(counts < 2) or np.ptp(x) == 0:
        raise FitFailureError("degenerate box counts", counts=counts.tolist())
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    res = y - A @ coef
    dof = max(len(x) - 2, 1)
    se = float(np.sqrt((res**2).sum() / dof / ((x - x.mean()) ** 2).sum()))
    if not np.isfinite(coef[0]) or coef[0] <= 0:
        raise FitFailureError("nonpositive slope", residuals=res.tolist())
    return BoxCountResult(float(coef[0]), se, scales, counts, res)


def ball_arcs(ctx, centers, radii, rounds=40):
    """Angular half-widths (backward, forward) of visual balls B(x, r).

    Bisection on the angle offset, assuming the distance grows with it.
    """
    centers = np.asarray(centers, float)
    radii = np.asarray(radii, float)
    C, Rr = np.meshgrid(centers, radii, indexing="ij")
    out = []
    for sign in (-1.0, 1.0):
        lo = np.zeros(C.shape)
        hi = np.full(C.shape, np.pi)
        full = ctx.distances(C, C + sign * hi) <= Rr
        for _ in range(rounds):
            mid = 0.5 * (lo + hi)
            ok = ctx.distances(C, C + sign * mid) <= Rr
            lo = np.where(ok, mid, lo)
            hi = np.where(ok, hi, mid)
        out.append(np.where(full, np.pi, lo))
    return out[0], out[1]


@dataclass(frozen=True)
class RegularityResult:
    ratios: np.ndarray  # centers x radii
    radii: np.ndarray
    s: float

    @property
    def spread(self):
        return float(self.ratios.max() / self.ratios.min())

    def spread_over(self, rmin, rmax):
        sel = (self.radii >= rmin * (1 - 1e-12)) & (self.radii <= rmax * (1 + 1e-12))
        r = self.ratios[:, sel]
        return float(r.max() / r.min())


def regularity_ratios(ctx, s, n_centers=200, radii=None, n_sample=100_000, seed=0):
    """mu(B(x, r)) / r^s for the normalized counting measure of a dense sample."""
    radii = 2.0 ** -np.arange(2, 9) if radii is None else np.asarray(radii, float)
    rng = np.random.default_rng(seed)
    sample = low_discrepancy_angles(n_sample, seed + 1)
    centers = rng.uniform(0, TWO_PI, n_centers)
    back, fwd = ball_arcs(ctx, centers, radii)
    C = centers[:, None]
    lo, hi = C - back, C + fwd
    ext = np.concatenate([sample - TWO_PI, sample, sample + TWO_PI])
    count = np.searchsorted(ext, hi, "right") - np.searchsorted(ext, lo, "left")
    mu = np.minimum(count, n_sample) / n_sample
    return RegularityResult(mu / radii[None, :] ** s, radii, float(s))


# --- expansion ---

@dataclass(frozen=True)
class ExpansionResult:
    r: np.ndarray  # visual diameter of each arc
    R: np.ndarray  # distance from w to the geodesic spanning the arc
    factors: np.ndarray  # arcs x pairs, normalized by r
    gamma: tuple  # SU(1,1) pairs (alpha, beta) used per arc

    def report(self, band):
        f = self.factors.ravel()
        bad = int(np.count_nonzero((f < band[0]) | (f > band[1])))
        return {"r": float(np.median(self.r)), "band": [float(band[0]), float(band[1])], "violations": bad}


def arc_length_for_scale(ctx, r, start=0.0, rounds=60):
    """Angular length of the arc from ``start`` whose d-hat diameter is r."""
    if ctx.flat:
        c = np.sqrt(-ctx.metric.kappa0)
        return 4 * np.arctan(np.asarray(r, float) ** c) + 0 * np.asarray(start, float)
    g = ctx.with_variant("geodesic")
    start = np.asarray(start, float)
    lo, hi = np.zeros(start.shape), np.full(start.shape, np.pi)
    for _ in range(rounds):
        mid = 0.5 * (lo + hi)
        ok = g.distances(start, start + mid) <= r
        lo, hi = np.where(ok, mid, lo), np.where(ok, hi, mid)
    return lo


def expansion_factors(ctx, starts, lengths, n_pairs=8, r0=0.5, seed=0):
    """Normalized expansion factors r * dhat(gx, gy) / dhat(x, y) for many arcs.

    For each arc the basepoint is projected to the spanning geodesic and
    the projection is moved into the octagon by gamma; pairs are the arc
    endpoints plus ``n_pairs`` random pairs inside the arc.
    """
    g = ctx.with_variant("geodesic")
    starts = np.asarray(starts, float)
    lengths = np.broadcast_to(np.asarray(lengths, float), starts.shape)
    if np.any(lengths <= 0):
        raise PreconditionError("degenerate arc")
    ends = starts + lengths
    r = g.distances(starts, ends)
    if np.any(r >= r0):
        raise PreconditionError(f"arc diameter must be below r0 = {r0}")
    if ctx.flat:
        R = g.geodesic_distances(starts, ends)
        mid = starts + lengths / 2
        foot = np.tanh(R / ctx.scale / 2) * np.exp(1j * mid)
    else:
        out = [mt.distance_to_geodesic(ctx.metric, 0, a, b, depth=ctx.T) for a, b in zip(starts, ends)]
        R = np.array([o[0] for o in out])
        foot = np.array([o[1] for o in out])
    _, ga, gb, _ = fx.reduce_to_domain(ctx.metric.group, foot)
    rng = np.random.default_rng(seed)
    u = np.sort(rng.random((len(starts), n_pairs, 2)), axis=-1)
    # keep the random pairs distinct
    u[..., 1] = np.maximum(u[..., 1], u[..., 0] + 1e-6)
    xa = np.concatenate([np.zeros((len(starts), 1)), u[..., 0]], axis=1)
    xb = np.concatenate([np.ones((len(starts), 1)), np.minimum(u[..., 1], 1.0)], axis=1)
    x = starts[:, None] + xa * lengths[:, None]
    y = starts[:, None] + xb * lengths[:, None]
    gx = act_on_boundary(ga[:, None], gb[:, None], x)
    gy = act_on_boundary(ga[:, None], gb[:, None], y)
    factors = r[:, None] * g.distances(gx, gy) / g.distances(x, y)
    return ExpansionResult(r, np.asarray(R), factors, (ga, gb))


def expansion_check(ctx, arc, n_pairs=8, r0=0.5, seed=0):
    """Expansion factors for one arc given as a pair of angles (start, end)."""
    a, b = float(arc[0]), float(arc[1])
    length = np.mod(b - a, TWO_PI)
    if length == 0 or length >= np.pi:
        raise PreconditionError("arc must be a proper arc shorter than half the circle")
    return expansion_factors(ctx, np.array([a]), np.array([length]), n_pairs, r0, seed)


def fit_band(factors):
    f = np.asarray(factors).ravel()
    return float(f.min()), float(f.max())


def expansion_scan(ctx, scales, n_arcs=1000, n_pairs=8, seed=0):
    """Expansion factors for random arcs at each d-hat scale."""
    rng = np.random.default_rng(seed)
    out = {}
    for k, r in enumerate(scales):
        starts = rng.uniform(0, TWO_PI, n_arcs)
        lengths = arc_length_for_scale(ctx, r, starts)
        out[float(r)] = expansion_factors(ctx, starts, lengths, n_pairs, seed=seed + 101 * (k + 1))
    return out


def pair_samples(ctx, n=1000, seed=0):
    """Random boundary pairs with both visual distances."""
    rng = np.random.default_rng(seed)
    a = rng.uniform(0, TWO_PI, n)
    b = rng.uniform(0, TWO_PI, n)
    dw = ctx.with_variant("gromov").distances(a, b)
    dh = ctx.with_variant("geodesic").distances(a, b)
    return a, b, dw, dh


def pair_samples_csv(a, b, dw, dh):
    rows = ["theta1,theta2,dw,dhat"]
    rows += [f"{x:.17g},{y:.17g},{p:.17g},{q:.17g}" for x, y, p, q in zip(a, b, dw, dh)]
    return "\n".join(rows) + "\n"
