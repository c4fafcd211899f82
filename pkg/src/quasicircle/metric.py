"""Periodic conformal perturbations ``g_t = exp(2 u_t) g_0`` of the base metric.

``u_t = sum_i t_i rho(d_0(x, Gamma p_i))`` is a sum of radial bumps, one per
marked point, lifted to every translate. Lengths in this module are in the
units of the base curvature ``kappa0`` unless a name ends in ``_unit``
(curvature -1 lengths, which is what the disk formulas produce).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import integrate, sparse
from scipy.sparse.csgraph import dijkstra
from scipy.spatial import cKDTree

from . import fuchsian as fx
from .errors import BudgetExceededError, DomainError, OutOfRangeError, PreconditionError

#: base-metric radius of the meshed region around the origin
MESH_RADIUS = 14.0

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(20)


@dataclass(frozen=True)
class BumpProfile:
    """C^2 radial bump: 1 on [0, r1], quintic smoothstep down to 0 at r2."""

    r1: float
    r2: float

    # sup norms of the smoothstep derivatives on [0, 1]
    S1 = 15.0 / 8.0
    S2 = 10.0 / np.sqrt(3.0)
    S3 = 60.0

    def __post_init__(self):
        if not 0 < self.r1 < self.r2:
            raise ValueError("need 0 < r1 < r2")

    @property
    def width(self):
        return self.r2 - self.r1

    def _x(self, r):
        return np.clip((self.r2 - np.asarray(r, float)) / self.width, 0.0, 1.0)

    def __call__(self, r):
        x = self._x(r)
        return x**3 * (10.0 + x * (-15.0 + 6.0 * x))

    def derivative(self, r, order=1):
        x = self._x(r)
        inside = (np.asarray(r) > self.r1) & (np.asarray(r) < self.r2)
        if order == 1:
            v = 30.0 * x**2 * (1 - x) ** 2 * (-1.0 / self.width)
        elif order == 2:
            v = 60.0 * x * (1 - x) * (1 - 2 * x) / self.width**2
        elif order == 3:
            v = (360.0 * x**2 - 360.0 * x + 60.0) * (-1.0 / self.width**3)
        else:
            raise ValueError("order must be 1, 2 or 3")
        return np.where(inside, v, 0.0)

    def derivative_bounds(self):
        w = self.width
        return self.S1 / w, self.S2 / w**2, self.S3 / w**3

    def scaled(self, factor):
        return BumpProfile(self.r1 * factor, self.r2 * factor)


def ball_area(r, kappa0):
    c = np.sqrt(-kappa0)
    return 2 * np.pi * (np.cosh(c * r) - 1) / c**2


def inner_radius_for(r2, kappa0, fraction=0.8):
    """Radius whose ball has ``fraction`` of the area of the r2-ball."""
    c = np.sqrt(-kappa0)
    return float(np.arccosh(1 + fraction * (np.cosh(c * r2) - 1)) / c)


def default_centers(group, n):
    """Origin plus ``n - 1`` points at 0.55 inradius, equally spaced in angle."""
    if n < 1:
        raise ValueError("need at least one bump")
    rad = np.tanh(0.55 * fx.INRADIUS_UNIT / 2)
    pts = [0j] + [rad * np.exp(2j * np.pi * k / (n - 1)) for k in range(n - 1)]
    return tuple(complex(p) for p in pts)


def min_lift_separation(group, centers):
    """Smallest base distance between distinct lifts of the centers."""
    c = np.asarray(centers)
    reach = 2 * np.abs(fx.unit_distance(c, 0)).max() + 2 * fx.INRADIUS_UNIT + 0.5
    orb = fx.enumerate_orbit(group, reach * group.scale)
    lifted = fx.su_act(orb.alpha[:, None], orb.beta[:, None], c[None, :])
    d = fx.unit_distance(c[:, None, None], lifted[None, :, :])
    ident = np.argmin(orb.distances)
    for i in range(len(c)):
        d[i, ident, i] = np.inf
    return float(d.min() * group.scale)


@dataclass(frozen=True, eq=False)
class ConformalMetric:
    group: fx.FuchsianGroup
    centers: tuple
    profile: BumpProfile
    t: tuple
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "centers", tuple(complex(p) for p in self.centers))
        object.__setattr__(self, "t", tuple(float(x) for x in self.t))
        if len(self.t) != len(self.centers):
            raise ValueError("one parameter per center is required")
        fx.check_disk(np.asarray(self.centers), "center")

    @classmethod
    def default(cls, group, n_bumps=2, t=None, centers=None, r2=None, r1=None):
        centers = default_centers(group, n_bumps) if centers is None else tuple(centers)
        if r2 is None:
            systole = 2 * fx.INRADIUS_UNIT * group.scale
            r2 = 0.4 * 0.5 * min(min_lift_separation(group, centers), systole)
        if r1 is None:
            r1 = inner_radius_for(r2, group.curvature)
        t = (0.0,) * len(centers) if t is None else tuple(t)
        return cls(group, centers, BumpProfile(r1, r2), t)

    def with_t(self, t):
        new = ConformalMetric(self.group, self.centers, self.profile, tuple(t))
        # lift catalogues do not depend on t
        new._cache.update({k: v for k, v in self._cache.items() if k[0] == "lifts"})
        return new

    @property
    def kappa0(self):
        return self.group.curvature

    @property
    def scale(self):
        return self.group.scale

    @property
    def c(self):
        return np.sqrt(-self.kappa0)

    @property
    def n_bumps(self):
        return len(self.centers)

    @property
    def is_flat(self):
        """True when the perturbation vanishes identically."""
        return not any(self.t)

    @property
    def unit_profile(self):
        return self.profile.scaled(self.c)

    @property
    def t_range(self):
        """Bounds (min u, max u) of the conformal factor."""
        t = np.array(self.t)
        return float(min(0.0, t.min())), float(max(0.0, t.max()))

    # --- lifted centers ---

    def lifts_within(self, radius_unit):
        """Positions and bump indices of all lifts within a unit radius of 0."""
        key = ("lifts", round(float(radius_unit), 6))
        if key not in self._cache:
            c = np.asarray(self.centers)
            reach = radius_unit + np.abs(fx.unit_distance(c, 0)).max() + 1e-9
            orb = fx.enumerate_orbit(self.group, reach * self.scale)
            pos = fx.su_act(orb.alpha[:, None], orb.beta[:, None], c[None, :]).ravel()
            ids = np.tile(np.arange(len(c)), len(orb))
            keep = fx.unit_distance(pos, 0) <= radius_unit
            self._cache[key] = (pos[keep], ids[keep])
        return self._cache[key]

    def lifts_from_orbit(self, orbit, radius_unit):
        """Lifts within a unit radius of 0, taken from an enumerated orbit."""
        c = np.asarray(self.centers)
        need = radius_unit + np.abs(fx.unit_distance(c, 0)).max() + 1e-9
        if orbit.radius / self.scale < need - 1e-12:
            raise ValueError("orbit too small for the requested lift radius")
        pos = fx.su_act(orbit.alpha[:, None], orbit.beta[:, None], c[None, :]).ravel()
        ids = np.tile(np.arange(len(c)), len(orbit))
        keep = fx.unit_distance(pos, 0) <= radius_unit
        return pos[keep], ids[keep]

    @cached_property
    def _local_lifts(self):
        # lifts that can influence points of the closed octagon
        return self.lifts_within(fx.CIRCUMRADIUS_UNIT + self.unit_profile.r2 + 0.75)

    def _nearest_bump(self, z):
        """Reduced point, bump id and unit distance of the closest lift."""
        y, _, _, _ = fx.reduce_to_domain(self.group, z)
        pos, ids = self._local_lifts
        flat = y.ravel()
        best_d = np.full(flat.shape, np.inf)
        best_i = np.zeros(flat.shape, int)
        for p, i in zip(pos, ids):
            d = fx.unit_distance(flat, p)
            closer = d < best_d
            best_d[closer] = d[closer]
            best_i[closer] = i
        return best_i.reshape(y.shape), best_d.reshape(y.shape)

    def conformal_factor(self, z):
        """u_t(z), invariant under the group."""
        z = fx.check_disk(z)
        if self.is_flat:
            return np.zeros(z.shape)
        ids, d_unit = self._nearest_bump(z)
        return np.asarray(self.t)[ids] * self.profile(d_unit / self.c)

    def laplacian_factor(self, z):
        """Base-metric Laplacian of u_t, from the radial profile derivatives."""
        z = fx.check_disk(z)
        if self.is_flat:
            return np.zeros(z.shape)
        ids, d_unit = self._nearest_bump(z)
        r = d_unit / self.c
        c = self.c
        with np.errstate(divide="ignore", invalid="ignore"):
            radial = np.where(r > 0, c / np.tanh(c * r), 0.0)
        lap = self.profile.derivative(r, 2) + radial * self.profile.derivative(r, 1)
        return np.asarray(self.t)[ids] * lap

    def curvature_at(self, z):
        """Gaussian curvature exp(-2u) (kappa0 - Lap_0 u) of g_t."""
        u = self.conformal_factor(z)
        return np.exp(-2 * u) * (self.kappa0 - self.laplacian_factor(z))

    # --- serialisation ---

    def to_dict(self):
        return {
            "kappa0": self.kappa0,
            "centers": [[p.real, p.imag] for p in self.centers],
            "r1": self.profile.r1,
            "r2": self.profile.r2,
            "t": list(self.t),
        }

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data):
        group = fx.standard_genus2_group(data["kappa0"])
        centers = [complex(x, y) for x, y in data["centers"]]
        return cls(group, centers, BumpProfile(data["r1"], data["r2"]), data["t"])


# --- curvature and area ---

def _bump_curvature_profile(profile, kappa0, t, r):
    c = np.sqrt(-kappa0)
    with np.errstate(divide="ignore", invalid="ignore"):
        radial = np.where(r > 0, c / np.tanh(c * r), 0.0)
    lap = profile.derivative(r, 2) + radial * profile.derivative(r, 1)
    return np.exp(-2 * t * profile(r)) * (kappa0 - t * lap)


def _curvature_lipschitz(profile, kappa0, t):
    """Bound on |dK/dr| across the transition annulus of one bump."""
    c = np.sqrt(-kappa0)
    d1, d2, d3 = profile.derivative_bounds()
    coth = c / np.tanh(c * profile.r1)
    csch2 = c**2 / np.sinh(c * profile.r1) ** 2
    lap_max = d2 + coth * d1
    dlap_max = d3 + coth * d2 + csch2 * d1
    a = abs(t)
    return np.exp(2 * a) * (2 * a * d1 * (abs(kappa0) + a * lap_max) + a * dlap_max)


def single_bump_curvature_bound(profile, kappa0, t, n_grid=4001):
    """Certified upper bound for the curvature of one bump with parameter t."""
    if t == 0:
        return float(kappa0)
    r = np.linspace(profile.r1, profile.r2, n_grid)
    k = _bump_curvature_profile(profile, kappa0, t, r).max()
    remainder = _curvature_lipschitz(profile, kappa0, t) * (r[1] - r[0]) / 2
    inner = kappa0 * np.exp(-2 * t)
    return float(max(k + remainder, inner, kappa0))


def curvature_bound(metric, n_grid=4001):
    """Upper bound on the curvature of g_t over the whole surface.

    Each bump is radial and supported in a disjoint disk, so the supremum
    over a fundamental domain is the maximum of one-dimensional radial
    suprema, each padded by a Lipschitz remainder.
    """
    bounds = [
        single_bump_curvature_bound(metric.profile, metric.kappa0, t, n_grid) for t in metric.t
    ]
    return float(max([metric.kappa0] + bounds))


def certified_parameter_radius(profile, kappa0, target=-1.0, n_grid=4001):
    """Largest eps with curvature bound <= target whenever all |t_i| <= eps."""
    def ok(eps):
        return all(
            single_bump_curvature_bound(profile, kappa0, s, n_grid) <= target for s in (eps, -eps)
        )

    lo, hi = 0.0, 1.0
    if ok(hi):
        return hi
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if ok(mid) else (lo, mid)
    return lo


def bump_area_excess(profile, kappa0, t):
    """Integral of exp(2 t rho) - 1 over one bump disk."""
    if t == 0:
        return 0.0
    c = np.sqrt(-kappa0)

    def f(r):
        return np.expm1(2 * t * profile(r)) * 2 * np.pi * np.sinh(c * r) / c

    inner = np.expm1(2 * t) * ball_area(profile.r1, kappa0)
    outer, _ = integrate.quad(f, profile.r1, profile.r2, epsabs=0, epsrel=1e-12, limit=200)
    return float(inner + outer)


def bump_integral(profile, kappa0, power=1):
    """Integral of rho**power over one bump disk."""
    c = np.sqrt(-kappa0)

    def f(r):
        return profile(r) ** power * 2 * np.pi * np.sinh(c * r) / c

    outer, _ = integrate.quad(f, profile.r1, profile.r2, epsabs=0, epsrel=1e-12, limit=200)
    return float(ball_area(profile.r1, kappa0) + outer)


def bump_area(profile, kappa0, t, radius):
    """Area of the concentric ball of ``radius`` <= r2 in the metric exp(2 t rho) g_0."""
    c = np.sqrt(-kappa0)

    def f(r):
        return np.exp(2 * t * profile(r)) * 2 * np.pi * np.sinh(c * r) / c

    if radius <= profile.r1:
        return float(np.exp(2 * t) * ball_area(radius, kappa0))
    outer, _ = integrate.quad(f, profile.r1, radius, epsabs=0, epsrel=1e-12, limit=200)
    return float(np.exp(2 * t) * ball_area(profile.r1, kappa0) + outer)


def surface_area(metric):
    """Area of the surface in g_t.

    The integral of exp(2u) over the octagon equals its integral over any
    fundamental domain; the bumps are disjoint, so it splits into the base
    area plus one radial integral per bump.
    """
    base = metric.group.domain.area
    return float(base + sum(bump_area_excess(metric.profile, metric.kappa0, t) for t in metric.t))


# --- lengths of base geodesics in the perturbed metric ---

def chord_excess(nu, sc, lo, hi, t, profile_unit):
    """Integral of exp(t rho) - 1 along part of a geodesic passing a bump.

    The geodesic passes the bump center at unit distance ``nu`` with foot
    at arclength ``sc``; the integral runs over arclength [lo, hi]. All
    arguments broadcast; lengths are unit-curvature.
    """
    anu = np.abs(np.asarray(nu, float))
    cn = np.cosh(anu)
    r1, r2 = profile_unit.r1, profile_unit.r2
    L2 = np.where(anu < r2, np.arccosh(np.maximum(np.cosh(r2) / cn, 1.0)), 0.0)
    L1 = np.where(anu < r1, np.arccosh(np.maximum(np.cosh(r1) / cn, 1.0)), 0.0)
    a = np.asarray(lo, float) - sc
    b = np.asarray(hi, float) - sc
    t = np.asarray(t, float)

    inner = np.clip(np.minimum(b, L1) - np.maximum(a, -L1), 0.0, None) * np.expm1(t)
    total = inner
    for left, right in ((-L2, -L1), (L1, L2)):
        p = np.maximum(a, left)
        q = np.minimum(b, right)
        span = np.clip(q - p, 0.0, None)
        mid = 0.5 * (p + q)
        tau = mid[..., None] + 0.5 * span[..., None] * _GL_NODES
        r = np.arccosh(np.maximum(cn[..., None] * np.cosh(tau), 1.0))
        f = np.expm1(t[..., None] * profile_unit(r))
        total = total + 0.5 * span * (f @ _GL_WEIGHTS)
    return total


def _excess_from_frame(cf, lengths, t, profile_unit):
    """Excess for lifts at frame positions ``cf`` (segment on [0, length])."""
    nu, sc = fermi_coordinates(fx.unit_distance(cf, 0), np.angle(cf))
    return chord_excess(nu, sc, 0.0, lengths, t, profile_unit)


def fermi_coordinates(rho, phi):
    """Signed offset and foot arclength of the point (rho, phi) w.r.t. the real axis.

    sinh nu = sinh rho sin phi and tanh sc = tanh rho cos phi, with the
    arctanh written so that far points keep their precision.
    """
    rho, phi = np.broadcast_arrays(np.asarray(rho, float), np.asarray(phi, float))
    nu = np.arcsinh(np.sinh(rho) * np.sin(phi))
    th = np.tanh(rho)
    e = 2.0 / (np.exp(np.minimum(2 * rho, 700.0)) + 1.0)  # 1 - tanh(rho)
    cp = np.cos(phi)
    a = np.abs(cp)
    big = 1 + th * a
    small = np.where(cp >= 0, 2 * np.sin(phi / 2) ** 2, 2 * np.cos(phi / 2) ** 2) + a * e
    with np.errstate(divide="ignore"):
        sc = np.sign(cp) * 0.5 * np.log(big / small)
    return nu, sc


def ray_lengths(metric, theta, lengths, orbit=None):
    """g_t-length of base radial segments from the origin.

    ``theta`` are directions and ``lengths`` base lengths (kappa0 units).
    Lifts are matched to segments through the angular window they subtend.
    An enumerated ``orbit`` large enough to contain them may be passed in.
    """
    theta = np.mod(np.asarray(theta, float), 2 * np.pi)
    lengths = np.asarray(lengths, float)
    if metric.is_flat or len(theta) == 0:
        return lengths.copy()
    L = lengths / metric.scale
    prof = metric.unit_profile
    if orbit is None:
        pos, ids = metric.lifts_within(L.max() + prof.r2)
    else:
        pos, ids = metric.lifts_from_orbit(orbit, L.max() + prof.r2)
    rho = fx.unit_distance(pos, 0)
    phi = np.mod(np.angle(pos), 2 * np.pi)
    tvec = np.asarray(metric.t)
    active = tvec[ids] != 0
    pos, ids, rho, phi = pos[active], ids[active], rho[active], phi[active]

    excess = np.zeros_like(L)
    around = rho <= prof.r2
    seg_all = np.arange(len(L))
    for k in np.flatnonzero(around):
        excess += _segment_excess(theta, L, seg_all, rho[k], phi[k], tvec[ids[k]], prof)

    far = ~around
    half = np.arcsin(np.minimum(1.0, np.sinh(prof.r2) / np.sinh(rho[far])))
    order = np.argsort(theta)
    ext = np.concatenate([theta[order] - 2 * np.pi, theta[order], theta[order] + 2 * np.pi])
    ext_idx = np.tile(order, 3)
    lo = np.searchsorted(ext, phi[far] - half, "left")
    hi = np.searchsorted(ext, phi[far] + half, "right")
    counts = hi - lo
    lift = np.repeat(np.flatnonzero(far), counts)
    offs = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    seg = ext_idx[np.repeat(lo, counts) + offs]
    reach = L[seg] >= rho[lift] - prof.r2
    seg, lift = seg[reach], lift[reach]
    for chunk in np.array_split(np.arange(len(seg)), max(1, len(seg) // 200_000)):
        s, k = seg[chunk], lift[chunk]
        nu, sc = fermi_coordinates(rho[k], phi[k] - theta[s])
        np.add.at(excess, s, chord_excess(nu, sc, 0.0, L[s], tvec[ids[k]], prof))
    return (L + excess) * metric.scale


def _segment_excess(theta, L, seg, rho, phi, t, prof):
    nu, sc = fermi_coordinates(rho, phi - theta[seg])
    return chord_excess(nu, sc, 0.0, L[seg], t, prof)


def path_length(metric, z1, z2, chunk=100_000):
    """g_t-length of the base geodesic segments [z1, z2] (kappa0 units).

    Points are sampled along each segment, reduced into the octagon, and
    every lift within r2 of a sample is collected; each lift's chord
    contribution is then integrated exactly. For small t this is the
    perturbed distance up to O(t^2), and always an upper bound for it.
    """
    z1 = fx.check_disk(z1)
    z2 = fx.check_disk(z2)
    z1, z2 = np.broadcast_arrays(z1, z2)
    shape = z1.shape
    z1, z2 = z1.ravel(), z2.ravel()
    L = fx.unit_distance(z1, z2)
    if metric.is_flat or len(L) == 0:
        return (L * metric.scale).reshape(shape)
    prof = metric.unit_profile
    h = min(prof.r2, 0.25)
    fa, fb = fx.su_frame(z1, z2)
    fa = np.where(L > 0, fa, 1.0 + 0j)
    fb = np.where(L > 0, fb, 0j)
    ia, ib = fx.su_inv(fa, fb)
    n = np.ceil(L / h).astype(int) + 1
    seg = np.repeat(np.arange(len(L)), n)
    step = np.repeat(L / (n - 1).clip(1), n)
    k = np.arange(n.sum()) - np.repeat(np.cumsum(n) - n, n)
    sample = fx.su_act(ia[seg], ib[seg], np.tanh(k * step / 2) + 0j)

    pos, ids = metric._local_lifts
    tvec = np.asarray(metric.t)
    found_seg, found_cf, found_id = [], [], []
    for part in np.array_split(np.arange(len(sample)), max(1, len(sample) // chunk)):
        y, ga, gb, _ = fx.reduce_to_domain(metric.group, sample[part])
        d = fx.unit_distance(y[:, None], pos[None, :])
        si, li = np.nonzero(d <= prof.r2 + h / 2 + 1e-9)
        si_glob = part[si]
        s = seg[si_glob]
        # lift position in the frame of its segment: F o gamma^-1 (c)
        ca, cb = fx.su_mul(fa[s], fb[s], *fx.su_inv(ga[si], gb[si]))
        found_seg.append(s)
        found_cf.append(fx.su_act(ca, cb, pos[li]))
        found_id.append(ids[li])
    s = np.concatenate(found_seg)
    cf = np.concatenate(found_cf)
    bid = np.concatenate(found_id)
    keep = tvec[bid] != 0
    s, cf, bid = s[keep], cf[keep], bid[keep]
    # the same lift is seen from several samples
    order = np.lexsort((cf.real, bid, s))
    s, cf, bid = s[order], cf[order], bid[order]
    dup = np.zeros(len(s), bool)
    if len(s) > 1:
        dup[1:] = (s[1:] == s[:-1]) & (bid[1:] == bid[:-1]) & (np.abs(cf[1:] - cf[:-1]) < 1e-7)
    s, cf, bid = s[~dup], cf[~dup], bid[~dup]
    excess = np.zeros_like(L)
    np.add.at(excess, s, _excess_from_frame(cf, L[s], tvec[bid], prof))
    return ((L + excess) * metric.scale).reshape(shape)


def ray_point(theta, depth_unit):
    """Point at unit distance ``depth_unit`` from 0 in direction ``theta``."""
    return np.tanh(np.asarray(depth_unit) / 2) * np.exp(1j * np.asarray(theta))


# --- mesh distances ---

_STENCIL = [(1, 0), (0, 1)] + [
    (p, s * q)
    for p, q in [(1, 1), (2, 1), (1, 2), (3, 1), (1, 3), (3, 2), (2, 3), (4, 1), (5, 1), (6, 1)]
    for s in (1, -1)
]


def lifts_near(metric, z, reach_unit):
    """Distinct lifts of the bump centers within ``reach_unit`` of some point of z."""
    y, ga, gb, _ = fx.reduce_to_domain(metric.group, np.asarray(z).ravel())
    pos, ids = metric._local_lifts
    d = fx.unit_distance(y[:, None], pos[None, :])
    zi, li = np.nonzero(d <= reach_unit)
    if not len(zi):
        return np.zeros(0, complex), np.zeros(0, int)
    lifted = fx.su_act(*fx.su_inv(ga[zi], gb[zi]), pos[li])
    bid = ids[li]
    # most hits are exact repeats; collapse those before the tolerance merge
    key = np.round(np.column_stack([lifted.real, lifted.imag]) * 1e9)
    _, first = np.unique(key, axis=0, return_index=True)
    lifted, bid = lifted[first], bid[first]
    tree = cKDTree(np.column_stack([lifted.real, lifted.imag]))
    rep = np.array([min(g) for g in tree.query_ball_point(tree.data, 1e-8)])
    keep = np.unique(rep)
    return lifted[keep], bid[keep]


def edge_lengths(metric, z, rows, cols):
    """g_t-lengths of the base geodesic edges z[rows] -- z[cols] (kappa0 units)."""
    za, zb = z[rows], z[cols]
    base = fx.unit_distance(za, zb)
    if metric.is_flat:
        return base * metric.scale
    prof = metric.unit_profile
    lmax = float(base.max())
    lift_pos, lift_id = lifts_near(metric, z, prof.r2 + lmax + 1e-9)
    tvec = np.asarray(metric.t)
    excess = np.zeros_like(base)
    for c, b in zip(lift_pos, lift_id):
        if tvec[b] == 0:
            continue
        near = np.flatnonzero(fx.unit_distance(za, c) <= prof.r2 + base + 1e-9)
        if not len(near):
            continue
        fa, fb = fx.su_frame(za[near], zb[near])
        cf = fx.su_act(fa, fb, c)
        excess[near] += _excess_from_frame(cf, base[near], tvec[b], prof)
    return (base + excess) * metric.scale


def _check_meshed(metric, z):
    if np.any(fx.unit_distance(z, 0) * metric.scale > MESH_RADIUS + 1e-9):
        raise OutOfRangeError(f"point farther than {MESH_RADIUS} from the origin")


class DistanceMesh:
    """Graph on a Fermi-coordinate grid around the base geodesic [x, y].

    Level ``l`` has spacing ``h0 / 2**l``; its edge set contains every edge
    of the coarser levels with identical weights, so shortest-path lengths
    can only decrease under refinement. Edge weights are the exact g_t
    lengths of the base geodesic edges, so every graph path is the length
    of an actual curve and the result bounds the distance from above.
    """

    def __init__(self, metric, x, y, h0=0.1):
        self.metric = metric
        self.x, self.y = complex(x), complex(y)
        d = float(fx.unit_distance(self.x, self.y))
        self.d_unit = d
        a = d / 2
        umin, umax = metric.t_range
        eps = d * np.expm1(umax - umin)
        self.n0 = max(2, int(np.ceil(a / h0)))
        self.h0 = a / self.n0 if a > 0 else h0
        width = np.arccosh(np.cosh(a + eps / 2) / np.cosh(a)) if a > 0 else eps / 2
        self.m0 = int(np.ceil((eps / 2) / self.h0)) + 1
        self.j0 = max(1, int(np.ceil(min(width, 3.0) / self.h0)) + 1)
        fa, fb = fx.su_frame(self.x, self.y)
        ta, tb = np.cosh(a / 2), -np.sinh(a / 2) + 0j  # shift by -a along the axis
        na, nb = fx.su_mul(ta + 0j, tb, fa, fb)
        self._inv = fx.su_inv(na, nb)
        self.levels = []

    def _points(self, s, nu):
        w = 1j * np.tanh(nu / 2)
        th = np.tanh(s / 2)
        return fx.su_act(*self._inv, (w + th) / (1 + th * w))

    def shape(self, level):
        f = 2**level
        return 2 * (self.n0 + self.m0) * f + 1, 2 * self.j0 * f + 1

    def graph(self, level):
        f = 2**level
        h = self.h0 / f
        K, J = self.shape(level)
        ks = (np.arange(K) - (K - 1) // 2) * h
        js = (np.arange(J) - (J - 1) // 2) * h
        S, N = np.meshgrid(ks, js, indexing="ij")
        Z = self._points(S, N).ravel()

        rows, cols = [], []
        idx = np.arange(K * J).reshape(K, J)
        for q in range(level + 1):
            m = 2**q
            for p, r in _STENCIL:
                dp, dr = p * m, r * m
                i0 = np.arange(0, K - dp, m) if dp >= 0 else np.arange(-dp, K, m)
                j_lo, j_hi = max(0, -dr), min(J, J - dr)
                j0 = np.arange(j_lo + ((-j_lo) % m), j_hi, m)
                if not len(i0) or not len(j0):
                    continue
                I, Jg = np.meshgrid(i0, j0, indexing="ij")
                rows.append(idx[I, Jg].ravel())
                cols.append(idx[I + dp, Jg + dr].ravel())
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        wts = edge_lengths(self.metric, Z, rows, cols)
        graph = sparse.coo_matrix((wts, (rows, cols)), shape=(K * J, K * J)).tocsr()
        src = idx[(K - 1) // 2 - self.n0 * f, (J - 1) // 2]
        dst = idx[(K - 1) // 2 + self.n0 * f, (J - 1) // 2]
        return graph, int(src), int(dst), Z

    def solve(self, level, return_path=False):
        graph, src, dst, Z = self.graph(level)
        dist, pred = dijkstra(graph, directed=False, indices=src, return_predecessors=True)
        stats = {
            "level": level,
            "vertices": graph.shape[0],
            "max_edge": float(graph.data.max()) if graph.nnz else 0.0,
            "distance": float(dist[dst]),
        }
        self.levels.append(stats)
        if not return_path:
            return float(dist[dst])
        path = [dst]
        while path[-1] != src:
            path.append(pred[path[-1]])
        return float(dist[dst]), Z[np.array(path[::-1])]

    def stats_csv(self):
        lines = ["level,vertices,max_edge_length,distance"]
        for s in self.levels:
            lines.append(f"{s['level']},{s['vertices']},{s['max_edge']:.17g},{s['distance']:.17g}")
        return "\n".join(lines) + "\n"


def distance(metric, x, y, tol=1e-3, max_level=5, max_vertices=2_000_000, return_mesh=False):
    """Perturbed distance by refined mesh shortest paths, relative error tol."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    x = complex(fx.check_disk(x))
    y = complex(fx.check_disk(y))
    _check_meshed(metric, np.array([x, y]))
    if x == y:
        return 0.0
    if metric.is_flat:
        return float(fx.unit_distance(x, y) * metric.scale)
    mesh = DistanceMesh(metric, x, y)
    prev = None
    for level in range(max_level + 1):
        K, J = mesh.shape(level)
        if K * J > max_vertices:
            raise BudgetExceededError(
                "mesh refinement budget exceeded",
                partial=prev,
                best_estimate=prev,
                achieved_tolerance=_achieved(mesh),
            )
        cur = mesh.solve(level)
        if prev is not None and abs(prev - cur) < 0.5 * tol * cur:
            return (cur, mesh) if return_mesh else cur
        prev = cur
    raise BudgetExceededError(
        "mesh refinement did not reach the tolerance",
        partial=prev,
        best_estimate=prev,
        achieved_tolerance=_achieved(mesh),
    )


def _achieved(mesh):
    d = [s["distance"] for s in mesh.levels]
    if len(d) < 2:
        return None
    return 2 * abs(d[-1] - d[-2]) / d[-1]


# --- distance to a geodesic with ideal endpoints ---

def _flat_distance_to_geodesic(metric, w, theta1, theta2):
    a, b = fx.su_translate_to_origin(w)
    e1 = fx.su_act(a, b, np.exp(1j * theta1))
    e2 = fx.su_act(a, b, np.exp(1j * theta2))
    gap = np.abs(np.angle(e2 / e1))
    R_unit = np.arccosh(1.0 / np.sin(gap / 2))
    mid = np.angle(e1 * np.exp(0.5j * np.angle(e2 / e1)))
    foot_local = np.tanh(R_unit / 2) * np.exp(1j * mid)
    foot = fx.su_act(*fx.su_inv(a, b), foot_local)
    return R_unit * metric.scale, foot


def distance_to_geodesic(metric, w, theta1, theta2, depth=10.0):
    """Distance from ``w`` to the geodesic with endpoints at angles theta1, theta2.

    For t = 0 the closed form cosh R = 1/sin(gap/2) is used after moving w to 0.
    Otherwise the geodesic is approximated by the mesh shortest path between
    the points at base depth ``depth`` along the two rays from the origin.
    """
    if np.isclose(np.mod(theta1 - theta2, 2 * np.pi), 0.0, atol=1e-15):
        raise PreconditionError("endpoints must be distinct")
    w = complex(fx.check_disk(w))
    if metric.is_flat:
        R, foot = _flat_distance_to_geodesic(metric, w, theta1, theta2)
        return float(R), complex(foot)
    T = depth / metric.scale
    x, y = ray_point(theta1, T), ray_point(theta2, T)
    _, mesh = distance(metric, x, y, return_mesh=True)
    _, path = mesh.solve(len(mesh.levels) - 1, return_path=True)
    d = path_length(metric, np.full(len(path), w), path)
    k = int(np.argmin(d))
    return float(d[k]), complex(path[k])
