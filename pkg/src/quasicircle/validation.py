"""Invariant suite run by ``quasicircle validate``."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import boundary as bd
from . import entropy as en
from . import families as fa
from . import fuchsian as fx
from . import metric as mt
from . import oracles


@dataclass
class Check:
    module: str
    name: str
    passed: bool
    value: float

    def to_dict(self):
        return {"module": self.module, "name": self.name, "passed": bool(self.passed), "value": float(self.value)}


def _random_disk(rng, n, max_dist):
    r = np.tanh(rng.uniform(0, max_dist, n) / 2)
    return r * np.exp(1j * rng.uniform(0, 2 * np.pi, n))


def fuchsian_checks(rng):
    out = []
    for k in (-1.0, -2.0):
        g = fx.standard_genus2_group(k)
        a, b = g.relator_matrix().su11
        out.append(Check("fuchsian", f"relator fixes basepoint k={k}", abs(b / np.conj(a)) < 1e-8, abs(b / np.conj(a))))
        area = g.domain.area
        want = 4 * np.pi / -k
        out.append(Check("fuchsian", f"octagon area k={k}", abs(area - want) / want < 1e-4, area))
    g = fx.standard_genus2_group(-1.0)
    worst = 0.0
    for gen in g.generators:
        worst = max(worst, np.abs(np.abs((gen @ gen.inverse()).su11[0]) - 1).max())
    out.append(Check("fuchsian", "generator inverses", worst < 1e-10, worst))
    n1 = fx.enumerate_orbit(g, 6.0).count(6.0)
    n2 = fx.enumerate_orbit(g, 6.0, letter_order=rng.permutation(8)).count(6.0)
    out.append(Check("fuchsian", "orbit count order independent", n1 == n2, n1))
    orb = fx.enumerate_orbit(g, 6.0)
    ia, ib = fx.su_inv(orb.alpha, orb.beta)
    sym = np.abs(fx.unit_distance_from_origin(ia) - orb.distances).max()
    out.append(Check("fuchsian", "d(w, gw) = d(w, g^-1 w)", sym < 1e-9, sym))
    i, j = rng.integers(0, len(orb), 2)
    prod = orb.element(i).matrix @ orb.element(j).matrix
    ref = g.word_matrix(orb.word(i) + orb.word(j))
    out.append(Check("fuchsian", "composition consistent", prod.projectively_close(ref, 1e-8), 0.0))
    p = _random_disk(rng, 200, 10.0)
    y, _, _, _ = fx.reduce_to_domain(g, p)
    far = fx.unit_distance(y, 0).max()
    out.append(Check("fuchsian", "located points within D", far <= g.domain.diameter + 1e-8, far))
    return out


def metric_checks(rng):
    out = []
    g = fx.standard_genus2_group(-1.0)
    m = mt.ConformalMetric.default(g, 2, t=(0.1, -0.05))
    z = _random_disk(rng, 100, 1.5)
    gens = g.generators
    moved = gens[0](gens[3](z))
    inv = np.abs(m.conformal_factor(z) - m.conformal_factor(moved)).max()
    out.append(Check("metric", "conformal factor invariant", inv < 1e-9, inv))
    # Laplacian vs 5-point stencil in the transition annulus of the origin bump
    prof = m.profile
    rr = rng.uniform(prof.r1, prof.r2, 50)
    zz = np.tanh(rr / 2) * np.exp(1j * rng.uniform(0, 2 * np.pi, 50))
    h = 1e-3 * (prof.r2 - prof.r1)
    f = m.conformal_factor
    lap_e = (f(zz + h) + f(zz - h) + f(zz + 1j * h) + f(zz - 1j * h) - 4 * f(zz)) / h**2
    lap_fd = lap_e * (1 - np.abs(zz) ** 2) ** 2 / 4
    lap = m.laplacian_factor(zz)
    err = np.abs(lap_fd - lap).max() / np.abs(lap).max()
    out.append(Check("metric", "analytic Laplacian vs finite differences", err < 1e-3, err))
    plateau = np.array([0.0, m.centers[1]])
    k = m.curvature_at(plateau)
    want = np.array([-np.exp(-0.2), -np.exp(0.1)])
    out.append(Check("metric", "plateau curvature", np.allclose(k, want, atol=1e-12), np.abs(k - want).max()))
    a1 = mt.surface_area(m.with_t((0.1, 0.0)))
    a2 = oracles.area_grid_sum(m.with_t((0.1, 0.0)), n=1500)
    out.append(Check("metric", "area vs grid oracle", abs(a1 - a2) < 1e-5, abs(a1 - a2)))
    flat = m.with_t((0.0, 0.0))
    d0 = mt.distance(flat, 0, 0.5)
    out.append(Check("metric", "flat distance closed form", abs(d0 - 2 * np.arctanh(0.5)) < 1e-12, d0))
    # segments through both bumps, third point random
    x, y = -0.2 + 0.02j * rng.uniform(-1, 1), 0.5 + 0.02j * rng.uniform(-1, 1)
    w = _random_disk(rng, 1, 1.0)[0]
    dxy, dyx = mt.distance(m, x, y), mt.distance(m, y, x)
    out.append(Check("metric", "distance symmetric", abs(dxy - dyx) < 3e-3 * dxy, abs(dxy - dyx)))
    dxw, dwy = mt.distance(m, x, w), mt.distance(m, w, y)
    out.append(Check("metric", "triangle inequality", dxy <= (dxw + dwy) * (1 + 3e-3), dxw + dwy - dxy))
    base = float(fx.unit_distance(x, y))
    lo, hi = np.exp(-0.1), np.exp(0.1)
    out.append(Check("metric", "bi-Lipschitz sandwich", lo * base <= dxy * (1 + 1e-3) and dxy <= hi * base * (1 + 1e-3), dxy / base))
    gxy = mt.distance(m, gens[2](x), gens[2](y))
    out.append(Check("metric", "distance equivariant", abs(gxy - dxy) < 3e-3 * dxy, abs(gxy - dxy)))
    single = m.with_t((0.1, 0.0))
    a = np.tanh(0.125)
    ds = mt.distance(single, -a + 0.01j, a)
    sh = oracles.shooting_distance(single, -a + 0.01j, a)
    out.append(Check("metric", "mesh vs shooting", abs(ds - sh) < 1e-3 * sh and ds > fx.unit_distance(-a + 0.01j, a), ds - sh))
    kb = mt.curvature_bound(single)
    out.append(Check("metric", "curvature bound dominates samples", kb >= single.curvature_at(_random_disk(rng, 2000, 0.2)).max(), kb))
    return out


def entropy_checks(rng):
    out = []
    g = fx.standard_genus2_group(-1.0)
    m = mt.ConformalMetric.default(g, 2)
    c = en.orbit_census(m, 12.0)
    e = en.entropy_estimate(c)
    out.append(Check("entropy", "anchor kappa=-1", abs(e.s - 1) < 0.05, e.s))
    lam = 1.7
    e2 = en.entropy_estimate(c.scaled(lam), min_span=3.0 * lam)
    out.append(Check("entropy", "estimator scaling", abs(e2.s * lam - e.s) < 1e-12, e2.s * lam - e.s))
    drop = en.entropy_estimate(c, window=(e.window[0] + 0.25, e.window[1]))
    out.append(Check("entropy", "window stability", abs(drop.s - e.s) < max(e.stderr, drop.stderr), drop.s - e.s))
    out.append(Check("entropy", "census starts at 1", c.counts[0] == 1, c.counts[0]))
    grad = en.entropy_gradient(mt.ConformalMetric.default(fx.standard_genus2_group(-2.0), 3))
    spread = grad.max() / grad.min() - 1
    out.append(Check("entropy", "gradient negative and equal", np.all(grad < 0) and abs(spread) < 1e-8, spread))
    pert = m.with_t((0.1, -0.1))
    ep = en.entropy_estimate(en.orbit_census(pert, 12.0))
    ok = np.exp(-0.1) * e.s - 2 * ep.stderr <= ep.s <= np.exp(0.1) * e.s + 2 * ep.stderr
    out.append(Check("entropy", "conformal sandwich", ok, ep.s))
    return out


def boundary_checks(rng):
    out = []
    g = fx.standard_genus2_group(-1.0)
    ctx = bd.VisualMetricContext(mt.ConformalMetric.default(g, 2))
    a, b = rng.uniform(0, 2 * np.pi, 2)
    sym = abs(bd.gromov_product(ctx, a, b) - bd.gromov_product(ctx, b, a))
    out.append(Check("boundary", "product symmetric", sym < 1e-9, sym))
    v = bd.visual_distance(ctx.with_variant("geodesic"), 0.0, np.pi / 2)
    out.append(Check("boundary", "d-hat closed form", abs(v - np.tan(np.pi / 8)) < 1e-9, v))
    p = bd.gromov_product(ctx, 0.0, np.pi / 2)
    out.append(Check("boundary", "product closed form", abs(p + np.log(np.sin(np.pi / 4))) < 1e-6, p))
    s = rng.uniform(0, 2 * np.pi)
    rot = abs(bd.visual_distance(ctx, a + s, b + s) - bd.visual_distance(ctx, a, b))
    out.append(Check("boundary", "rotation equivariance", rot < 1e-8, rot))
    pert = bd.VisualMetricContext(mt.ConformalMetric.default(g, 2, t=(0.05, -0.05)))
    x, y, w = rng.uniform(0, 2 * np.pi, (3, 300))
    dxy, dxw, dwy = pert.distances(x, y), pert.distances(x, w), pert.distances(w, y)
    tri = (dxy / (dxw + dwy)).max()
    out.append(Check("boundary", "visual triangle inequality (5%)", tri <= 1.05, tri))
    ta, tb, dw, dh = bd.pair_samples(ctx, 1000, seed=int(rng.integers(1 << 30)))
    ratio = np.log(dw / dh)
    out.append(Check("boundary", "d_w and d-hat bi-Lipschitz", np.ptp(ratio) < 2 * np.log(2) + 1e-9, np.ptp(ratio)))
    reg = bd.regularity_ratios(ctx, 1.0, n_centers=50)
    out.append(Check("boundary", "regularity spread", reg.spread < 20, reg.spread))
    return out


def family_checks(rng):
    out = []
    ok = fa.nonisometry_certificate((0.1, 0.2), (0.2, 0.1), 1.0) == fa.INCONCLUSIVE
    ok &= fa.nonisometry_certificate((0.1, 0.2), (0.1, 0.3), 1.0) == fa.CERTIFIED
    out.append(Check("families", "certificate examples", ok, 0.0))
    s1, s2 = rng.uniform(0.5, 2.0, 2)
    l1, l2 = fa.rescale_to_common_dimension(s1, s2)
    out.append(Check("families", "rescaling equalizes", abs(s1 / l1 - s2 / l2) < 1e-12 and max(l1, l2) == 1.0, s1 / l1 - s2 / l2))
    g1, g2 = fa.gap_bound(s1, s2), fa.gap_bound(s2, s1)
    out.append(Check("families", "gap symmetric", g1 == g2, g1.epsilon))
    gap = fa.gap_bound(1.0, np.sqrt(2)).epsilon
    out.append(Check("families", "gap(1, sqrt 2)", abs(gap - (np.sqrt(2) - 1)) < 1e-15, gap))
    m = mt.ConformalMetric.default(fx.standard_genus2_group(-2.0), 2)
    box = fa.certified_box(m)
    kb = mt.curvature_bound(m.with_t((0.999 * box, -0.999 * box)))
    out.append(Check("families", "certified box keeps curvature <= -1", kb <= -1.0, kb))
    return out


def run_suite(seed=0):
    rng = np.random.default_rng(seed)
    checks = []
    for fn in (fuchsian_checks, metric_checks, entropy_checks, boundary_checks, family_checks):
        checks.extend(fn(rng))
    return checks
