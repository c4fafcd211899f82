"""Acceptance criteria, one test per criterion at the stated tolerances."""
import itertools

import numpy as np
import pytest

from quasicircle import boundary as bd
from quasicircle import cli
from quasicircle import entropy as en
from quasicircle import families as fa
from quasicircle import fuchsian as fx
from quasicircle import metric as mt


@pytest.fixture(scope="module")
def groups():
    return {k: fx.standard_genus2_group(k) for k in (-1.0, -2.0)}


@pytest.fixture(scope="module")
def metrics(groups):
    return {k: mt.ConformalMetric.default(g, 2) for k, g in groups.items()}


@pytest.fixture(scope="module")
def entropies(metrics):
    c1 = en.orbit_census(metrics[-1.0], 12.0, 0.25)
    c2 = en.orbit_census(metrics[-2.0], 9.0, 0.25)
    return {-1.0: (c1, en.entropy_estimate(c1)), -2.0: (c2, en.entropy_estimate(c2))}


@pytest.fixture(scope="module")
def boxdims(metrics):
    return {
        -1.0: bd.boxcount_dimension(bd.VisualMetricContext(metrics[-1.0]), m=4000),
        -2.0: bd.boxcount_dimension(bd.VisualMetricContext(metrics[-2.0]), m=16000),
    }


def test_1_entropy_anchor(entropies, criterion):
    s1 = entropies[-1.0][1].s
    s2 = entropies[-2.0][1].s
    ok = abs(s1 - 1.0) <= 0.05 and abs(s2 - np.sqrt(2)) <= 0.07
    criterion(1, "entropy anchors", ok, f"s(-1) = {s1:.5f}, s(-2) = {s2:.5f}")


def test_2_dimension_entropy(metrics, entropies, boxdims, criterion):
    rows = []
    for k in (-1.0, -2.0):
        rows.append((f"k={k:g}", boxdims[k].dimension, entropies[k][1].s))
    pert = metrics[-1.0].with_t((0.05, 0.0))
    dim_p = bd.boxcount_dimension(bd.VisualMetricContext(pert), m=2000).dimension
    s_p = en.entropy_estimate(en.orbit_census(pert, 12.0, 0.25)).s
    rows.append(("k=-1 t1=0.05", dim_p, s_p))
    ok = all(abs(d - s) <= 0.15 for _, d, s in rows)
    detail = ", ".join(f"{n}: dim {d:.4f} vs s {s:.4f}" for n, d, s in rows)
    criterion(2, "dimension equals entropy", ok, detail)


def test_3_scaling(entropies, boxdims, criterion):
    c, e = entropies[-1.0]
    worst = 0.0
    for lam in (0.5, 2**-0.5, 1.7, 3.0):
        e2 = en.entropy_estimate(c.scaled(lam), min_span=3.0 * lam)
        worst = max(worst, abs(e2.s * lam - e.s))
    ratio = boxdims[-2.0].dimension / boxdims[-1.0].dimension
    ok = worst <= 1e-12 and abs(ratio - np.sqrt(2)) <= 0.1
    criterion(3, "scaling law", ok, f"estimator identity error {worst:.2e}, dimension ratio {ratio:.4f}")


def test_4_ahlfors_regularity(metrics, boxdims, criterion):
    ctx = bd.VisualMetricContext(metrics[-1.0])
    reg = bd.regularity_ratios(ctx, boxdims[-1.0].dimension, n_centers=200, radii=2.0 ** -np.arange(2, 9))
    full = reg.spread
    # halving the log-scale range, either end
    halves = [reg.spread_over(2**-5, 2**-2), reg.spread_over(2**-8, 2**-5)]
    ok = full < 20 and all(full <= 2 * h for h in halves)
    criterion(4, "Ahlfors regularity", ok, f"spread {full:.4f}, half-range spreads {halves[0]:.4f}, {halves[1]:.4f}")


def test_5_expansion(metrics, criterion):
    ctx = bd.VisualMetricContext(metrics[-1.0])
    fit = [2**-4, 2**-5, 2**-6]
    held = 2**-7
    scan = bd.expansion_scan(ctx, fit + [held], n_arcs=1000, n_pairs=8, seed=0)
    band = bd.fit_band(np.concatenate([scan[float(r)].factors.ravel() for r in fit]))
    f = scan[float(held)].factors.ravel()
    inside = np.mean((f >= band[0]) & (f <= band[1]))
    criterion(5, "quasicircle expansion", inside >= 0.99, f"band [{band[0]:.4f}, {band[1]:.4f}], held-out inside {inside:.4f}")


def test_6_first_variation(groups, criterion):
    g = groups[-2.0]
    base = mt.default_centers(g, 2)
    # e1 on the bump away from the basepoint
    m = mt.ConformalMetric.default(g, 2, centers=(base[1], base[0]))
    e1 = np.array([1.0, 0.0])
    analytic = en.entropy_derivative(m, e1)
    h, step, window = 0.05, 0.01, (4.0, 8.5)
    radii = np.arange(step, 8.5 + step / 2, step)
    s = {}
    for sign in (-1, 1):
        d = en.orbit_distances(m.with_t(sign * h * e1), 8.5)
        s[sign] = en.entropy_estimate(en.census_from_distances(d, radii), window=window).s
    fd = (s[1] - s[-1]) / (2 * h)
    rel = abs(fd - analytic) / abs(analytic)
    grad = en.entropy_gradient(mt.ConformalMetric.default(g, 3))
    spread = float(np.ptp(grad))
    ok = rel <= 0.10 and spread <= 1e-8 and np.all(grad < 0)
    criterion(6, "first variation", ok, f"analytic {analytic:.5f}, finite difference {fd:.5f} ({rel:.1%}), gradient spread {spread:.1e}")


def _family(groups, v, steps=3):
    n = len(v)
    m = mt.ConformalMetric.default(groups[-2.0], n)
    F = fa.EntropyFunctional(m, 8.0, 0.01, (4.0, 8.0))
    box = fa.certified_box(m)
    tol_F = 2 * F(np.zeros(n)).stderr
    pts = fa.track_level_set(m, v, steps, F=F, tol_F=tol_F, box=box)
    # t = 0 is excluded: the certificate needs nonzero parameters
    sl = fa.equal_area_slice(m, pts[1:], tol_A=1e-4, F=F, tol_F=tol_F, box=box)
    return sl, tol_F, box


def _family_ok(sl, tol_F, box, tol_A=1e-4):
    p = sl.points
    pairs = list(itertools.combinations(range(len(p)), 2))
    dF = max(abs(p[i].entropy.s - p[j].entropy.s) for i, j in pairs)
    dA = max(abs(p[i].area - p[j].area) for i, j in pairs)
    cert = all(fa.nonisometry_certificate(p[i], p[j], box) == fa.CERTIFIED for i, j in pairs)
    kb = max(q.curvature_bound for q in p)
    ok = len(p) >= 3 and dF < tol_F and dA < 2 * tol_A * sl.target and cert and kb <= -1.0
    return ok, f"{len(p)} points, max dF {dF:.2e} (tol {tol_F:.2e}), max dArea {dA:.2e}, certified {cert}, max K {kb:.3f}"


def test_7_families(groups, criterion):
    out = []
    for v in (np.array([1.0, -1.0]) / np.sqrt(2), np.array([1.0, 2.0, -3.0]) / np.sqrt(14)):
        sl, tol_F, box = _family(groups, v)
        out.append(_family_ok(sl, tol_F, box))
    ok = all(o for o, _ in out)
    criterion(7, "equal entropy and area families", ok, f"k=0: {out[0][1]}; k=1: {out[1][1]}")


def test_8_gap(metrics, criterion):
    eps = fa.gap_bound(1.0, np.sqrt(2)).epsilon
    exact = eps == np.sqrt(2) - 1
    rng = np.random.default_rng(8)
    ratios = []
    for _ in range(10):
        x, y = np.tanh(rng.uniform(0.5, 3.0, 2) / 2) * np.exp(2j * np.pi * rng.random(2))
        # the mesh route is forced; distance() would use the closed form at t = 0
        d1 = mt.DistanceMesh(metrics[-1.0], x, y).solve(2)
        d2 = mt.DistanceMesh(metrics[-2.0], x, y).solve(2)
        ratios.append(d1 / d2)
    ratios = np.array(ratios)
    dev = np.abs(ratios - np.sqrt(2)).max()
    ok = exact and dev <= 1e-3 * np.sqrt(2) and eps == pytest.approx(ratios.max() - 1, abs=1e-3)
    criterion(8, "gap bound", ok, f"epsilon {eps!r}, identity-map ratios in [{ratios.min():.6f}, {ratios.max():.6f}]")


def test_9_validate(tmp_path, criterion):
    a, b = tmp_path / "a", tmp_path / "b"
    codes = [cli.main(["validate", "--seed", "11", "--out", str(p)]) for p in (a, b)]
    same = (a / "validate.json").read_bytes() == (b / "validate.json").read_bytes()
    ok = codes == [0, 0] and same
    criterion(9, "validate suite", ok, f"exit codes {codes}, byte-identical reports {same}")
