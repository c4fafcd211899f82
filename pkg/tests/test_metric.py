import json

import numpy as np
import pytest
from scipy import integrate

from quasicircle import fuchsian as fx
from quasicircle import metric as mt
from quasicircle import oracles
from quasicircle.errors import InvalidCurvatureError, OutOfRangeError, PreconditionError


@pytest.fixture(scope="module")
def g1():
    return fx.standard_genus2_group(-1.0)


@pytest.fixture(scope="module")
def m1(g1):
    return mt.ConformalMetric.default(g1, 2)


def test_default_radii(g1, m1):
    p = m1.profile
    # fixed by the default radius rule
    assert p.r2 == pytest.approx(0.1681, abs=1e-4)
    assert p.r1 == pytest.approx(0.1504, abs=1e-4)
    assert mt.ball_area(p.r1, -1) == pytest.approx(0.8 * mt.ball_area(p.r2, -1), rel=1e-12)


def test_default_radii_k2():
    m = mt.ConformalMetric.default(fx.standard_genus2_group(-2.0), 2)
    assert m.profile.r2 == pytest.approx(0.11889, abs=1e-5)
    assert m.profile.r1 == pytest.approx(0.10637, abs=1e-5)


def test_profile_values():
    p = mt.BumpProfile(0.1, 0.2)
    assert p(0.0) == 1.0 and p(0.1) == 1.0 and p(0.2) == 0.0 and p(0.5) == 0.0
    assert p(0.15) == pytest.approx(0.5)
    r = np.linspace(0.0, 0.3, 3001)
    assert np.all(np.diff(p(r)) <= 1e-15)


@pytest.mark.parametrize("order", [1, 2])
def test_profile_derivatives(order):
    p = mt.BumpProfile(0.1, 0.2)
    r = np.linspace(0.102, 0.198, 97)
    h = 1e-6
    f = p if order == 1 else (lambda x: p.derivative(x, 1))
    fd = (f(r + h) - f(r - h)) / (2 * h)
    assert np.allclose(p.derivative(r, order), fd, rtol=1e-5, atol=1e-3)


def test_profile_bounds_attained():
    p = mt.BumpProfile(0.1, 0.2)
    r = np.linspace(0.1, 0.2, 200001)
    for k, b in enumerate(p.derivative_bounds(), start=1):
        sup = np.abs(p.derivative(r, k)).max()
        assert sup <= b * (1 + 1e-12)
        assert sup >= 0.999 * b


def test_bad_profile():
    with pytest.raises(ValueError):
        mt.BumpProfile(0.2, 0.1)


def test_curvature_guard():
    with pytest.raises(InvalidCurvatureError):
        fx.standard_genus2_group(0.0)


def test_flat_metric(m1):
    z = np.array([0.0, 0.3 + 0.1j, -0.5j])
    assert np.all(m1.conformal_factor(z) == 0)
    assert np.allclose(m1.curvature_at(z), -1.0)
    assert mt.surface_area(m1) == pytest.approx(4 * np.pi)


def test_plateau_values(m1):
    m = m1.with_t((0.1, -0.05))
    z = np.array([0.0, m.centers[1]])
    assert np.allclose(m.conformal_factor(z), [0.1, -0.05])
    assert np.allclose(m.curvature_at(z), [-np.exp(-0.2), -np.exp(0.1)], atol=1e-12)


def test_factor_invariant(m1, g1):
    m = m1.with_t((0.1, -0.05))
    rng = np.random.default_rng(0)
    z = np.tanh(rng.uniform(0, 2, 200) / 2) * np.exp(2j * np.pi * rng.random(200))
    for gen in g1.generators:
        assert np.abs(m.conformal_factor(gen(z)) - m.conformal_factor(z)).max() < 1e-9


def test_area_frozen(m1):
    # frozen, confirmed by the grid-sum oracle to 1e-13
    assert mt.surface_area(m1.with_t((0.1, 0.0))) == pytest.approx(12.584020667965884, rel=1e-12)


def test_area_against_oracle(m1):
    m = m1.with_t((0.08, -0.06))
    assert mt.surface_area(m) == pytest.approx(oracles.area_grid_sum(m, n=1500), abs=1e-7)


def test_area_increasing_in_t(m1):
    a = [mt.surface_area(m1.with_t((x, 0.0))) for x in (-0.1, 0.0, 0.1)]
    assert a[0] < a[1] < a[2]


def test_curvature_bound_dominates(m1):
    m = m1.with_t((0.1, 0.0))
    kb = mt.curvature_bound(m)
    rng = np.random.default_rng(1)
    r = rng.uniform(m.profile.r1, m.profile.r2, 5000)
    z = np.tanh(r / 2) * np.exp(2j * np.pi * rng.random(5000))
    assert m.curvature_at(z).max() <= kb
    # the transition annulus is thin, so the curvature spikes there
    assert kb == pytest.approx(1556, rel=0.02)


def test_certified_radius_k2():
    m = mt.ConformalMetric.default(fx.standard_genus2_group(-2.0), 2)
    eps = mt.certified_parameter_radius(m.profile, -2.0)
    assert eps == pytest.approx(2.67e-5, rel=0.02)
    assert mt.single_bump_curvature_bound(m.profile, -2.0, 0.99 * eps) <= -1
    assert mt.single_bump_curvature_bound(m.profile, -2.0, 1.2 * eps) > -1


def test_fermi_coordinates():
    rho, phi = 0.7, 0.4
    nu, sc = mt.fermi_coordinates(rho, phi)
    assert np.sinh(nu) == pytest.approx(np.sinh(rho) * np.sin(phi))
    assert np.cosh(rho) == pytest.approx(np.cosh(nu) * np.cosh(sc))


@pytest.mark.parametrize("nu", [0.0, 0.05, 0.1, 0.15])
def test_chord_excess_vs_quad(m1, nu):
    p = m1.unit_profile
    t = 0.1

    def f(s):
        r = np.arccosh(np.cosh(nu) * np.cosh(s))
        return np.expm1(t * p(r))

    brk = [0.0] + [sg * np.arccosh(np.cosh(r) / np.cosh(nu)) for r in (p.r1, p.r2) if r > nu for sg in (-1, 1)]
    want, _ = integrate.quad(f, -0.3, 0.25, points=brk, epsabs=1e-14, limit=200)
    got = mt.chord_excess(np.array([nu]), np.array([0.0]), np.array([-0.3]), np.array([0.25]), t, p)
    assert float(np.ravel(got)[0]) == pytest.approx(want, abs=1e-11)


def test_ray_vs_path(m1):
    m = m1.with_t((0.1, -0.05))
    th = np.array([0.0, 0.3, 1.0])
    L = np.array([1.0, 2.0, 3.0])
    a = mt.ray_lengths(m, th, L)
    b = mt.path_length(m, np.zeros(3, complex), mt.ray_point(th, L))
    assert np.allclose(a, b, atol=1e-12)


def test_flat_distance(m1):
    assert mt.distance(m1, 0, 0.5) == pytest.approx(2 * np.arctanh(0.5), abs=1e-13)


def test_distance_vs_shooting(m1):
    m = m1.with_t((0.1, 0.0))
    a = np.tanh(0.125)
    x, y = -a + 0.01j, a
    d = mt.distance(m, x, y)
    sh = oracles.shooting_distance(m, x, y)
    assert d == pytest.approx(sh, rel=1e-3)
    assert d > float(fx.unit_distance(x, y))


def test_mesh_monotone(m1):
    m = m1.with_t((0.1, 0.0))
    mesh = mt.DistanceMesh(m, -0.2 + 0.01j, 0.2)
    d = [mesh.solve(k) for k in range(3)]
    assert d[0] >= d[1] >= d[2]
    csv = mesh.stats_csv().splitlines()
    assert csv[0] == "level,vertices,max_edge_length,distance" and len(csv) == 4


def test_mesh_exact_when_flat(m1):
    mesh = mt.DistanceMesh(m1, 0.1, 0.3 + 0.2j)
    assert mesh.solve(1) == pytest.approx(float(fx.unit_distance(0.1, 0.3 + 0.2j)), rel=1e-12)


def test_out_of_range(m1):
    far = np.tanh(15.0 / 2)
    with pytest.raises(OutOfRangeError):
        mt.distance(m1.with_t((0.1, 0.0)), 0, far)


def test_distance_to_geodesic_flat(m1):
    R, foot = mt.distance_to_geodesic(m1, 0, 0.0, np.pi / 2)
    assert R == pytest.approx(-np.log(np.tan(np.pi / 8)), abs=1e-12)
    assert R == pytest.approx(np.arcsinh(1.0), abs=1e-12)
    R2, _ = oracles.flat_distance_to_geodesic_by_search(0.0, np.pi / 2)
    assert R == pytest.approx(R2, abs=1e-8)
    with pytest.raises(PreconditionError):
        mt.distance_to_geodesic(m1, 0, 1.0, 1.0)


def test_json_round_trip(m1):
    m = m1.with_t((0.03, -0.02))
    data = json.loads(m.to_json())
    assert set(data) == {"kappa0", "centers", "r1", "r2", "t"}
    back = mt.ConformalMetric.from_dict(data)
    assert back.t == m.t and back.centers == m.centers and back.profile == m.profile
