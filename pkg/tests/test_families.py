import json

import numpy as np
import pytest

from quasicircle import families as fa
from quasicircle import fuchsian as fx
from quasicircle import metric as mt
from quasicircle.errors import (
    BoxExceededError,
    DomainError,
    NotApplicableError,
    PreconditionError,
)


@pytest.fixture(scope="module")
def m2():
    return mt.ConformalMetric.default(fx.standard_genus2_group(-2.0), 2)


@pytest.fixture(scope="module")
def box(m2):
    return fa.certified_box(m2)


def test_certificate_examples():
    assert fa.nonisometry_certificate((0.1, 0.2), (0.2, 0.1), 1.0) == fa.INCONCLUSIVE
    assert fa.nonisometry_certificate((0.1, 0.2), (0.1, 0.3), 1.0) == fa.CERTIFIED
    assert fa.nonisometry_certificate((0.1, 0.2, 0.3), (0.3, 0.1, 0.2), 1.0) == fa.INCONCLUSIVE


def test_certificate_guards():
    with pytest.raises(BoxExceededError):
        fa.nonisometry_certificate((0.1, 0.2), (0.1, 1.5), 1.0)
    with pytest.raises(PreconditionError):
        fa.nonisometry_certificate((0.0, 0.2), (0.1, 0.3), 1.0)


def test_curvature_multiset():
    assert fa.curvature_multiset(-2.0, (0.1, -0.1)) == tuple(sorted((-2 * np.exp(-0.2), -2 * np.exp(0.2))))


def test_certified_box(m2, box):
    assert box == pytest.approx(2.67e-5, rel=0.02)
    assert mt.curvature_bound(m2.with_t((0.999 * box, -0.999 * box))) <= -1.0
    p = m2.profile
    assert mt.bump_area(p, -2.0, -box, p.r1) >= 0.75 * mt.bump_area(p, -2.0, box, p.r2)


def test_track_preconditions(m2, box):
    with pytest.raises(PreconditionError):
        fa.track_level_set(m2, [1.0, 1.0], 2, box=box)
    with pytest.raises(PreconditionError):
        fa.track_level_set(m2, [1.0], 2, box=box)
    m3 = mt.ConformalMetric.default(fx.standard_genus2_group(-2.0), 3)
    with pytest.raises(PreconditionError):
        fa.track_level_set(m3, [1.0, 1.0, -2.0], 2, box=box)
    with pytest.raises(BoxExceededError):
        fa.track_level_set(m2, [1.0, -1.0], 3, step=box, box=box)


def test_track_k0(m2, box):
    F = fa.EntropyFunctional(m2)
    v = np.array([1.0, -1.0]) / np.sqrt(2)
    pts = fa.track_level_set(m2, v, 2, F=F, box=box)
    assert len(pts) == 3 and pts[0].t == (0.0, 0.0)
    tol = 2 * F((0.0, 0.0)).stderr
    for p in pts:
        assert abs(p.entropy.s - pts[0].entropy.s) < tol
        assert p.curvature_bound <= -1.0
        assert np.max(np.abs(p.t)) < box
        assert abs(sum(p.t)) < 1e-12
    d = json.loads(fa.family_json(pts[1:], box, -2.0))
    assert d[0]["certified_pairs"] == [[0, 1]]
    assert set(d[0]) == {"t", "entropy", "area", "curvature_multiset", "curvature_bound", "certified_pairs"}


def test_slice_equalizes_area(m2, box):
    F = fa.EntropyFunctional(m2)
    pts = [fa.make_point(m2, (s * box / 3, -s * box / 3), F) for s in (1.0, 2.0)]
    pts.append(fa.make_point(m2, (0.5 * box, -0.4 * box), F))
    res = fa.equal_area_slice(m2, pts, F=F, box=box)
    assert len(res.points) + len(res.rejected) == 3
    for p in res.points:
        assert abs(p.area - res.target) < 2e-4 * res.target


def test_rescale():
    assert fa.rescale_to_common_dimension(1.0, 2.0) == (0.5, 1.0)
    assert fa.rescale_to_common_dimension(2.0, 1.0) == (1.0, 0.5)
    with pytest.raises(DomainError):
        fa.rescale_to_common_dimension(0.0, 1.0)


def test_gap_exact():
    g = fa.gap_bound(1.0, np.sqrt(2))
    assert g.epsilon == pytest.approx(np.sqrt(2) - 1, abs=1e-15)
    assert set(json.loads(g.to_json())) == {"s1", "s2", "epsilon", "lambdas", "note"}
    assert fa.gap_bound(np.sqrt(2), 1.0) == g


def test_gap_errors():
    with pytest.raises(NotApplicableError):
        fa.gap_bound(1.3, 1.3)
    with pytest.raises(DomainError):
        fa.gap_bound(-1.0, 1.0)
