"""Volume entropy from orbit growth, and its first variation at t = 0."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import fuchsian as fx
from . import metric as mt
from .errors import FitFailureError, PreconditionError, ShapeError


@dataclass(frozen=True)
class OrbitCensus:
    radii: np.ndarray
    counts: np.ndarray
    metric: dict = field(default_factory=dict)
    basepoint: complex = 0j

    def __post_init__(self):
        r = np.asarray(self.radii, float)
        n = np.asarray(self.counts, np.int64)
        if r.shape != n.shape or r.ndim != 1:
            raise ShapeError("radii and counts must be matching 1-d arrays")
        if np.any(np.diff(r) <= 0):
            raise ValueError("radii must be increasing")
        if np.any(np.diff(n) < 0):
            raise ValueError("counts must be nondecreasing")
        object.__setattr__(self, "radii", r)
        object.__setattr__(self, "counts", n)

    def scaled(self, lam):
        """Same counts at radii multiplied by lam."""
        return OrbitCensus(self.radii * lam, self.counts, self.metric, self.basepoint)

    def to_csv(self):
        rows = ["R,N"] + [f"{r:.17g},{n}" for r, n in zip(self.radii, self.counts)]
        return "\n".join(rows) + "\n"

    @classmethod
    def from_csv(cls, text):
        lines = [ln for ln in text.strip().splitlines() if ln.strip()]
        if lines[0].replace(" ", "") != "R,N":
            raise ValueError("expected header R,N")
        data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
        return cls(data[:, 0], data[:, 1].astype(np.int64))


def census_from_distances(distances, radii, metric=None):
    d = np.sort(np.asarray(distances))
    counts = np.searchsorted(d, np.asarray(radii, float), side="right")
    return OrbitCensus(radii, counts, metric or {})


def orbit_distances(metric, R_max, budget=5_000_000):
    """Perturbed distances d_t(0, gamma 0) of all orbit points that can lie within R_max."""
    if R_max > mt.MESH_RADIUS + 1e-9:
        raise PreconditionError(f"R_max exceeds the meshed radius {mt.MESH_RADIUS}")
    group = metric.group
    umin, _ = metric.t_range
    # d_t >= exp(min u) d_0, so orbit points with d_0 beyond this cannot count
    base_radius = min(R_max * np.exp(-umin), mt.MESH_RADIUS)
    if metric.is_flat:
        return fx.enumerate_orbit(group, base_radius, budget=budget).distances
    # one enumeration serves both the orbit points and the lifted bump centers
    reach = metric.profile.r2 + max(abs(fx.unit_distance(p, 0)) for p in metric.centers) * metric.scale
    orb = fx.enumerate_orbit(group, base_radius + reach + 1e-6, budget=budget)
    inside = orb.distances <= base_radius
    pts = orb.points[inside]
    return mt.ray_lengths(metric, np.angle(pts), orb.distances[inside], orbit=orb)


def orbit_census(metric, R_max, step=0.25, R_min=None, budget=5_000_000):
    """N(R) on the grid R_min, R_min + step, ..., R_max."""
    if step <= 0:
        raise ValueError("step must be positive")
    R_min = step if R_min is None else R_min
    radii = np.arange(R_min, R_max + 0.5 * step, step)
    d = orbit_distances(metric, R_max, budget)
    return census_from_distances(d, radii, metric.to_dict())


@dataclass(frozen=True)
class EntropyEstimate:
    s: float
    stderr: float
    window: tuple
    residuals: np.ndarray
    n_points: int
    # for cocompact actions the limsup is a limit, so a slope is used
    assumption: str = "limit exists; slope of log N(R)"

    def to_json(self):
        return json.dumps({"s": self.s, "stderr": self.stderr, "window": list(self.window)})


def _fit(R, y):
    A = np.column_stack([R, np.ones_like(R)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    res = y - A @ coef
    n = len(R)
    sxx = ((R - R.mean()) ** 2).sum()
    stderr = np.sqrt((res**2).sum() / max(n - 2, 1) / sxx) if sxx > 0 else np.inf
    return coef[0], stderr, res


def entropy_estimate(census, min_span=3.0, max_residual=0.1, window=None):
    """Least-squares slope of log N(R) over the largest admissible suffix window.

    A window is admissible when it spans at least ``min_span``, holds at
    least 4 radii and all absolute residuals are below ``max_residual``.
    A fixed ``window=(lo, hi)`` skips the search.
    """
    R, N = census.radii, census.counts
    if len(R) < 6 or N[-1] < 10:
        raise PreconditionError("need at least 6 radii and N >= 10 at the top")
    ok = N > 0
    R, y = R[ok], np.log(N[ok].astype(float))
    if window is not None:
        sel = (R >= window[0] - 1e-12) & (R <= window[1] + 1e-12)
        if sel.sum() < 4:
            raise FitFailureError("fixed window holds fewer than 4 radii")
        s, se, res = _fit(R[sel], y[sel])
        return EntropyEstimate(float(s), float(se), (float(R[sel][0]), float(R[sel][-1])), res, int(sel.sum()))
    best = None
    tried = []
    for lo in range(len(R) - 4 + 1):
        span = R[-1] - R[lo]
        if span < min_span - 1e-12:
            break
        s, se, res = _fit(R[lo:], y[lo:])
        worst = float(np.abs(res).max())
        tried.append((float(R[lo]), worst))
        if worst < max_residual:
            best = (s, se, res, lo)
            break  # first hit from the bottom is the largest window
    if best is None:
        raise FitFailureError("no admissible fit window", windows=tried)
    s, se, res, lo = best
    if s <= 0:
        raise FitFailureError("nonpositive slope", slope=float(s))
    return EntropyEstimate(float(s), float(se), (float(R[lo]), float(R[-1])), res, len(R) - lo)


def base_entropy(kappa0):
    """Volume entropy of the constant curvature kappa0 plane."""
    return float(np.sqrt(-kappa0))


def bump_mass(metric):
    """Integrals of each u_i over the surface in the base metric."""
    return np.array([mt.bump_integral(metric.profile, metric.kappa0, 1)] * metric.n_bumps)


def entropy_derivative(metric, direction, h0=None):
    """Directional derivative of the entropy at t = 0.

    At constant curvature the measure of maximal entropy projects to
    normalized area, so the first variation is -h0 * sum e_i int u_i / Area.
    """
    if not metric.is_flat:
        raise PreconditionError("the derivative formula is only valid at t = 0")
    e = np.asarray(direction, float)
    if e.shape != (metric.n_bumps,):
        raise ShapeError(f"direction must have length {metric.n_bumps}")
    if not np.any(e):
        return 0.0
    h0 = base_entropy(metric.kappa0) if h0 is None else h0
    area = metric.group.domain.area
    return float(-h0 * (e @ bump_mass(metric)) / area)


def entropy_gradient(metric, h0=None):
    n = metric.n_bumps
    return np.array([entropy_derivative(metric, np.eye(n)[i], h0) for i in range(n)])


class EntropyEstimator(BaseEstimator):
    """Estimator front end for the windowed slope fit.

    ``fit(R, N)`` takes census radii and counts; ``s_``, ``stderr_`` and
    ``window_`` hold the result. ``predict(R)`` returns the fitted log N.
    """

    def __init__(self, min_span=3.0, max_residual=0.1, window=None):
        self.min_span = min_span
        self.max_residual = max_residual
        self.window = window

    def fit(self, R, N):
        census = OrbitCensus(np.ravel(R), np.ravel(N))
        est = entropy_estimate(census, self.min_span, self.max_residual, self.window)
        lo, hi = est.window
        sel = (census.radii >= lo) & (census.radii <= hi)
        y = np.log(census.counts[sel].astype(float))
        self.s_ = est.s
        self.stderr_ = est.stderr
        self.window_ = est.window
        self.intercept_ = float(np.mean(y - est.s * census.radii[sel]))
        return self

    def predict(self, R):
        check_is_fitted(self, "s_")
        return self.intercept_ + self.s_ * np.asarray(R, float)
