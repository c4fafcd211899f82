"""Independent numerical routes used to cross-check the main engines.

Slow and simple on purpose; nothing in the production code calls these.
"""
import numpy as np
from scipy.integrate import solve_bvp

from . import fuchsian as fx


def _log_factor_grad(metric, z, h=1e-6):
    """Gradient of phi = u + log(2 / ((1 - |z|^2) c)) in Euclidean coordinates."""
    ux = (metric.conformal_factor(z + h) - metric.conformal_factor(z - h)) / (2 * h)
    uy = (metric.conformal_factor(z + 1j * h) - metric.conformal_factor(z - 1j * h)) / (2 * h)
    s = 2.0 / (1.0 - np.abs(z) ** 2)
    return ux + s * z.real, uy + s * z.imag


def shooting_distance(metric, x, y, n_nodes=400, tol=1e-8):
    """Length of the perturbed geodesic from x to y found by a collocation solve.

    The initial guess is the base geodesic, so this returns the length of
    the perturbed geodesic in that homotopy class and near that path.
    """
    x, y = complex(x), complex(y)
    tau = np.linspace(0.0, 1.0, n_nodes)
    fa, fb = fx.su_frame(x, y)
    ia, ib = fx.su_inv(fa, fb)
    d = float(fx.unit_distance(x, y))
    guess = fx.su_act(ia, ib, np.tanh(tau * d / 2) + 0j)
    vel = np.gradient(guess, tau)
    y0 = np.vstack([guess.real, guess.imag, vel.real, vel.imag])

    def rhs(_, s):
        z = s[0] + 1j * s[1]
        gx, gy = _log_factor_grad(metric, z)
        vx, vy = s[2], s[3]
        dot = gx * vx + gy * vy
        v2 = vx**2 + vy**2
        return np.vstack([vx, vy, -2 * dot * vx + v2 * gx, -2 * dot * vy + v2 * gy])

    def bc(a, b):
        return np.array([a[0] - x.real, a[1] - x.imag, b[0] - y.real, b[1] - y.imag])

    sol = solve_bvp(rhs, bc, tau, y0, tol=tol, max_nodes=200_000)
    if not sol.success:
        raise RuntimeError(f"collocation failed: {sol.message}")
    fine = np.linspace(0.0, 1.0, 40_001)
    s = sol.sol(fine)
    z = s[0] + 1j * s[1]
    speed = np.hypot(s[2], s[3])
    density = np.exp(metric.conformal_factor(z)) * 2.0 / (1.0 - np.abs(z) ** 2) / metric.c
    f = density * speed
    h = fine[1] - fine[0]
    return float(h / 3 * (f[0] + f[-1] + 4 * f[1:-1:2].sum() + 2 * f[2:-1:2].sum()))


def area_grid_sum(metric, n=2000):
    """Base area of the octagon plus a midpoint-rule sum of exp(2u) - 1 near each bump."""
    total = metric.group.domain.area
    r2 = metric.unit_profile.r2
    for p, t in zip(metric.centers, metric.t):
        if t == 0:
            continue
        # Euclidean box around the image of the bump disk
        a, b = fx.su_translate_to_origin(p)
        ia, ib = fx.su_inv(a, b)
        rim = fx.su_act(ia, ib, np.tanh(r2 / 2) * np.exp(1j * np.linspace(0, 2 * np.pi, 721)))
        lo_x, hi_x = rim.real.min() - 1e-3, rim.real.max() + 1e-3
        lo_y, hi_y = rim.imag.min() - 1e-3, rim.imag.max() + 1e-3
        hx, hy = (hi_x - lo_x) / n, (hi_y - lo_y) / n
        xs = lo_x + hx * (np.arange(n) + 0.5)
        ys = lo_y + hy * (np.arange(n) + 0.5)
        acc = 0.0
        for row in np.array_split(np.arange(n), 20):
            Z = xs[None, :] + 1j * ys[row, None]
            u = metric.conformal_factor(Z)
            dens = (2.0 / (1.0 - np.abs(Z) ** 2)) ** 2 / metric.c**2
            acc += float((np.expm1(2 * u) * dens).sum())
        total += acc * hx * hy
    return total


def flat_distance_to_geodesic_by_search(theta1, theta2, n=400_001):
    """Minimum over sampled points of the geodesic of the unit distance to 0.

    The geodesic is drawn as the circle orthogonal to the unit circle
    through both endpoints, not through the distance formula under test.
    """
    gap = abs(np.angle(np.exp(1j * (theta2 - theta1))))
    mid = theta1 + np.angle(np.exp(1j * (theta2 - theta1))) / 2
    if abs(gap - np.pi) < 1e-12:
        z = np.linspace(-1, 1, n)[1:-1] + 0j
    else:
        centre = 1.0 / np.cos(gap / 2)
        radius = np.tan(gap / 2)
        psi = np.linspace(0, 2 * np.pi, n)
        z = centre + radius * np.exp(1j * psi)
        z = z[np.abs(z) < 1]
    z = z * np.exp(1j * mid)
    d = fx.unit_distance(z, 0)
    k = int(np.argmin(d))
    return float(d[k]), complex(z[k])
