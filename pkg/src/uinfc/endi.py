"""Nonsmooth backstepping CLF for the extended nonholonomic integrator.

State layout is ``x = (phi1, phi2, phi3, eta1, eta2)``. The CLF is the
marginal function

    V(x) = min_theta  F(phi; theta) + 0.5 * ||eta - kappa(phi; theta)||^2

with the nonholonomic-integrator CLF ``F`` and its gradient feedback
``kappa``. The minimum over ``theta`` is taken on a periodic grid followed by
golden-section refinement of the best cell.
"""

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .clf import DEFAULT_MU_SCHEDULE, BoxSet, ClfSpec
from .sampling import annulus_points, ball_points
from .systems import endi_rhs

TWO_PI = 2.0 * math.pi
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class ThetaGrid:
    """Sorted grid on ``[0, 2*pi)`` plus the number of golden-section steps."""

    points: np.ndarray = field(default_factory=lambda: np.arange(64) * (TWO_PI / 64))
    refinement_iters: int = 40

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.size < 8:
            raise ValueError("theta grid needs at least 8 points")
        if np.any(np.diff(pts) <= 0) or pts[0] < 0 or pts[-1] >= TWO_PI:
            raise ValueError("theta grid must be sorted within [0, 2*pi)")
        if self.refinement_iters < 0:
            raise ValueError("refinement_iters must be >= 0")
        object.__setattr__(self, "points", pts)

    @classmethod
    def uniform(cls, count=64, refinement_iters=40):
        return cls(np.arange(count) * (TWO_PI / count), refinement_iters)


DEFAULT_GRID = ThetaGrid()


# ---------------------------------------------------------------- kernels


@numba.njit(cache=True)
def _bracket(p1, p2, p3, e1, e2, c, s):
    f = p1 * p1 + p2 * p2 + 2.0 * p3 * p3 - 2.0 * p3 * (p1 * c + p2 * s)
    z1 = 2.0 * p1 - 2.0 * p3 * c
    z2 = 2.0 * p2 - 2.0 * p3 * s
    z3 = 4.0 * p3 - 2.0 * (p1 * c + p2 * s)
    k1 = z1 - p2 * z3
    k2 = z2 + p1 * z3
    d1 = e1 + k1
    d2 = e2 + k2
    return f + 0.5 * (d1 * d1 + d2 * d2)


@numba.njit(cache=True)
def _theta_star(x, grid, iters):
    p1, p2, p3, e1, e2 = x[0], x[1], x[2], x[3], x[4]
    m = grid.size
    best = _bracket(p1, p2, p3, e1, e2, math.cos(grid[0]), math.sin(grid[0]))
    jbest = 0
    for j in range(1, m):
        v = _bracket(p1, p2, p3, e1, e2, math.cos(grid[j]), math.sin(grid[j]))
        if v < best - 1e-15 * (1.0 + abs(best)):
            best = v
            jbest = j
    th = grid[jbest]
    if iters == 0:
        return th, best
    lo = grid[jbest - 1] if jbest > 0 else grid[m - 1] - 2.0 * math.pi
    hi = grid[jbest + 1] if jbest < m - 1 else grid[0] + 2.0 * math.pi
    a, b = lo, hi
    c1 = b - _INVPHI * (b - a)
    c2 = a + _INVPHI * (b - a)
    f1 = _bracket(p1, p2, p3, e1, e2, math.cos(c1), math.sin(c1))
    f2 = _bracket(p1, p2, p3, e1, e2, math.cos(c2), math.sin(c2))
    for _ in range(iters):
        if f1 <= f2:
            b = c2
            c2 = c1
            f2 = f1
            c1 = b - _INVPHI * (b - a)
            f1 = _bracket(p1, p2, p3, e1, e2, math.cos(c1), math.sin(c1))
        else:
            a = c1
            c1 = c2
            f1 = f2
            c2 = a + _INVPHI * (b - a)
            f2 = _bracket(p1, p2, p3, e1, e2, math.cos(c2), math.sin(c2))
    if f1 <= f2:
        tc, fc = c1, f1
    else:
        tc, fc = c2, f2
    # Rounding noise on a flat bracket must not displace the smallest angle.
    if fc < best - 1e-15 * (1.0 + abs(best)):
        th, best = tc, fc
    th = th % (2.0 * math.pi)
    return th, best


@numba.njit(cache=True)
def _values(points, grid, iters):
    n = points.shape[0]
    out = np.empty(n)
    for i in range(n):
        out[i] = _theta_star(points[i], grid, iters)[1]
    return out


@numba.njit(cache=True)
def _gradient(x, grid, iters):
    th, _ = _theta_star(x, grid, iters)
    p1, p2, p3, e1, e2 = x[0], x[1], x[2], x[3], x[4]
    c = math.cos(th)
    s = math.sin(th)
    z1 = 2.0 * p1 - 2.0 * p3 * c
    z2 = 2.0 * p2 - 2.0 * p3 * s
    z3 = 4.0 * p3 - 2.0 * (p1 * c + p2 * s)
    k1 = z1 - p2 * z3
    k2 = z2 + p1 * z3
    d1 = e1 + k1
    d2 = e2 + k2
    # Jacobian of (k1, k2) with respect to phi.
    a11 = 2.0 + 2.0 * p2 * c
    a12 = -z3 + 2.0 * p2 * s
    a13 = -2.0 * c - 4.0 * p2
    a21 = z3 - 2.0 * p1 * c
    a22 = 2.0 - 2.0 * p1 * s
    a23 = -2.0 * s + 4.0 * p1
    g = np.empty(5)
    g[0] = z1 + a11 * d1 + a21 * d2
    g[1] = z2 + a12 * d1 + a22 * d2
    g[2] = z3 + a13 * d1 + a23 * d2
    g[3] = d1
    g[4] = d2
    return g


@numba.njit(cache=True)
def _psi(x, y, inv2, grid, iters):
    d = 0.0
    for i in range(5):
        d += (y[i] - x[i]) ** 2
    return _theta_star(y, grid, iters)[1] + 0.5 * inv2 * d


@numba.njit(cache=True)
def _project(x, y, radius):
    d = 0.0
    for i in range(5):
        d += (y[i] - x[i]) ** 2
    d = math.sqrt(d)
    if d <= radius:
        return y
    return x + (y - x) * (radius / d)


@numba.njit(cache=True)
def _prox_descent(x, y, alpha, radius, grid, iters, max_iter):
    # Projected gradient descent with Armijo backtracking on
    # V(y) + |y - x|^2 / (2 alpha^2) inside the localization ball.
    a2 = alpha * alpha
    inv2 = 1.0 / a2
    fy = _psi(x, y, inv2, grid, iters)
    step = a2
    for _ in range(max_iter):
        g = _gradient(y, grid, iters) + inv2 * (y - x)
        if np.dot(g, g) == 0.0:
            break
        t = step
        while True:
            cand = _project(x, y - t * g, radius)
            fc = _psi(x, cand, inv2, grid, iters)
            if fc <= fy - 1e-4 * np.dot(g, y - cand) or t < 1e-16:
                break
            t *= 0.5
        if fc > fy:
            break
        moved = math.sqrt(np.dot(cand - y, cand - y))
        y = cand
        fy = fc
        step = min(a2, 2.0 * t)
        if moved <= 1e-13 * (1.0 + math.sqrt(np.dot(y, y))):
            break
    return y, fy


# ---------------------------------------------------------------- public maps


def f_tilde(phi, theta):
    """Nonholonomic-integrator CLF ``F(phi; theta)`` for a fixed angle."""
    p1, p2, p3 = np.asarray(phi, dtype=float)
    return float(p1**2 + p2**2 + 2 * p3**2 - 2 * p3 * (p1 * np.cos(theta) + p2 * np.sin(theta)))


def grad_f_tilde(phi, theta):
    """Gradient of :func:`f_tilde` in ``phi``."""
    p1, p2, p3 = np.asarray(phi, dtype=float)
    c, s = np.cos(theta), np.sin(theta)
    return np.array([2 * p1 - 2 * p3 * c, 2 * p2 - 2 * p3 * s, 4 * p3 - 2 * (p1 * c + p2 * s)])


def kappa_ni(phi, theta):
    """Gradient feedback ``-(<zeta, g1>, <zeta, g2>)`` for the nonholonomic integrator."""
    p1, p2, _ = np.asarray(phi, dtype=float)
    zeta = grad_f_tilde(phi, theta)
    g1 = np.array([1.0, 0.0, -p2])
    g2 = np.array([0.0, 1.0, p1])
    return -np.array([zeta @ g1, zeta @ g2])


def v_tilde(phi):
    """Closed form of ``min_theta f_tilde(phi, theta)``."""
    p1, p2, p3 = np.asarray(phi, dtype=float)
    return float(p1**2 + p2**2 + 2 * p3**2 - 2 * abs(p3) * math.hypot(p1, p2))


def endi_bracket(x, theta):
    """Objective inside the minimum defining the ENDI CLF."""
    x = np.asarray(x, dtype=float)
    return float(_bracket(x[0], x[1], x[2], x[3], x[4], math.cos(theta), math.sin(theta)))


def endi_theta_star(x, grid=DEFAULT_GRID):
    """Minimizing angle (smallest on the grid when ties occur) and the minimum."""
    th, val = _theta_star(np.asarray(x, dtype=float), grid.points, grid.refinement_iters)
    return float(th), float(val)


def endi_clf_value(x, grid=DEFAULT_GRID):
    """ENDI CLF value via grid search plus golden-section refinement."""
    return endi_theta_star(x, grid)[1]


def endi_clf_values(points, grid=DEFAULT_GRID):
    pts = np.ascontiguousarray(np.atleast_2d(points), dtype=float)
    return _values(pts, grid.points, grid.refinement_iters)


def endi_clf_gradient(x, grid=DEFAULT_GRID):
    """Gradient of the bracket at the minimizing angle (Danskin selection)."""
    return _gradient(np.asarray(x, dtype=float), grid.points, grid.refinement_iters)


def endi_nonsmooth_distance(x):
    """Distance to ``{phi1 = phi2 = 0} U {phi3 = 0}``."""
    x = np.asarray(x, dtype=float)
    return float(min(math.hypot(x[0], x[1]), abs(x[2])))


# ---------------------------------------------------------------- calibration


def calibrate_envelopes(values, working_radius, samples=4000, seed=11, margin=0.1):
    """Fit ``c1 |x|^2 <= V(x) <= c2 |x|^2`` by sampled ratio extremes.

    The sampled minimum is deflated and the maximum inflated by ``margin``.
    """
    pts, _ = annulus_points(np.zeros(5), 1e-3 * working_radius, working_radius, samples, seed)
    shell = ball_points(np.zeros(5), working_radius, samples, seed + 1)
    pts = np.concatenate([pts, shell[np.linalg.norm(shell, axis=1) > 0]])
    ratio = values(pts) / np.sum(pts**2, axis=1)
    return (1.0 - margin) * float(ratio.min()), (1.0 + margin) * float(ratio.max())


def vertex_decay(value, x, rhs, vertices, mu_schedule=DEFAULT_MU_SCHEDULE):
    """Minimum finite-difference Dini derivative over ``f(x, vertex)`` directions."""
    return min(_dini(value, x, rhs(x, u), mu_schedule) for u in vertices)


def _dini(value, x, theta, mus):
    base = value(x)
    return min((value(x + mu * theta) - base) / mu for mu in mus)


def calibrate_decay_gain(value, rhs, vertices, inner, outer, samples=1000, seed=13):
    """Largest power-of-two-halved ``c_w`` with ``min_u D V <= -c_w |x|^2`` on samples.

    Starts from the smallest power of two above the sampled ratio minimum and
    halves until every sample passes.
    """
    pts, _ = annulus_points(np.zeros(5), inner, outer, samples, seed)
    decays = np.array([-vertex_decay(value, p, rhs, vertices) for p in pts])
    sq = np.sum(pts**2, axis=1)
    ratio = decays / sq
    if ratio.min() <= 0:
        raise ValueError("sampled decay condition fails: some sample has no descent direction")
    cw = 2.0 ** math.ceil(math.log2(ratio.min()))
    while np.any(decays < cw * sq):
        cw *= 0.5
    return cw


def make_endi_clf(working_radius=1.15, grid=DEFAULT_GRID, box=None, decay_gain=None,
                  envelope_gains=None, decay_samples=1000):
    """Package the ENDI CLF as a :class:`ClfSpec`.

    ``alpha1, alpha2`` are quadratic with gains fitted on the working ball and
    ``w(x) = c_w |x|^2`` with ``c_w`` calibrated against vertex Dini
    derivatives for the box ``[-3, 3]^2`` unless given.
    """
    box = box if box is not None else BoxSet([-3.0, -3.0], [3.0, 3.0])

    def value(x):
        return endi_clf_value(x, grid)

    def values(pts):
        return endi_clf_values(pts, grid)

    def gradient(x):
        return endi_clf_gradient(x, grid)

    def local_descent(x, y0, alpha, radius):
        y, fy = _prox_descent(np.asarray(x, dtype=float), np.asarray(y0, dtype=float), alpha,
                              radius, grid.points, grid.refinement_iters, 500)
        return y, float(fy)

    if envelope_gains is None:
        envelope_gains = calibrate_envelopes(values, working_radius)
    c1, c2 = envelope_gains
    if decay_gain is None:
        decay_gain = calibrate_decay_gain(
            value, endi_rhs, box.vertices(), 0.02 * working_radius, working_radius,
            samples=decay_samples,
        )
    cw = decay_gain

    return ClfSpec(
        value=value,
        values=values,
        gradient=gradient,
        local_descent=local_descent,
        decay=lambda x: cw * float(np.dot(x, x)),
        alpha1=lambda s: c1 * s * s,
        alpha2=lambda s: c2 * s * s,
        alpha1_inv=lambda v: math.sqrt(v / c1),
        alpha2_inv=lambda v: math.sqrt(v / c2),
        nonsmooth_distance=endi_nonsmooth_distance,
        dim=5,
        working_radius=working_radius,
        name="endi",
        meta={"c1": c1, "c2": c2, "c_w": cw, "grid": grid, "box": box},
    )
