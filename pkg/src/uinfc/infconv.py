"""Inf-convolution (Moreau envelope) with controlled inexactness.

``V_alpha(x) = inf_y V(y) + ||y - x||^2 / (2 alpha^2)``.

:func:`moreau_envelope` returns an approximate minimizer together with
``zeta = (x - y) / alpha^2`` and a certificate bounding the gap to the true
envelope. When asked for a nonzero accuracy it deliberately degrades its best
minimizer so the gap lands in ``[0.5, 1] * eps_target``; this makes the
optimization error a reproducible experimental input.
"""

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import product

import numpy as np

from .errors import ParameterError, ResourceError, SolverError

SOLVER_FLOOR = 1e-9
_GOLD = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class InfConvResult:
    """Approximate inf-convolution minimizer and its certificate.

    ``y_best``/``envelope_best`` hold the solver's best point before any
    injected inexactness.
    """

    y_eps: np.ndarray
    zeta: np.ndarray
    envelope_value: float
    eps_achieved: float
    alpha: float
    y_best: np.ndarray = None
    envelope_best: float = float("nan")


def _check_alpha(alpha):
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha!r}")


def lemma1_radius(clf, x, alpha):
    """Radius ``sqrt(2 V_bar) alpha`` of the ball that holds every minimizer.

    ``V_bar`` is the CLF's sampled supremum over its working ball; for points
    outside that ball ``V(x)`` itself takes over, which keeps the ball valid.
    """
    vx = float(clf.value(x))
    return math.sqrt(2.0 * max(clf.v_bar, vx)) * alpha


def _objective(clf, x, alpha):
    scale = 0.5 / (alpha * alpha)

    def psi(y):
        return float(clf.value(y)) + scale * float(np.dot(y - x, y - x))

    def psi_batch(ys):
        d = ys - x
        return clf.batch(ys) + scale * np.einsum("ij,ij->i", d, d)

    return psi, psi_batch


def _project(y, x, radius):
    d = y - x
    nd = math.sqrt(float(np.dot(d, d)))
    return y if nd <= radius else x + d * (radius / nd)


@lru_cache(maxsize=32)
def _unit_lattice(n, per_axis):
    ticks = np.linspace(-1.0, 1.0, per_axis)
    pts = np.array(list(product(ticks, repeat=n)))
    return pts[np.linalg.norm(pts, axis=1) <= 1.0 + 1e-12]


def _lattice(x, radius, per_axis):
    if per_axis <= 1:
        return x[None, :]
    return x + radius * _unit_lattice(x.size, per_axis)


def _descend_gradient(clf, x, alpha, psi, y, radius, max_iter=500):
    inv = 1.0 / (alpha * alpha)
    fy = psi(y)
    step = alpha * alpha
    for _ in range(max_iter):
        g = np.asarray(clf.gradient(y), dtype=float) + inv * (y - x)
        gn = float(np.dot(g, g))
        if gn == 0.0:
            break
        t = step
        while True:
            cand = _project(y - t * g, x, radius)
            fc = psi(cand)
            if fc <= fy - 1e-4 * float(np.dot(g, y - cand)) or t < 1e-16:
                break
            t *= 0.5
        if fc > fy:
            break
        moved = float(np.linalg.norm(cand - y))
        y, fy = cand, fc
        step = min(alpha * alpha, 2.0 * t)
        if moved <= 1e-13 * (1.0 + float(np.linalg.norm(y))):
            break
    return y, fy


def _golden_line(f, a, b, fa_hint=None, iters=60):
    c = b - _GOLD * (b - a)
    d = a + _GOLD * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLD * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLD * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def _descend_coordinates(x, psi, y, radius, width, cycles=60):
    """Coordinate-wise golden-section descent inside the Lemma-1 ball."""
    fy = psi(y)
    n = y.size
    for _ in range(cycles):
        before = fy
        for i in range(n):
            e = np.zeros(n)
            e[i] = 1.0

            def line(t, y=y, e=e):
                return psi(_project(y + t * e, x, radius))

            t, ft = _golden_line(line, -width, width)
            if ft < fy:
                y, fy = _project(y + t * e, x, radius), ft
        if before - fy <= 1e-15 * (1.0 + abs(fy)):
            width *= 0.25
            if width < 1e-12:
                break
    return y, fy


def minimize_envelope(clf, x, alpha, lattice=5, warm_start=None, starts=None):
    """Best minimizer found by multistart local descent; returns ``(y, psi(y))``.

    Descent starts from the ``starts`` best lattice points (default 3, or 1
    when a warm start is supplied) plus the warm start.
    """
    if starts is None:
        starts = 3 if warm_start is None else 1
    _check_alpha(alpha)
    x = np.asarray(x, dtype=float)
    radius = lemma1_radius(clf, x, alpha)
    psi, psi_batch = _objective(clf, x, alpha)
    seeds = _lattice(x, radius, lattice)
    seeds = np.vstack([x[None, :], seeds])
    vals = psi_batch(seeds)
    if not np.any(np.isfinite(vals)):
        raise SolverError("objective non-finite on every seed")
    order = np.argsort(np.where(np.isfinite(vals), vals, np.inf), kind="stable")[:starts]
    cands = [seeds[k] for k in order]
    if warm_start is not None:
        cands.insert(0, _project(np.asarray(warm_start, dtype=float), x, radius))
    best_y, best_f = None, np.inf
    for y0 in cands:
        if clf.local_descent is not None:
            y, fy = clf.local_descent(x, y0.copy(), alpha, radius)
        elif clf.gradient is not None:
            y, fy = _descend_gradient(clf, x, alpha, psi, y0.copy(), radius)
        else:
            y, fy = _descend_coordinates(x, psi, y0.copy(), radius, width=radius / max(lattice - 1, 1))
        if fy < best_f:
            best_y, best_f = y, fy
    if best_y is None or not np.isfinite(best_f):
        raise SolverError("local descent diverged")
    return best_y, best_f


def _edge(y, d, x, radius):
    # Largest t >= 0 with ||y + t d - x|| <= radius (d is a unit vector).
    c = y - x
    b = float(np.dot(c, d))
    disc = b * b - float(np.dot(c, c)) + radius * radius
    return max(0.0, -b + math.sqrt(max(disc, 0.0)))


def _inject(psi, x, y, fy, radius, amount, lo, hi, rng, guess, tries=32):
    """Walk from ``y`` along seeded random rays until the objective rises by ``[lo, hi]``.

    When no ray reaches ``lo`` inside the ball, the ball-edge point with the
    largest rise is returned instead.
    """
    n = y.size
    fallback, f_fallback = y, fy
    for _ in range(tries):
        d = rng.standard_normal(n)
        d /= np.linalg.norm(d)
        t_max = _edge(y, d, x, radius)
        t_lo, t_hi, f_hi = 0.0, None, None
        t = min(0.25 * guess, t_max)
        while t > 0.0:
            fc = psi(y + t * d)
            if fc - fy >= amount:
                t_hi, f_hi = t, fc
                break
            t_lo = t
            if t >= t_max:
                if fc > f_fallback:
                    fallback, f_fallback = y + t * d, fc
                break
            t = min(2.0 * t, t_max)
        if t_hi is None:
            continue
        if lo <= f_hi - fy <= hi:
            return y + t_hi * d, f_hi
        for _ in range(200):
            mid = 0.5 * (t_lo + t_hi)
            fm = psi(y + mid * d)
            rise = fm - fy
            if lo <= rise <= hi:
                return y + mid * d, fm
            if rise < amount:
                t_lo = mid
            else:
                t_hi = mid
    return fallback, f_fallback


def moreau_envelope(clf, x, alpha, eps_target=0.0, seed=0, lattice=5, warm_start=None):
    """Approximate inf-convolution at ``x`` with accuracy ``eps_target``.

    Parameters
    ----------
    clf : ClfSpec
    x : array_like
    alpha : float
        Regularization parameter in ``(0, 1)``.
    eps_target : float
        Requested envelope accuracy. Values above the solver floor are
        realized exactly: the returned point is degraded until its gap is in
        ``[0.5, 1] * eps_target``.
    seed : int
        Seed of the degradation direction.
    lattice : int
        Seed lattice resolution per axis over the Lemma-1 ball.
    warm_start : array_like, optional
        Extra starting point for local descent.

    Returns
    -------
    InfConvResult
    """
    _check_alpha(alpha)
    if not eps_target >= 0:
        raise ParameterError("eps_target must be >= 0")
    x = np.asarray(x, dtype=float)
    y_best, f_best = minimize_envelope(clf, x, alpha, lattice=lattice, warm_start=warm_start)
    y, fy = y_best, f_best
    if eps_target > SOLVER_FLOOR:
        psi, _ = _objective(clf, x, alpha)
        radius = lemma1_radius(clf, x, alpha)
        rng = np.random.default_rng(seed)
        lo = max(0.0, 0.5 * eps_target - SOLVER_FLOOR)
        hi = eps_target - SOLVER_FLOOR
        amount = 0.75 * eps_target - SOLVER_FLOOR
        guess = alpha * math.sqrt(2.0 * amount)
        y, fy = _inject(psi, x, y_best, f_best, radius, amount, lo, hi, rng, guess)
    eps_achieved = (fy - f_best) + SOLVER_FLOOR
    zeta = (x - y) / (alpha * alpha)
    return InfConvResult(
        y_eps=y, zeta=zeta, envelope_value=fy, eps_achieved=eps_achieved, alpha=alpha,
        y_best=y_best, envelope_best=f_best,
    )


# ---------------------------------------------------------------- oracles

_GRID_CAP = 2_000_000


def _levels(radius, grid_step):
    top = 10.0 ** math.ceil(math.log10(radius))
    steps = []
    s = top
    while s > grid_step * (1 + 1e-9):
        steps.append(s)
        s /= 10.0
    steps.append(grid_step)
    return steps


def reference_envelope(clf, x, alpha, grid_step=1e-3, max_points=_GRID_CAP):
    """Brute-force upper bound on ``V_alpha(x)``.

    One-dimensional problems use a full grid of spacing ``grid_step`` over the
    Lemma-1 ball, anchored at ``x``, and polish its best point. Higher dimensions start from a coarse
    lattice and run a coordinate grid search whose spacing descends by decades
    down to ``grid_step``, each level followed by a coordinate golden-section
    polish. The result is the minimum over all levels, so it can only
    decrease as ``grid_step`` shrinks.
    """
    _check_alpha(alpha)
    if not grid_step > 0:
        raise ParameterError("grid_step must be positive")
    x = np.asarray(x, dtype=float)
    n = x.size
    radius = lemma1_radius(clf, x, alpha)
    if radius == 0.0:
        return float(clf.value(x))
    psi, psi_batch = _objective(clf, x, alpha)
    per_axis = 2 * math.floor(radius / grid_step) + 1
    if per_axis > 10 * max_points or n > 8:
        raise ResourceError(f"reference grid with {per_axis} points per axis in {n} dims")
    best = float(psi(x))
    if n == 1:
        k = math.floor(radius / grid_step)
        if 2 * k + 1 > max_points:
            raise ResourceError("one-dimensional reference grid too large")
        ys = x + grid_step * np.arange(-k, k + 1, dtype=float)[:, None]
        vals = psi_batch(ys)
        j = int(np.argmin(vals))
        y0 = ys[j]
        _, fy = _golden_line(lambda t: psi(_project(y0 + t, x, radius)), -grid_step, grid_step, iters=80)
        return min(best, float(vals[j]), fy)
    seeds = _lattice(x, radius, 5)
    vals = psi_batch(seeds)
    y = seeds[int(np.argmin(vals))].copy()
    fy = float(vals.min())
    best = min(best, fy)
    eye = np.eye(n)
    span = np.arange(-10, 11, dtype=float)
    for h in _levels(radius, grid_step):
        for _ in range(200):
            improved = False
            for i in range(n):
                ys = y + h * span[:, None] * eye[i]
                inside = np.linalg.norm(ys - x, axis=1) <= radius
                ys = ys[inside]
                v = psi_batch(ys)
                j = int(np.argmin(v))
                if v[j] < fy:
                    y, fy = ys[j].copy(), float(v[j])
                    improved = True
            if not improved:
                break
        y, fy = _descend_coordinates(x, psi, y, radius, width=h)
        best = min(best, fy)
    return best


def check_sandwich(clf, x, alpha, eps1, grid_step=1e-3):
    """``V_alpha(x) <= V(x) <= V_alpha(x) + eps1`` using the grid reference."""
    if not eps1 > 0:
        raise ParameterError("eps1 must be positive")
    ref = reference_envelope(clf, x, alpha, grid_step)
    v = float(clf.value(np.asarray(x, dtype=float)))
    return bool(ref <= v <= ref + eps1)


def check_prox_subgradient(clf, result, x, probe_points, tol=SOLVER_FLOOR):
    """Proximal subgradient inequality of ``result.zeta`` at every probe."""
    y = np.asarray(result.y_eps, dtype=float)
    zeta = np.asarray(result.zeta, dtype=float)
    a2 = result.alpha**2
    vy = float(clf.value(y))
    probes = np.atleast_2d(np.asarray(probe_points, dtype=float))
    vz = clf.batch(probes)
    d = probes - y
    rhs = vy + d @ zeta - np.einsum("ij,ij->i", d, d) / (2.0 * a2)
    return bool(np.all(vz >= rhs - tol))
