"""Control Lyapunov function abstractions.

A CLF is carried around as a :class:`ClfSpec`: the value map ``V``, a decay
rate ``w``, class-K envelopes ``alpha1(|x|) <= V(x) <= alpha2(|x|)`` and an
oracle describing where ``V`` fails to be locally homogeneous.
"""

from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations, product
from typing import Callable, Optional

import numpy as np

from .errors import ConfigurationError, EvaluationError, ParameterError, RegularizationError
from .sampling import ball_points

DEFAULT_MU_SCHEDULE = (1e-2, 1e-3, 1e-4)


@dataclass(frozen=True)
class BoxSet:
    """Compact box ``[lower, upper]`` of admissible controls."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape or lo.size == 0:
            raise ParameterError("box bounds must be nonempty and of equal length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ParameterError("box bounds must be finite")
        if np.any(lo > hi):
            raise ParameterError("empty box: lower > upper in some coordinate")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self):
        return self.lower.size

    @property
    def midpoint(self):
        return 0.5 * (self.lower + self.upper)

    @property
    def half_width(self):
        return 0.5 * (self.upper - self.lower)

    def vertices(self):
        """All ``2**m`` corners, lexicographic in (lower, upper)."""
        return np.array(list(product(*zip(self.lower, self.upper))), dtype=float)

    def clip(self, u):
        return np.clip(u, self.lower, self.upper)

    def contains(self, u, tol=0.0):
        u = np.asarray(u, dtype=float)
        return bool(np.all(u >= self.lower - tol) and np.all(u <= self.upper + tol))


def default_escape(distance):
    """Build the deterministic escape map used when a CLF supplies none.

    The returned ``escape(y, chi)`` tries, in order, the ``2n`` coordinate
    moves of length ``chi`` (lowest index first, ``+`` before ``-``), then
    all two-coordinate diagonal moves of length ``chi``, then seeded random
    directions, and keeps the candidate with the largest distance to the
    nonsmooth set.
    """

    def escape(y, chi):
        y = np.asarray(y, dtype=float)
        n = y.size
        target = 0.5 * chi

        def best_of(steps):
            cands = [y + s for s in steps]
            dists = [distance(c) for c in cands]
            k = int(np.argmax(dists))  # first maximum wins ties
            return cands[k], dists[k]

        eye = np.eye(n)
        steps = [sgn * chi * eye[i] for i in range(n) for sgn in (1.0, -1.0)]
        cand, dist = best_of(steps)
        if dist > target:
            return cand
        if n > 1:
            diag = [
                chi / np.sqrt(2.0) * (si * eye[i] + sj * eye[j])
                for i, j in combinations(range(n), 2)
                for si, sj in product((1.0, -1.0), repeat=2)
            ]
            c2, d2 = best_of(diag)
            if d2 > dist:
                cand, dist = c2, d2
            if dist > target:
                return cand
        rng = np.random.default_rng(0)
        dirs = rng.standard_normal((256, n))
        dirs *= chi / np.linalg.norm(dirs, axis=1, keepdims=True)
        c3, d3 = best_of(list(dirs))
        return c3 if d3 > dist else cand

    return escape


@dataclass(frozen=True)
class ClfSpec:
    """A (possibly nonsmooth) control Lyapunov function with its side data.

    Parameters
    ----------
    value : callable
        ``V(x) -> float``.
    decay : callable
        ``w(x) -> float``, nonnegative, positive away from the origin.
    alpha1, alpha2 : callable
        Class-K-infinity envelopes of ``V`` in ``||x||``.
    nonsmooth_distance : callable
        Distance from ``x`` to the set where difference quotients of ``V``
        fail to settle uniformly.
    dim : int
        State dimension.
    working_radius : float
        Radius of the ball on which sampled suprema (``V_bar``) are taken.
    nonsmooth_escape : callable, optional
        ``(y, chi) -> y_tilde``. Defaults to :func:`default_escape`.
    values : callable, optional
        Batched ``V`` over an ``(N, n)`` array.
    gradient : callable, optional
        A selection of the (Danskin/limiting) gradient, used only to speed up
        local descent; it never enters a certificate.
    alpha1_inv, alpha2_inv : callable, optional
        Closed-form inverses of the envelopes.
    local_descent : callable, optional
        ``(x, y0, alpha, radius) -> (y, value)``: a compiled local minimizer
        of ``V(y) + |y - x|^2 / (2 alpha^2)`` over the ball of ``radius``
        around ``x``, used in place of the generic descent.
    """

    value: Callable
    decay: Callable
    alpha1: Callable
    alpha2: Callable
    nonsmooth_distance: Callable
    dim: int
    working_radius: float = 1.0
    nonsmooth_escape: Optional[Callable] = None
    values: Optional[Callable] = None
    gradient: Optional[Callable] = None
    alpha1_inv: Optional[Callable] = None
    alpha2_inv: Optional[Callable] = None
    local_descent: Optional[Callable] = None
    name: str = "clf"
    vbar_samples: int = 4000
    vbar_safety: float = 1.1
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.dim < 1:
            raise ParameterError("state dimension must be >= 1")
        if self.nonsmooth_escape is None:
            object.__setattr__(self, "nonsmooth_escape", default_escape(self.nonsmooth_distance))

    def batch(self, points):
        """Evaluate ``V`` on every row of ``points``."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self.values is not None:
            out = np.asarray(self.values(points), dtype=float)
        else:
            out = np.array([self.value(p) for p in points], dtype=float)
        return out

    @cached_property
    def v_bar(self):
        """Sampled supremum of ``V`` over the working ball, times a safety factor."""
        pts = ball_points(np.zeros(self.dim), self.working_radius, self.vbar_samples, seed=7)
        vals = self.batch(pts)
        if not np.all(np.isfinite(vals)):
            raise EvaluationError("non-finite V on the working ball")
        return float(self.vbar_safety * vals.max())


def _checked(val):
    val = float(val)
    if not np.isfinite(val):
        raise EvaluationError(f"non-finite CLF value {val!r}")
    return val


def dini_derivative_fd(clf, x, theta, mu_schedule=DEFAULT_MU_SCHEDULE):
    """Finite-difference surrogate of the lower Dini derivative of ``V``.

    Returns ``min_mu (V(x + mu*theta) - V(x)) / mu`` over ``mu_schedule``.
    On points where ``V`` is locally homogeneous the quotients settle and the
    surrogate is within the homogeneity tolerance of the true liminf; near
    kinks it is only an approximation.
    """
    mus = np.asarray(mu_schedule, dtype=float)
    if mus.size == 0 or np.any(mus <= 0) or np.any(np.diff(mus) >= 0):
        raise ParameterError("mu_schedule must be nonempty, positive and strictly decreasing")
    x = np.asarray(x, dtype=float)
    theta = np.asarray(theta, dtype=float)
    base = _checked(clf.value(x))
    shifted = clf.batch(x[None, :] + mus[:, None] * theta[None, :])
    if not np.all(np.isfinite(shifted)):
        raise EvaluationError("non-finite CLF value along the probe direction")
    return float(np.min((shifted - base) / mus))


def rho_V(clf, r):
    """Level below which ``V(x) <= rho_V(r)`` forces ``||x|| <= r``."""
    if r <= 0:
        raise ParameterError("r must be positive")
    return float(clf.alpha1(r))


def _invert_increasing(fn, level, upper_side):
    """Bisection inverse of a strictly increasing map with ``fn(0) = 0``."""
    if level <= 0:
        return 0.0
    lo, hi = 0.0, 1.0
    for _ in range(400):
        if fn(hi) >= level:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise ConfigurationError(f"cannot bracket class-K inverse at level {level!r}")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if fn(mid) >= level:
            hi = mid
        else:
            lo = mid
    if upper_side:
        return lo if fn(lo) >= level else hi
    return hi if fn(hi) <= level else lo


def lambda_V(clf, v):
    """Radius such that ``V(x) >= v`` forces ``||x|| >= lambda_V(v)``."""
    if v <= 0:
        raise ParameterError("v must be positive")
    if clf.alpha2_inv is not None:
        return float(clf.alpha2_inv(v))
    # Lower bracket end: never overstates the inverse.
    return _invert_increasing(clf.alpha2, v, upper_side=False)


def rho_V_inverse(clf, level):
    """Smallest radius ``R`` (up to bisection) with ``rho_V(R) >= level``."""
    if clf.alpha1_inv is not None:
        return float(clf.alpha1_inv(level))
    return _invert_increasing(clf.alpha1, level, upper_side=True)


def regularize_point(clf, y, chi, retries=3):
    """Move ``y`` at most ``chi`` away so that it lies off the nonsmooth set.

    Returns ``y`` itself when it is already farther than ``chi/2`` from the
    nonsmooth set. Otherwise asks the CLF's escape oracle, retrying with a
    slightly shortened step, and validates both postconditions.
    """
    if not chi > 0:
        raise ParameterError("chi must be positive")
    y = np.asarray(y, dtype=float)
    if clf.nonsmooth_distance(y) > 0.5 * chi:
        return y
    step = chi
    for _ in range(retries):
        cand = np.asarray(clf.nonsmooth_escape(y, step), dtype=float)
        if np.linalg.norm(cand - y) <= chi and clf.nonsmooth_distance(cand) > 0.5 * chi:
            return cand
        step *= 0.999
    raise RegularizationError(f"escape oracle of {clf.name!r} failed at y={y!r}, chi={chi!r}")


def abs_clf(working_radius=2.0, decay_gain=0.5, decay_cap=None):
    """``V(x) = |x|`` on the real line with ``w(x) = decay_gain * |x|``.

    With ``decay_cap`` the decay saturates: ``w(x) = decay_gain * min(|x|, decay_cap)``.
    Under ``dx/dt = u`` with ``|u| <= 1`` the decay condition needs
    ``w <= 1``, so the uncapped form is valid only for ``|x| <= 1/decay_gain``.
    """
    cap = np.inf if decay_cap is None else float(decay_cap)

    def value(x):
        return float(abs(np.asarray(x, dtype=float).reshape(-1)[0]))

    def values(pts):
        return np.abs(np.asarray(pts, dtype=float)[:, 0])

    def gradient(x):
        return np.sign(np.asarray(x, dtype=float).reshape(-1))

    def ident(s):
        return float(s)

    return ClfSpec(
        value=value,
        decay=lambda x: decay_gain * min(abs(float(np.asarray(x).reshape(-1)[0])), cap),
        alpha1=ident,
        alpha2=ident,
        alpha1_inv=ident,
        alpha2_inv=ident,
        nonsmooth_distance=lambda x: abs(float(np.asarray(x).reshape(-1)[0])),
        dim=1,
        working_radius=working_radius,
        values=values,
        gradient=gradient,
        name="abs",
    )
