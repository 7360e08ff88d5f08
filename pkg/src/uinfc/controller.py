"""The uInfC sample-and-hold control law.

One call of :func:`uinfc_step` runs a full sampling period's computation:
approximate inf-convolution at the measured state, regularization of the
minimizer away from the nonsmooth set, and an approximately optimal control
from the box.
"""

from dataclasses import dataclass
from itertools import product

import numpy as np

from .clf import BoxSet, regularize_point
from .errors import ParameterError
from .infconv import moreau_envelope

GRID_PER_AXIS = 101


@dataclass(frozen=True)
class UinfcParams:
    """Controller parameters.

    ``eps_target`` is the envelope accuracy (gap to the true inf-convolution
    value) and ``eta_target`` the control accuracy, both realized exactly by
    injection when positive.
    """

    alpha: float
    eps_target: float
    eta_target: float
    chi: float
    input_set: BoxSet
    seed: int = 0
    lattice: int = 5

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ParameterError(f"alpha must lie in (0, 1), got {self.alpha!r}")
        if not (self.eps_target >= 0 and self.eta_target >= 0):
            raise ParameterError("accuracies must be >= 0")
        if not self.chi > 0:
            raise ParameterError("chi must be positive")
        if not isinstance(self.input_set, BoxSet):
            raise ParameterError("input_set must be a BoxSet")


@dataclass(frozen=True)
class StepDiagnostics:
    y: np.ndarray
    y_tilde: np.ndarray
    zeta_tilde: np.ndarray
    eps_achieved: float
    eta_achieved: float
    envelope_value: float
    envelope_best: float


def _affine_coefficients(zeta, dyn, y, box):
    # <zeta, f(y, u)> = base + c @ u for control-affine f.
    m = box.dim
    f0 = np.asarray(dyn(y, np.zeros(m)), dtype=float)
    base = float(np.dot(zeta, f0))
    c = np.empty(m)
    for j in range(m):
        e = np.zeros(m)
        e[j] = 1.0
        c[j] = float(np.dot(zeta, np.asarray(dyn(y, e), dtype=float) - f0))
    return base, c


def _select_affine(c, box, eta_target, rng, flat_tol):
    lo, hi = box.lower, box.upper
    flat = np.abs(c) <= flat_tol
    u_star = np.where(flat, box.midpoint, np.where(c > 0, lo, hi))
    if eta_target <= 0:
        return u_star
    # Inward direction: every active coordinate moves away from its bound.
    d = np.where(flat, 0.0, np.sign(c) * np.abs(rng.standard_normal(c.size)))
    rate = float(np.dot(c, d))
    if rate <= 0:
        return u_star
    with np.errstate(divide="ignore", invalid="ignore"):
        room = np.where(d > 0, (hi - u_star) / d, np.where(d < 0, (lo - u_star) / d, np.inf))
    t = min(0.75 * eta_target / rate, float(room.min()))
    return box.clip(u_star + t * d)


def _grid(box, per_axis):
    axes = [np.linspace(l, h, per_axis) if h > l else np.array([l]) for l, h in zip(box.lower, box.upper)]
    return np.array(list(product(*axes)))


def _select_general(obj, box, eta_target, rng, per_axis):
    pts = _grid(box, per_axis)
    vals = np.array([obj(u) for u in pts])
    k = int(np.argmin(vals))
    best = vals.min()
    # Flat objective: midpoint when it is as good as the grid optimum.
    mid = box.midpoint
    u_star = mid if obj(mid) <= best else pts[k]
    f_star = min(best, obj(mid))
    if eta_target <= 0:
        return u_star, f_star
    lo_gap, hi_gap, target = 0.5 * eta_target, eta_target, 0.75 * eta_target
    for _ in range(32):
        d = rng.standard_normal(box.dim)
        d /= np.linalg.norm(d)
        with np.errstate(divide="ignore", invalid="ignore"):
            room = np.where(d > 0, (box.upper - u_star) / d,
                            np.where(d < 0, (box.lower - u_star) / d, np.inf))
        t_hi = float(room.min())
        if not np.isfinite(t_hi) or t_hi <= 0 or obj(u_star + t_hi * d) - f_star < lo_gap:
            continue
        t_lo = 0.0
        for _ in range(200):
            t = 0.5 * (t_lo + t_hi)
            gap = obj(u_star + t * d) - f_star
            if lo_gap <= gap <= hi_gap:
                return box.clip(u_star + t * d), f_star
            if gap < target:
                t_lo = t
            else:
                t_hi = t
    return u_star, f_star


def select_control(zeta, dyn, y_tilde, box, eta_target=0.0, seed=0, flat_tol=0.0,
                   per_axis=GRID_PER_AXIS):
    """Approximately minimize ``<zeta, f(y_tilde, u)>`` over the box.

    Parameters
    ----------
    zeta, y_tilde : ndarray
    dyn : Dynamics
    box : BoxSet
    eta_target : float
        Requested control accuracy; a positive value is realized by moving
        the optimum along a seeded direction until the objective gap lies in
        ``[0.5, 1] * eta_target``.
    seed : int
    flat_tol : float or ndarray
        Control-affine case only: coefficients with magnitude at most this
        value are treated as zero, so the coordinate goes to the box midpoint.
    per_axis : int
        Grid resolution of the reference infimum for non-affine dynamics.

    Returns
    -------
    u : ndarray
    eta_achieved : float
        Objective gap of ``u`` above the exact (affine) or grid (otherwise)
        infimum over the box.
    """
    if not isinstance(box, BoxSet):
        raise ParameterError("box must be a BoxSet")
    if not eta_target >= 0:
        raise ParameterError("eta_target must be >= 0")
    zeta = np.asarray(zeta, dtype=float)
    y_tilde = np.asarray(y_tilde, dtype=float)
    rng = np.random.default_rng(seed)
    if dyn.control_affine:
        base, c = _affine_coefficients(zeta, dyn, y_tilde, box)
        u = _select_affine(c, box, eta_target, rng, flat_tol)
        inf_val = float(np.sum(np.minimum(c * box.lower, c * box.upper)))
        return u, max(0.0, float(np.dot(c, u)) - inf_val)

    def obj(u):
        return float(np.dot(zeta, np.asarray(dyn(y_tilde, u), dtype=float)))

    u, f_star = _select_general(obj, box, eta_target, rng, per_axis)
    return u, max(0.0, obj(u) - f_star)


def _child_seeds(seed):
    a, b = np.random.SeedSequence(seed).generate_state(2)
    return int(a), int(b)


def uinfc_step(clf, dyn, x_hat, p, warm_start=None):
    """One uInfC control computation at the measured state ``x_hat``.

    Returns ``(u, StepDiagnostics)``. The control objective uses
    ``zeta_tilde = (x_hat - y_tilde) / alpha^2`` and evaluates ``f`` at the
    regularized point ``y_tilde``. Control coefficients smaller than the
    shift that regularization put into ``zeta_tilde`` count as flat.
    """
    x_hat = np.asarray(x_hat, dtype=float)
    if not np.all(np.isfinite(x_hat)):
        raise ParameterError("measured state must be finite")
    s_env, s_ctl = _child_seeds(p.seed)
    res = moreau_envelope(clf, x_hat, p.alpha, p.eps_target, seed=s_env,
                          lattice=p.lattice, warm_start=warm_start)
    y = res.y_eps
    y_tilde = regularize_point(clf, y, p.chi)
    a2 = p.alpha * p.alpha
    zeta_tilde = (x_hat - y_tilde) / a2
    flat_tol = 0.0
    shift = float(np.linalg.norm(y_tilde - y))
    if shift > 0 and dyn.control_affine:
        m = p.input_set.dim
        f0 = np.asarray(dyn(y_tilde, np.zeros(m)), dtype=float)
        cols = [np.asarray(dyn(y_tilde, e), dtype=float) - f0 for e in np.eye(m)]
        flat_tol = shift / a2 * np.array([np.linalg.norm(g) for g in cols])
    u, eta = select_control(zeta_tilde, dyn, y_tilde, p.input_set, p.eta_target,
                            seed=s_ctl, flat_tol=flat_tol)
    diag = StepDiagnostics(
        y=y, y_tilde=y_tilde, zeta_tilde=zeta_tilde, eps_achieved=res.eps_achieved,
        eta_achieved=eta, envelope_value=res.envelope_value, envelope_best=res.envelope_best,
    )
    return u, diag
