"""Constructive sampling-time and accuracy bounds for practical stabilization.

:func:`compute_bounds` builds the radii and levels of the stability proof
(overshoot ball, target and core balls), estimates the constants ``f_bar``,
``w_bar``, ``L_f`` and ``L_V`` by quasi-random sampling, and then solves the
bound inequalities in a fixed order: ``eps1``, the admissible ``alpha``,
``delta``, the optimization accuracy, ``chi``, and finally the tightened
accuracy. Every inequality is recorded with its substituted sides so that
:func:`verify_bounds` can re-check a report without recomputing anything.
"""

import math
from dataclasses import dataclass, field, fields
from typing import NamedTuple

import numpy as np

from .clf import lambda_V, rho_V, rho_V_inverse
from .errors import ConfigurationError, InfeasibleError, ParameterError
from .sampling import annulus_points

_SHRINK = 1.0 - 1e-9  # solved values sit strictly inside their bounds


class Ball(NamedTuple):
    center: np.ndarray
    radius: float


class Annulus(NamedTuple):
    center: np.ndarray
    inner: float
    outer: float


@dataclass(frozen=True)
class EstimationConfig:
    """Sample counts and safety factors of the constant estimators."""

    samples: int = 2000
    lipschitz_safety: float = 1.25
    sup_safety: float = 1.1
    inf_safety: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if self.samples < 100:
            raise ParameterError("at least 100 samples are required")
        if self.lipschitz_safety < 1 or self.sup_safety < 1:
            raise ParameterError("sup and Lipschitz safety factors must be >= 1")
        if not 0 < self.inf_safety <= 1:
            raise ParameterError("inf safety factor must lie in (0, 1]")


def _apply(fn, pts, vectorized):
    if vectorized:
        return np.asarray(fn(pts), dtype=float)
    return np.array([np.asarray(fn(p), dtype=float) for p in pts])


def estimate_lipschitz(fn, domain_ball, samples=2000, safety=1.25, seed=0, vectorized=False):
    """Sampled Lipschitz constant of ``fn`` on a ball, inflated by ``safety``.

    Each quasi-random base point is paired with a far partner anywhere in the
    ball and a close partner at distance ``1e-3 * radius``; the largest
    difference ratio is a statistical lower bound on the true constant.
    Base points and partners are prefix-stable, so more samples never lower
    the estimate.

    Parameters
    ----------
    fn : callable
        Scalar or vector valued map of a point (or of an ``(N, n)`` array
        when ``vectorized``).
    domain_ball : Ball or (center, radius)
    samples : int
    safety : float
    seed : int
    vectorized : bool
    """
    if samples < 100:
        raise ParameterError("at least 100 samples are required")
    center, radius = domain_ball
    center = np.atleast_1d(np.asarray(center, dtype=float))
    n = center.size
    a, extra = annulus_points(center, 0.0, radius, samples, seed, extra_dims=n)
    raw = 2.0 * extra - 1.0
    far = center + radius * raw
    norms = np.linalg.norm(far - center, axis=1, keepdims=True)
    far = np.where(norms > radius, center + (far - center) * radius / np.maximum(norms, 1e-300), far)
    dirs = raw / np.maximum(np.linalg.norm(raw, axis=1, keepdims=True), 1e-300)
    close = a + 1e-3 * radius * dirs
    norms = np.linalg.norm(close - center, axis=1, keepdims=True)
    close = np.where(norms > radius, center + (close - center) * radius / np.maximum(norms, 1e-300), close)
    fa = _apply(fn, a, vectorized).reshape(samples, -1)
    best = 0.0
    for b in (far, close):
        fb = _apply(fn, b, vectorized).reshape(samples, -1)
        dist = np.linalg.norm(a - b, axis=1)
        ok = dist > 1e-12 * max(radius, 1.0)
        if np.any(ok):
            ratio = np.linalg.norm(fa[ok] - fb[ok], axis=1) / dist[ok]
            best = max(best, float(ratio.max()))
    return safety * best


def estimate_extrema(fn, domain, mode, samples=2000, safety=None, seed=0, vectorized=False):
    """Sampled supremum or infimum of a scalar ``fn`` over a ball or annulus.

    Interior quasi-random points are complemented by their projections onto
    the inner and outer spheres. The extremum is multiplied by ``safety``
    (default 1.1 for ``sup``, 0.8 for ``inf``), which is conservative for
    nonnegative functions.
    """
    if samples < 100:
        raise ParameterError("at least 100 samples are required")
    if mode not in ("sup", "inf"):
        raise ParameterError(f"mode must be 'sup' or 'inf', got {mode!r}")
    if safety is None:
        safety = 1.1 if mode == "sup" else 0.8
    if mode == "sup" and safety < 1:
        raise ParameterError("sup safety must be >= 1")
    if mode == "inf" and not 0 < safety <= 1:
        raise ParameterError("inf safety must lie in (0, 1]")
    if isinstance(domain, Annulus) or len(domain) == 3:
        center, inner, outer = domain
    else:
        center, outer = domain
        inner = 0.0
    if not 0 <= inner < outer:
        raise ConfigurationError(f"empty sampling domain: inner {inner!r} >= outer {outer!r}")
    center = np.atleast_1d(np.asarray(center, dtype=float))
    pts, _ = annulus_points(center, inner, outer, samples, seed)
    d = pts - center
    nd = np.linalg.norm(d, axis=1, keepdims=True)
    unit = np.where(nd > 0, d / np.maximum(nd, 1e-300), 0.0)
    if center.size == 1:
        unit = np.where(nd > 0, unit, 1.0)
    shells = [center + outer * unit]
    if inner > 0:
        shells.append(center + inner * unit)
    allpts = np.concatenate([pts] + shells)
    vals = _apply(fn, allpts, vectorized).reshape(-1)
    if not np.all(np.isfinite(vals)):
        raise ConfigurationError("non-finite value while sampling extrema")
    ext = vals.max() if mode == "sup" else vals.min()
    return safety * float(ext)


# ---------------------------------------------------------------- report


@dataclass
class BoundsReport:
    R: float
    r: float
    e_bar: float
    q_bar: float
    R_hat: float
    r_hat: float
    V_hat: float
    Theta: float
    R_hat_star: float
    V_hat_star: float
    v_hat: float
    r_hat_star: float
    outer_radius: float
    f_bar: float
    w_bar: float
    L_f: float
    L_V: float
    eps1: float
    eps2: float
    alpha_requested: float
    alpha_bar: float
    alpha: float
    delta_bar: float
    eps_bar: float
    eps_gap_bar: float
    eta_bar: float
    chi_bar: float
    e_bar_max: float
    T_alpha: float
    t_reach: float
    samples: int
    checks: list = field(default_factory=list)

    def to_text(self):
        lines = []
        for f in fields(self):
            if f.name == "checks":
                continue
            lines.append(f"{f.name} = {getattr(self, f.name)!r}")
        for name, lhs, rhs, ok in self.checks:
            lines.append(f"check: {name} {lhs!r}<={rhs!r} {'OK' if ok else 'FAIL'}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        """Parse :meth:`to_text` output; checks are recomputed from the values."""
        values = {}
        names = {f.name: f.type for f in fields(cls) if f.name != "checks"}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("check:") or line.startswith("#"):
                continue
            key, sep, val = line.partition("=")
            key = key.strip()
            if not sep or key not in names:
                raise ConfigurationError(f"line {lineno}: unexpected entry {line!r}")
            values[key] = int(val) if key == "samples" else float(val)
        missing = set(names) - set(values)
        if missing:
            raise ConfigurationError(f"missing report fields: {sorted(missing)}")
        rep = cls(**values)
        rep.checks = _inequalities(rep)
        return rep


def _div(num, den):
    return math.inf if den == 0 else num / den


def _inequalities(p):
    """Every bound inequality with substituted sides, as ``(name, lhs, rhs, ok)``."""
    s2v = math.sqrt(2.0 * p.V_hat_star)
    a2 = p.alpha * p.alpha
    w36 = p.w_bar / 36.0
    d, eps, chi = p.delta_bar, p.eps_bar, p.chi_bar
    rows = [
        ("noise_below_target", p.e_bar + p.q_bar, p.r, True),
        ("e_bar_r_over_8", p.e_bar, p.r / 8.0, False),
        ("q_bar_r_over_8", p.q_bar, p.r / 8.0, False),
        ("overshoot_level", p.V_hat + p.eps1, p.Theta, False),
        ("bounds1_eps1", 4.0 * p.L_f * p.eps1, w36, False),
        ("alpha_core", s2v * p.alpha, p.r_hat_star / 2.0, False),
        ("alpha_eps1", s2v * p.alpha * p.L_V, p.eps1, False),
        ("bounds2_eta", p.eta_bar, w36, False),
        ("bounds2_delta_level", d * p.w_bar / 2.0, p.v_hat / 4.0, False),
        ("bounds2_delta_quadratic", d * (p.f_bar + p.q_bar) ** 2 / (2.0 * a2), w36, False),
        ("delta_drift", (d * p.L_f * p.f_bar + p.q_bar) * s2v / p.alpha, w36, False),
        ("delta_below_one", d, 1.0, True),
        ("case2_delta", d * p.f_bar * p.L_V, p.eps2, False),
        ("eps2_level", p.eps2, p.v_hat / 8.0, False),
        ("bounds3_delta", eps * eps, d * w36, False),
        ("bounds3_lipschitz", 4.0 * p.L_f * eps * eps, w36, False),
        ("bounds4_quadratic", 2.0 / a2 * p.L_f * chi * chi, w36, False),
        ("bounds4_drift", (d * p.L_f * p.f_bar + p.q_bar) * chi / a2, w36, False),
        ("bounds4_speed", chi / a2 * (p.f_bar + p.q_bar), w36, False),
        ("bound5_eps", eps * (2.0 * a2 + p.f_bar ** 2), p.w_bar * a2 / 10.0 - 2.0 * chi * p.f_bar, False),
        ("e_bar_strict", p.e_bar * 16.0 * p.L_V, p.w_bar, True),
        ("T_alpha_positive", 0.0, p.T_alpha, True),
    ]
    out = []
    for name, lhs, rhs, strict in rows:
        ok = (lhs < rhs) if strict else (lhs <= rhs)
        if name == "T_alpha_positive":
            ok = ok and math.isfinite(p.T_alpha)
        out.append((name, float(lhs), float(rhs), bool(ok)))
    return out


def verify_bounds(report):
    """Re-substitute every inequality from the stored constants."""
    return all(ok for _, _, _, ok in _inequalities(report))


def _lipschitz_f(dyn, box, ball, cfg):
    best = 0.0
    for k, u in enumerate(box.vertices()):
        est = estimate_lipschitz(lambda x, u=u: dyn(x, u), ball, cfg.samples, 1.0, cfg.seed + 101 + k)
        best = max(best, est)
    return cfg.lipschitz_safety * best


def _sup_f(dyn, box, ball, cfg):
    best = 0.0
    for k, u in enumerate(box.vertices()):
        est = estimate_extrema(lambda x, u=u: float(np.linalg.norm(dyn(x, u))), ball, "sup",
                               cfg.samples, 1.0, cfg.seed + 201 + k)
        best = max(best, est)
    return cfg.sup_safety * best


def compute_bounds(clf, dyn, R, r, e_bar, q_bar, alpha, box, est_cfg=None):
    """Solve the bound inequalities for a CLF, plant and input box.

    Parameters
    ----------
    clf : ClfSpec
    dyn : Dynamics
    R, r : float
        Starting and target ball radii of the true state, ``0 < r < R``.
    e_bar, q_bar : float
        Measurement-noise and disturbance bounds.
    alpha : float
        Requested inf-convolution parameter. It is lowered to the largest
        admissible value when it violates the localization conditions; the
        request is kept in ``alpha_requested``.
    box : BoxSet
    est_cfg : EstimationConfig, optional

    Returns
    -------
    BoundsReport
        ``eps_bar`` bounds the optimization accuracy of the proof, whose
        envelope gap is its square, stored as ``eps_gap_bar``. ``T_alpha``
        is the reach bound in sampling periods and ``t_reach`` the
        corresponding time.

    Raises
    ------
    InfeasibleError
        When some inequality admits no positive solution; the exception names it.
    """
    cfg = est_cfg or EstimationConfig()
    if not 0 < r < R:
        raise ParameterError("radii must satisfy 0 < r < R")
    if e_bar < 0 or q_bar < 0:
        raise ParameterError("noise bounds must be >= 0")
    if not 0 < alpha < 1:
        raise ParameterError("alpha must lie in (0, 1)")
    if e_bar + q_bar >= r:
        raise InfeasibleError("noise_below_target", "e_bar + q_bar must be below r")
    if e_bar > r / 8 or q_bar > r / 8:
        raise InfeasibleError("e_bar_r_over_8" if e_bar > r / 8 else "q_bar_r_over_8",
                              "noise bounds must not exceed r/8")
    n = clf.dim
    origin = np.zeros(n)

    def vmap(pts):
        return clf.batch(pts)

    R_hat = R + e_bar + q_bar
    r_hat = r - e_bar - q_bar
    V_hat = estimate_extrema(vmap, Ball(origin, R_hat), "sup", cfg.samples, cfg.sup_safety,
                             cfg.seed + 1, vectorized=True)
    v_hat = rho_V(clf, r_hat)
    Theta = V_hat + v_hat / 8.0
    R_hat_star = rho_V_inverse(clf, Theta)
    V_hat_star = estimate_extrema(vmap, Ball(origin, R_hat_star), "sup", cfg.samples,
                                  cfg.sup_safety, cfg.seed + 2, vectorized=True)
    V_hat_star = max(V_hat_star, Theta)
    r_hat_star = lambda_V(clf, v_hat / 4.0)
    s2v = math.sqrt(2.0 * V_hat_star)
    outer = R_hat_star + s2v
    big = Ball(origin, outer)

    f_bar = _sup_f(dyn, box, big, cfg)
    w_bar = estimate_extrema(clf.decay, Annulus(origin, r_hat_star / 2.0, outer), "inf",
                             cfg.samples, cfg.inf_safety, cfg.seed + 3)
    if not w_bar > 0:
        raise InfeasibleError("w_bar_positive", "decay rate vanishes on the annulus",
                              dict(v_hat=v_hat, r_hat_star=r_hat_star, outer_radius=outer))
    L_f = _lipschitz_f(dyn, box, big, cfg)
    L_V = estimate_lipschitz(vmap, big, cfg.samples, cfg.lipschitz_safety, cfg.seed + 4,
                             vectorized=True)
    if not L_V > 0:
        raise InfeasibleError("L_V_positive", "CLF appears constant on the working ball")

    w36 = w_bar / 36.0
    eps1 = _SHRINK * min(_div(w36, 4.0 * L_f), v_hat / 8.0)
    eps2 = v_hat / 8.0
    alpha_bar = _SHRINK * min(r_hat_star / 2.0, eps1 / L_V) / s2v
    a = min(alpha, alpha_bar)
    a2 = a * a

    partial = dict(R_hat=R_hat, r_hat=r_hat, V_hat=V_hat, Theta=Theta, R_hat_star=R_hat_star,
                   V_hat_star=V_hat_star, v_hat=v_hat, r_hat_star=r_hat_star, outer_radius=outer,
                   f_bar=f_bar, w_bar=w_bar, L_f=L_f, L_V=L_V, eps1=eps1, alpha_bar=alpha_bar,
                   alpha=a)
    drift_num = w36 * a / s2v - q_bar
    if drift_num <= 0:
        raise InfeasibleError("delta_drift", "q_bar too large for the chosen alpha", partial)
    delta_bar = _SHRINK * min(
        v_hat / (2.0 * w_bar),
        w36 * 2.0 * a2 / (f_bar + q_bar) ** 2,
        _div(drift_num, L_f * f_bar),
        _div(eps2, L_V * f_bar),
        1.0,
    )
    eta_bar = w36
    eps3 = math.sqrt(min(delta_bar * w36, _div(w36, 4.0 * L_f)))
    chi_bar = _SHRINK * min(
        math.sqrt(_div(w36 * a2, 2.0 * L_f)),
        _div(w36 * a2, delta_bar * L_f * f_bar + q_bar),
        w36 * a2 / (f_bar + q_bar),
    )
    num5 = w_bar * a2 / 10.0 - 2.0 * chi_bar * f_bar
    if num5 <= 0:
        raise InfeasibleError("bound5_eps", "chi leaves no room for the accuracy bound", partial)
    eps_bar = _SHRINK * min(eps3, num5 / (2.0 * a2 + f_bar ** 2))
    e_bar_max = w_bar / (16.0 * L_V)
    if not e_bar < e_bar_max:
        raise InfeasibleError("e_bar_strict", f"e_bar must be below w_bar/(16 L_V) = {e_bar_max:.3e}",
                              partial)
    T_alpha = 2.0 * (V_hat_star - v_hat / 2.0) / (delta_bar * w_bar)

    report = BoundsReport(
        R=R, r=r, e_bar=e_bar, q_bar=q_bar, R_hat=R_hat, r_hat=r_hat, V_hat=V_hat, Theta=Theta,
        R_hat_star=R_hat_star, V_hat_star=V_hat_star, v_hat=v_hat, r_hat_star=r_hat_star,
        outer_radius=outer, f_bar=f_bar, w_bar=w_bar, L_f=L_f, L_V=L_V, eps1=eps1, eps2=eps2,
        alpha_requested=alpha, alpha_bar=alpha_bar, alpha=a, delta_bar=delta_bar,
        eps_bar=eps_bar, eps_gap_bar=eps_bar * eps_bar, eta_bar=eta_bar, chi_bar=chi_bar,
        e_bar_max=e_bar_max, T_alpha=T_alpha, t_reach=T_alpha * delta_bar, samples=cfg.samples,
    )
    report.checks = _inequalities(report)
    for name, lhs, rhs, ok in report.checks:
        if not ok:
            raise InfeasibleError(name, f"{lhs!r} vs {rhs!r}")
    return report
