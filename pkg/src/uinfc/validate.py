"""Built-in property suite behind ``uinfc validate``.

Every check returns a :class:`CheckResult`; :func:`run_suite` prints one row
per check. The same functions back the acceptance tests, which call them with
larger sample counts.
"""

import math
import time
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize_scalar

from .bounds import Ball, compute_bounds, estimate_lipschitz
from .clf import BoxSet, abs_clf, dini_derivative_fd
from .controller import UinfcParams
from .endi import f_tilde, grad_f_tilde, make_endi_clf, v_tilde
from .infconv import check_prox_subgradient, check_sandwich, lemma1_radius, moreau_envelope
from .sampling import ball_points
from .sim import ShRunConfig, check_practical_stability, decay_audit, simulate
from .systems import INTEGRATOR_1D, NoiseModel

FINE_MUS = (1e-6, 1e-7, 1e-8)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


_ENDI = None


def endi_clf():
    """Shared ENDI CLF with the default calibration (built once per process)."""
    global _ENDI
    if _ENDI is None:
        _ENDI = make_endi_clf()
    return _ENDI


def _cases(count):
    endi = endi_clf()
    one = abs_clf()
    return [
        ("endi", endi, ball_points(np.zeros(5), endi.working_radius, count, seed=21), 0.1),
        ("abs", one, ball_points(np.zeros(1), one.working_radius, count, seed=22), 0.5),
    ]


def lemma1_localization(count=1000, eps_values=(0.0, 1e-4, 1e-2)):
    """``||y_eps - x|| <= sqrt(2 V_bar) alpha`` for exact and injected results."""
    worst, total = -math.inf, 0
    for _, clf, pts, alpha in _cases(count):
        for k, x in enumerate(pts):
            eps = eps_values[k % len(eps_values)]
            res = moreau_envelope(clf, x, alpha, eps, seed=k)
            slack = np.linalg.norm(res.y_eps - x) - lemma1_radius(clf, x, alpha)
            worst = max(worst, slack)
            total += 1
    return worst <= 1e-12, f"{total} states, max(||y-x|| - radius) = {worst:.3g}"


def _lemma2_alpha(clf, eps1):
    L_V = estimate_lipschitz(clf.value, Ball(np.zeros(clf.dim), clf.working_radius), 2000, 1.25, 0)
    return eps1 / (2.0 * L_V * math.sqrt(2.0 * clf.v_bar))


def lemma2_sandwich(count_abs=1000, count_endi=100, eps1=0.1):
    """``V_alpha <= V <= V_alpha + eps1`` with ``sqrt(2 V_bar) alpha = eps1 / (2 L_V)``."""
    fails, total = 0, 0
    for name, clf, pts, _ in _cases(max(count_abs, count_endi)):
        alpha = _lemma2_alpha(clf, eps1)
        step = math.sqrt(2.0 * clf.v_bar) * alpha / 50.0
        for x in pts[: count_endi if name == "endi" else count_abs]:
            fails += not check_sandwich(clf, x, alpha, eps1, grid_step=step)
            total += 1
    return fails == 0, f"{total - fails}/{total} states"


def _probes(x, y, radius, count, rng):
    n = x.size
    far = x + radius * rng.uniform(-1.0, 1.0, size=(count // 2, n)) / math.sqrt(n)
    near = y + 0.05 * radius * rng.standard_normal(size=(count - count // 2, n))
    return np.vstack([far, near])


def prox_inequality(count=1000, probes=100, tol=1e-6, corrupt_zeta=False):
    """Proximal subgradient inequality of exact-mode ``zeta`` at random probes.

    ``corrupt_zeta`` adds one to every component of ``zeta`` first, which must
    make the check fail.
    """
    rng = np.random.default_rng(23)
    fails, total = 0, 0
    for _, clf, pts, alpha in _cases(count):
        for x in pts:
            res = moreau_envelope(clf, x, alpha, 0.0)
            if corrupt_zeta:
                res = replace(res, zeta=res.zeta + 1.0)
            z = _probes(x, res.y_eps, lemma1_radius(clf, x, alpha), probes, rng)
            fails += not check_prox_subgradient(clf, res, x, z, tol=tol)
            total += 1
    return fails == 0, f"{total - fails}/{total} results, {probes} probes each"


def dini_surrogate(count=1000, directions=4, tol=1e-3, regular=0.05):
    """``<zeta, theta> <= D V(y; theta) + tol`` at regular exact minimizers ``y``."""
    rng = np.random.default_rng(24)
    worst, total = -math.inf, 0
    for _, clf, pts, alpha in _cases(count):
        for x in pts:
            res = moreau_envelope(clf, x, alpha, 0.0)
            y = res.y_eps
            if clf.nonsmooth_distance(y) <= regular:
                continue
            for _ in range(directions):
                th = rng.standard_normal(clf.dim)
                th /= np.linalg.norm(th)
                gap = float(res.zeta @ th) - dini_derivative_fd(clf, y, th, FINE_MUS)
                worst = max(worst, gap)
                total += 1
    return worst <= tol, f"{total} (point, direction) pairs, max gap {worst:.3g}"


# ---------------------------------------------------------------- 1-D certified run


def one_d_certified_run(scale=100.0, x0_fraction=0.27, horizon=5000, eps_multiplier=1.0, seed=0):
    """Closed loop of ``dx/dt = u``, ``V = |x|`` run at the certified bounds.

    The decay is capped, ``w(x) = 0.5 min(|x|, 1)``, so ``w_bar`` stays of
    order one on the annulus; every other constant comes from
    :func:`compute_bounds` with ``R = scale``, ``r = scale / 4`` and no noise.

    Returns
    -------
    dict
        ``report``, ``cfg``, ``log``, ``audit``, ``verdict`` and
        ``entry_sample`` (first sample inside ``B_r``, or None).
    """
    box = BoxSet([-1.0], [1.0])
    R, r = scale, scale / 4.0
    clf = abs_clf(working_radius=10.0 * scale, decay_gain=0.5, decay_cap=1.0)
    rep = compute_bounds(clf, INTEGRATOR_1D, R, r, 0.0, 0.0, 0.999, box)
    params = UinfcParams(rep.alpha, eps_multiplier * rep.eps_gap_bar, rep.eta_bar, rep.chi_bar, box,
                         seed=seed)
    cfg = ShRunConfig(INTEGRATOR_1D, clf, params, rep.delta_bar, horizon, [x0_fraction * scale],
                      NoiseModel("zero", 0.0, 1), NoiseModel("zero", 0.0, 2), r, R,
                      audit_stride=0, core_level=rep.v_hat)
    log = simulate(cfg)
    audit = decay_audit(log, cfg, rep.w_bar, grid_step=0.01 * rep.alpha)
    inside = np.flatnonzero(np.abs(log.x[:, 0]) <= r)
    return {
        "report": rep, "cfg": cfg, "log": log, "audit": audit,
        "verdict": check_practical_stability(log, r),
        "entry_sample": int(inside[0]) if inside.size else None,
    }


def decay_audit_1d():
    out = one_d_certified_run()
    a, entry = out["audit"], out["entry_sample"]
    ok = a.count > 0 and a.pass_rate == 1.0 and entry is not None and entry <= out["report"].T_alpha
    return ok, (f"{a.count} case-1 pairs, pass rate {a.pass_rate:.3f}, entry sample {entry} "
                f"<= T_alpha {out['report'].T_alpha:.3g}")


# ---------------------------------------------------------------- ENDI CLF


def f_tilde_grid_min(phi, points=720):
    """Minimum of ``f_tilde(phi, .)`` by a periodic grid plus bounded refinement."""
    th = np.arange(points) * (2.0 * math.pi / points)
    p1, p2, p3 = phi
    vals = p1 * p1 + p2 * p2 + 2 * p3 * p3 - 2 * p3 * (p1 * np.cos(th) + p2 * np.sin(th))
    j = int(np.argmin(vals))
    h = 2.0 * math.pi / points
    res = minimize_scalar(lambda t: f_tilde(phi, t), bounds=(th[j] - h, th[j] + h), method="bounded",
                          options={"xatol": 1e-12})
    return min(float(vals[j]), float(res.fun))


def endi_clf_closed_form(count=1000, tol=1e-6, fd_step=1e-6):
    """Closed-form ``v_tilde`` against the refined grid, and ``grad_f_tilde`` against FD."""
    rng = np.random.default_rng(25)
    worst_v, worst_g = 0.0, 0.0
    eye = np.eye(3)
    for _ in range(count):
        phi = rng.uniform(-1.15, 1.15, size=3)
        worst_v = max(worst_v, abs(v_tilde(phi) - f_tilde_grid_min(phi)))
        theta = rng.uniform(0.0, 2.0 * math.pi)
        fd = np.array([(f_tilde(phi + fd_step * e, theta) - f_tilde(phi - fd_step * e, theta)) / (2 * fd_step)
                       for e in eye])
        worst_g = max(worst_g, float(np.max(np.abs(fd - grad_f_tilde(phi, theta)))))
    return worst_v <= tol and worst_g <= tol, f"max |v - grid| {worst_v:.3g}, max |grad - fd| {worst_g:.3g}"


SUITE = [
    ("lemma1_localization", lambda **kw: lemma1_localization(count=200)),
    ("lemma2_sandwich", lambda **kw: lemma2_sandwich(count_abs=200, count_endi=20)),
    ("prox_inequality", lambda corrupt_zeta=False: prox_inequality(count=200, corrupt_zeta=corrupt_zeta)),
    ("dini_surrogate", lambda **kw: dini_surrogate(count=200)),
    ("decay_audit_1d", lambda **kw: decay_audit_1d()),
    ("endi_clf_closed_form", lambda **kw: endi_clf_closed_form()),
]


def run_suite(corrupt_zeta=False, stream=None):
    """Run every check, print a pass/fail table and return True iff all pass."""
    import sys

    stream = stream or sys.stdout
    results = []
    for name, fn in SUITE:
        t0 = time.perf_counter()
        ok, detail = fn(corrupt_zeta=corrupt_zeta)
        results.append(CheckResult(name, bool(ok), detail, time.perf_counter() - t0))
    width = max(len(r.name) for r in results)
    for r in results:
        print(f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL'}  {r.seconds:6.1f}s  {r.detail}", file=stream)
    passed = all(r.passed for r in results)
    print(f"{sum(r.passed for r in results)}/{len(results)} checks passed", file=stream)
    return passed
