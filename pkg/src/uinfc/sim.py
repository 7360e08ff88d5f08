"""Sample-and-hold closed-loop simulation and practical-stability verdicts."""

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numba
import numpy as np

from .clf import ClfSpec, rho_V
from .controller import UinfcParams, uinfc_step
from .errors import DivergenceError, ParameterError
from .infconv import reference_envelope
from .systems import Dynamics, NoiseModel, emit_noise, emit_noise_many

DIVERGENCE_FACTOR = 1e3


@dataclass
class ShRunConfig:
    """Everything a closed-loop run needs.

    ``audit_stride`` controls how often the logged ``V_alpha`` is replaced by
    the brute-force reference envelope (0 disables it). ``core_level`` is the
    level ``v_hat`` of the case split; by default ``alpha1(r - e_bar - q_bar)``.
    """

    dyn: Dynamics
    clf: ClfSpec
    params: UinfcParams
    delta: float
    horizon_samples: int
    x0: np.ndarray
    meas_noise: NoiseModel
    dist_noise: NoiseModel
    r: float
    R: float
    substeps: int = 10
    audit_stride: int = 10
    audit_grid_step: float = 1e-3
    core_level: Optional[float] = None

    def __post_init__(self):
        self.x0 = np.asarray(self.x0, dtype=float)
        if self.x0.shape != (self.dyn.n,):
            raise ParameterError(f"x0 must have shape ({self.dyn.n},)")
        if not self.delta > 0:
            raise ParameterError("delta must be positive")
        if self.substeps < 1:
            raise ParameterError("substeps must be >= 1")
        if self.horizon_samples < 0:
            raise ParameterError("horizon_samples must be >= 0")
        if not 0 < self.r < self.R:
            raise ParameterError("radii must satisfy 0 < r < R")
        if np.linalg.norm(self.x0) > self.R:
            raise ParameterError("x0 must lie in the starting ball of radius R")
        if self.params.input_set.dim != self.dyn.m:
            raise ParameterError("input box dimension differs from the plant's")

    def v_hat(self):
        if self.core_level is not None:
            return float(self.core_level)
        r_hat = self.r - self.meas_noise.bound - self.dist_noise.bound
        return rho_V(self.clf, r_hat) if r_hat > 0 else 0.0


@dataclass
class TrajectoryLog:
    t: np.ndarray
    x: np.ndarray
    x_hat: np.ndarray
    u: np.ndarray
    eps_used: np.ndarray
    eta_used: np.ndarray
    V: np.ndarray
    V_alpha: np.ndarray
    region: list
    diverged: bool = False
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.t)

    def header(self):
        n, m = self.x.shape[1], self.u.shape[1]
        return (["k", "t"] + [f"x{i + 1}" for i in range(n)] + [f"xhat{i + 1}" for i in range(n)]
                + [f"u{j + 1}" for j in range(m)] + ["eps_used", "eta_used", "V", "V_alpha", "region"])

    def to_csv(self, path=None):
        """Write the log as CSV; returns the text when ``path`` is None."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header())
        fmt = "{:.17g}".format
        for k in range(len(self)):
            row = [str(k), fmt(self.t[k])]
            row += [fmt(v) for v in self.x[k]] + [fmt(v) for v in self.x_hat[k]]
            row += [fmt(v) for v in self.u[k]]
            row += [fmt(self.eps_used[k]), fmt(self.eta_used[k]), fmt(self.V[k]),
                    fmt(self.V_alpha[k]), self.region[k]]
            w.writerow(row)
        text = buf.getvalue()
        if path is None:
            return text
        with open(path, "w", newline="") as fh:
            fh.write(text)
        return None

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        head, body = rows[0], rows[1:]
        n = sum(1 for h in head if h.startswith("x") and not h.startswith("xhat"))
        m = sum(1 for h in head if h.startswith("u"))
        data = np.array([[float(v) for v in r[1:-1]] for r in body]).reshape(len(body), -1)
        return cls(
            t=data[:, 0], x=data[:, 1:1 + n], x_hat=data[:, 1 + n:1 + 2 * n],
            u=data[:, 1 + 2 * n:1 + 2 * n + m], eps_used=data[:, -4], eta_used=data[:, -3],
            V=data[:, -2], V_alpha=data[:, -1], region=[r[-1] for r in body],
        )


@numba.njit(cache=True)
def _rk4_hold(f, x, u, qs, h):
    for s in range(qs.shape[0]):
        q = qs[s]
        k1 = f(x, u) + q
        k2 = f(x + 0.5 * h * k1, u) + q
        k3 = f(x + 0.5 * h * k2, u) + q
        k4 = f(x + h * k3, u) + q
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return x


def _rk4(dyn, x, u, q, h):
    k1 = dyn(x, u) + q
    k2 = dyn(x + 0.5 * h * k1, u) + q
    k3 = dyn(x + 0.5 * h * k2, u) + q
    k4 = dyn(x + h * k3, u) + q
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _disturbance(model, tk, h, substeps, n):
    """Disturbance at the substep times of one sampling period.

    Random draws are held over the period so the realization does not
    depend on ``substeps``; time-driven kinds are evaluated at each substep.
    """
    if model.kind == "uniform_ball":
        return np.repeat(emit_noise_many(model, [tk], n), substeps, axis=0)
    return emit_noise_many(model, tk + h * np.arange(substeps), n)


def _sample_seed(seed, k):
    return int(np.random.SeedSequence([seed, k]).generate_state(1)[0])


def simulate(cfg):
    """Run the sampled-data closed loop for ``horizon_samples`` periods.

    Each period measures ``x_hat = x + e``, computes the held control with
    :func:`uinfc_step` (seeded per sample), and integrates
    ``dx/dt = f(x, u) + q(t)`` with fixed-step RK4, the disturbance sampled at
    substep starts (random draws held per period). The final row carries the control that would be applied
    next, so every row is fully populated.

    Raises
    ------
    DivergenceError
        When ``||x|| > 1e3 * R``; the partial log (``diverged=True``) is
        attached to the exception.
    """
    dyn, clf, p = cfg.dyn, cfg.clf, cfg.params
    n, m = dyn.n, dyn.m
    # fresh generators, so repeated calls on one config replay the same noise
    meas = NoiseModel(cfg.meas_noise.kind, cfg.meas_noise.bound, cfg.meas_noise.seed)
    dist = NoiseModel(cfg.dist_noise.kind, cfg.dist_noise.bound, cfg.dist_noise.seed)
    rows = cfg.horizon_samples + 1
    t = np.arange(rows) * cfg.delta
    xs = np.zeros((rows, n))
    xh = np.zeros((rows, n))
    us = np.zeros((rows, m))
    eps_used = np.zeros(rows)
    eta_used = np.zeros(rows)
    V = np.zeros(rows)
    Va = np.zeros(rows)
    region = []
    v_half = 0.5 * cfg.v_hat()
    h = cfg.delta / cfg.substeps
    x = cfg.x0.copy()
    warm, prev_xh = None, None
    limit = DIVERGENCE_FACTOR * cfg.R

    def partial(k):
        return TrajectoryLog(t[:k], xs[:k], xh[:k], us[:k], eps_used[:k], eta_used[:k],
                             V[:k], Va[:k], region[:k], diverged=True)

    for k in range(rows):
        tk = t[k]
        x_hat = x + emit_noise(meas, tk, n)
        if warm is not None:
            warm = warm + (x_hat - prev_xh)
        pk = replace(p, seed=_sample_seed(p.seed, k))
        u, diag = uinfc_step(clf, dyn, x_hat, pk, warm_start=warm)
        warm, prev_xh = diag.y, x_hat
        va = diag.envelope_best
        if cfg.audit_stride and k % cfg.audit_stride == 0:
            va = min(va, reference_envelope(clf, x_hat, p.alpha, cfg.audit_grid_step))
        xs[k], xh[k], us[k] = x, x_hat, u
        eps_used[k], eta_used[k] = diag.eps_achieved, diag.eta_achieved
        V[k], Va[k] = clf.value(x_hat), va
        region.append("case1" if va >= v_half else "case2")
        if k == rows - 1:
            break
        qs = _disturbance(dist, tk, h, cfg.substeps, n)
        if dyn.jit_rhs is not None:
            x = _rk4_hold(dyn.jit_rhs, x, np.asarray(u, dtype=float), qs, h)
        else:
            for s in range(cfg.substeps):
                x = _rk4(dyn, x, u, qs[s], h)
        if not np.all(np.isfinite(x)) or np.linalg.norm(x) > limit:
            raise DivergenceError(f"state norm exceeded {limit:g} after sample {k}", partial(k + 1))
    return TrajectoryLog(t, xs, xh, us, eps_used, eta_used, V, Va, region)


@dataclass(frozen=True)
class Verdict:
    kind: str  # "stable", "unstable" or "inconclusive"
    t_entry: Optional[float] = None

    @property
    def stable(self):
        return self.kind == "stable"

    def __str__(self):
        if self.kind == "stable":
            return f"stable_at({self.t_entry:.6g})"
        return self.kind


def check_practical_stability(log, r, T_max=math.inf):
    """Did the true state enter ``B_r`` by ``T_max`` and stay there?

    Entry is the first sample after which every logged state lies in the
    ball. It counts as stable only when at least 10% of the horizon remains
    after entry; otherwise the verdict is inconclusive.
    """
    if len(log) == 0:
        raise ParameterError("empty trajectory log")
    if log.diverged:
        return Verdict("unstable")
    inside = np.linalg.norm(log.x, axis=1) <= r
    if not inside[-1]:
        return Verdict("unstable")
    outside = np.flatnonzero(~inside)
    j = 0 if outside.size == 0 else int(outside[-1]) + 1
    t_entry = float(log.t[j])
    if t_entry > T_max:
        return Verdict("unstable")
    horizon = len(log) - 1
    if j > 0 and (horizon - j) < 0.1 * horizon:
        return Verdict("inconclusive", t_entry)
    return Verdict("stable", t_entry)


@dataclass
class AuditReport:
    k: np.ndarray
    delta_V: np.ndarray
    passed: np.ndarray
    threshold: float

    @property
    def count(self):
        return int(self.k.size)

    @property
    def pass_rate(self):
        return float(np.mean(self.passed)) if self.k.size else math.nan


def decay_audit(log, cfg, w_bar, grid_step=1e-3, tol=1e-8):
    """Per-sample decay check of the reference envelope along true states.

    Every consecutive pair whose first sample is in the Case-1 region is
    tested against ``V_alpha(x_{k+1}) - V_alpha(x_k) <= -(3/8) delta w_bar + tol``.
    """
    alpha = cfg.params.alpha
    threshold = -0.375 * cfg.delta * w_bar + tol
    ks = [k for k in range(len(log) - 1) if log.region[k] == "case1"]
    cache = {}

    def ref(k):
        if k not in cache:
            cache[k] = reference_envelope(cfg.clf, log.x[k], alpha, grid_step)
        return cache[k]

    dv = np.array([ref(k + 1) - ref(k) for k in ks])
    ks = np.array(ks, dtype=int)
    return AuditReport(ks, dv, dv <= threshold, threshold)
