"""Plant models and bounded noise generators."""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numba
import numpy as np

from .errors import ParameterError


@dataclass(frozen=True)
class Dynamics:
    """Right-hand side ``f(x, u)`` of ``dx/dt = f(x, u) + q``."""

    n: int
    m: int
    rhs: Callable
    control_affine: bool = False
    name: str = "system"
    jit_rhs: Optional[Callable] = None  # compiled twin of ``rhs`` without checks

    def __call__(self, x, u):
        return self.rhs(x, u)


def _check(vec, size, what):
    vec = np.asarray(vec, dtype=float)
    if vec.shape != (size,):
        raise ParameterError(f"{what} must have shape ({size},), got {vec.shape}")
    return vec


def endi_rhs(x, u):
    """Extended nonholonomic integrator, ``x = (phi1, phi2, phi3, eta1, eta2)``."""
    x = _check(x, 5, "ENDI state")
    u = _check(u, 2, "ENDI control")
    p1, p2, _, e1, e2 = x
    return np.array([e1, e2, p1 * e2 - e1 * p2, u[0], u[1]])


@numba.njit(cache=True)
def _endi_f(x, u):
    out = np.empty(5)
    out[0] = x[3]
    out[1] = x[4]
    out[2] = x[0] * x[4] - x[3] * x[1]
    out[3] = u[0]
    out[4] = u[1]
    return out


@numba.njit(cache=True)
def _integrator_f(x, u):
    return u.copy()


def ni_rhs(phi, omega):
    """Brockett's nonholonomic integrator ``g1(phi) w1 + g2(phi) w2``."""
    phi = _check(phi, 3, "NI state")
    omega = _check(omega, 2, "NI control")
    return np.array([omega[0], omega[1], -phi[1] * omega[0] + phi[0] * omega[1]])


def integrator_rhs(x, u):
    """Scalar single integrator ``dx/dt = u``."""
    return np.asarray(u, dtype=float).reshape(1).copy()


ENDI = Dynamics(5, 2, endi_rhs, control_affine=True, name="endi", jit_rhs=_endi_f)
NI = Dynamics(3, 2, ni_rhs, control_affine=True, name="ni")
INTEGRATOR_1D = Dynamics(1, 1, integrator_rhs, control_affine=True, name="integrator1d",
                         jit_rhs=_integrator_f)

NOISE_KINDS = ("zero", "uniform_ball", "worst_case_sine")


@dataclass
class NoiseModel:
    """Bounded noise source; ``uniform_ball`` draws from a seeded generator.

    One instance belongs to one run: the generator state advances on every
    call.
    """

    kind: str = "zero"
    bound: float = 0.0
    seed: int = 0
    _rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ParameterError(f"unknown noise kind {self.kind!r}")
        if not self.bound >= 0:
            raise ParameterError("noise bound must be >= 0")
        self._rng = np.random.default_rng(self.seed)

    def emit(self, t, n):
        return self.emit_many(np.array([t], dtype=float), n)[0]

    def emit_many(self, ts, n):
        """One vector per entry of ``ts``, shape ``(len(ts), n)``."""
        if n < 1:
            raise ParameterError("noise dimension must be >= 1")
        ts = np.asarray(ts, dtype=float)
        count = ts.size
        if self.kind == "zero" or self.bound == 0.0:
            return np.zeros((count, n))
        if self.kind == "uniform_ball":
            d = self._rng.standard_normal((count, n))
            d /= np.linalg.norm(d, axis=1, keepdims=True)
            radius = self.bound * self._rng.random(count) ** (1.0 / n)
            return radius[:, None] * d
        # worst_case_sine: a vector of norm `bound` rotating in the plane of
        # coordinates (k, k+1), k advancing every time unit.
        phase = 2.0 * np.pi * ts
        out = np.zeros((count, n))
        rows = np.arange(count)
        if n == 1:
            out[:, 0] = self.bound * np.cos(phase)
            return out
        k = np.floor(ts).astype(int) % n
        out[rows, k] = self.bound * np.cos(phase)
        out[rows, (k + 1) % n] = self.bound * np.sin(phase)
        return out


def emit_noise(model, t, n):
    """One noise vector of dimension ``n`` at time ``t``; norm never exceeds ``model.bound``."""
    return emit_noise_many(model, [t], n)[0]


def emit_noise_many(model, ts, n):
    """Noise vectors for several times at once, each clamped to ``model.bound``."""
    v = model.emit_many(ts, n)
    norm = np.linalg.norm(v, axis=1)
    over = norm > model.bound
    if np.any(over):
        # Guard against rounding in the radial draw.
        v[over] *= (model.bound / norm[over])[:, None]
    return v
