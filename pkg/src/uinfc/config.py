"""Flat ``key = value`` run configuration.

Lines are ``dotted.key = value``; ``#`` starts a comment. Lists are comma
separated. See ``configs/README.md`` in the repository for the full schema.
"""

import math
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .bounds import EstimationConfig
from .clf import BoxSet, abs_clf
from .controller import UinfcParams
from .endi import ThetaGrid, make_endi_clf
from .errors import ConfigurationError, UinfcError
from .sim import ShRunConfig
from .systems import ENDI, INTEGRATOR_1D, NOISE_KINDS, NoiseModel

SYSTEMS = {"endi": ENDI, "integrator1d": INTEGRATOR_1D}
REQUIRED = ("system", "controller.alpha", "input.lower", "input.upper", "sim.delta",
            "sim.horizon", "sim.x0", "sim.r", "sim.R")
DEFAULTS = {
    "controller.eps": "0",
    "controller.eta": "0",
    "controller.chi": "1e-6",
    "controller.seed": "0",
    "controller.lattice": "3",
    "sim.substeps": "10",
    "sim.audit_stride": "10",
    "sim.audit_grid_step": "1e-3",
    "sim.t_max": "inf",
    "noise.meas.kind": "zero",
    "noise.meas.bound": "0",
    "noise.meas.seed": "1",
    "noise.dist.kind": "zero",
    "noise.dist.bound": "0",
    "noise.dist.seed": "2",
    "bounds.samples": "2000",
    "bounds.lipschitz_safety": "1.25",
    "bounds.sup_safety": "1.1",
    "bounds.inf_safety": "0.8",
    "bounds.seed": "0",
}
KNOWN = set(REQUIRED) | set(DEFAULTS) | {
    "clf.kind", "clf.working_radius", "clf.theta_points", "clf.refinement_iters",
    "clf.decay_gain", "clf.decay_cap", "clf.c1", "clf.c2", "sim.core_level",
    "bounds.R", "bounds.r",
}


class Config(dict):
    """Raw string values keyed by dotted name, with source line numbers."""

    def __init__(self, values=None, lines=None, source="<string>"):
        super().__init__(values or {})
        self.lines = dict(lines or {})
        self.source = source

    def _where(self, key):
        line = self.lines.get(key)
        return f"{self.source}:{line}: " if line else f"{self.source}: "

    def raw(self, key):
        if key in self:
            return self[key]
        if key in DEFAULTS:
            return DEFAULTS[key]
        raise ConfigurationError(f"{self.source}: missing required field '{key}'")

    def get_float(self, key):
        text = self.raw(key)
        try:
            val = float(text)
        except ValueError:
            raise ConfigurationError(f"{self._where(key)}field '{key}': expected a number, got {text!r}")
        if math.isnan(val):
            raise ConfigurationError(f"{self._where(key)}field '{key}': NaN is not allowed")
        return val

    def get_int(self, key):
        val = self.get_float(key)
        if not val.is_integer():
            raise ConfigurationError(f"{self._where(key)}field '{key}': expected an integer")
        return int(val)

    def get_list(self, key):
        text = self.raw(key)
        try:
            return [float(v) for v in text.split(",") if v.strip()]
        except ValueError:
            raise ConfigurationError(f"{self._where(key)}field '{key}': expected comma-separated numbers")

    def opt_float(self, key):
        return self.get_float(key) if key in self else None


def parse_config(text, source="<string>"):
    """Parse configuration text into a :class:`Config`."""
    values, lines = {}, {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if not sep or not key:
            raise ConfigurationError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        if key not in KNOWN:
            raise ConfigurationError(f"{source}:{lineno}: unknown field '{key}'")
        if key in values:
            raise ConfigurationError(f"{source}:{lineno}: duplicate field '{key}'")
        values[key], lines[key] = val, lineno
    for key in REQUIRED:
        if key not in values:
            raise ConfigurationError(f"{source}: missing required field '{key}'")
    return Config(values, lines, source)


def load_config(path):
    with open(path) as fh:
        return parse_config(fh.read(), source=str(path))


def apply_seed_override(cfg, env=None):
    """``UINFC_SEED=s`` sets the controller seed to ``s`` and the noise seeds to ``s+1``, ``s+2``."""
    env = os.environ if env is None else env
    text = env.get("UINFC_SEED")
    if text is None or text == "":
        return cfg
    try:
        s = int(text)
    except ValueError:
        raise ConfigurationError(f"UINFC_SEED must be an integer, got {text!r}")
    out = Config(cfg, cfg.lines, cfg.source)
    out["controller.seed"] = str(s)
    out["noise.meas.seed"] = str(s + 1)
    out["noise.dist.seed"] = str(s + 2)
    out["bounds.seed"] = str(s)
    return out


def _noise(cfg, which):
    kind = cfg.raw(f"noise.{which}.kind")
    if kind not in NOISE_KINDS:
        raise ConfigurationError(f"field 'noise.{which}.kind': unknown kind {kind!r}")
    return NoiseModel(kind, cfg.get_float(f"noise.{which}.bound"), cfg.get_int(f"noise.{which}.seed"))


def build_clf(cfg):
    system = cfg.raw("system")
    kind = cfg.get("clf.kind", "endi" if system == "endi" else "abs")
    if kind == "endi":
        grid = ThetaGrid.uniform(int(cfg.get_float("clf.theta_points")) if "clf.theta_points" in cfg else 64,
                                 cfg.get_int("clf.refinement_iters") if "clf.refinement_iters" in cfg else 40)
        gains = None
        if "clf.c1" in cfg and "clf.c2" in cfg:
            gains = (cfg.get_float("clf.c1"), cfg.get_float("clf.c2"))
        return make_endi_clf(
            working_radius=cfg.opt_float("clf.working_radius") or 1.15, grid=grid,
            box=build_box(cfg), decay_gain=cfg.opt_float("clf.decay_gain"), envelope_gains=gains,
        )
    if kind == "abs":
        return abs_clf(
            working_radius=cfg.opt_float("clf.working_radius") or 2.0,
            decay_gain=cfg.opt_float("clf.decay_gain") or 0.5,
            decay_cap=cfg.opt_float("clf.decay_cap"),
        )
    raise ConfigurationError(f"field 'clf.kind': unknown CLF {kind!r}")


def build_box(cfg):
    try:
        return BoxSet(cfg.get_list("input.lower"), cfg.get_list("input.upper"))
    except UinfcError as exc:
        raise ConfigurationError(f"fields 'input.lower'/'input.upper': {exc}")


@dataclass
class RunSetup:
    run: ShRunConfig
    t_max: float
    estimation: EstimationConfig
    bounds_R: float
    bounds_r: float


def build_run(cfg, clf=None):
    """Turn a parsed configuration into a :class:`RunSetup`."""
    system = cfg.raw("system")
    if system not in SYSTEMS:
        raise ConfigurationError(f"field 'system': unknown system {system!r}")
    dyn = SYSTEMS[system]
    box = build_box(cfg)
    try:
        params = UinfcParams(
            alpha=cfg.get_float("controller.alpha"), eps_target=cfg.get_float("controller.eps"),
            eta_target=cfg.get_float("controller.eta"), chi=cfg.get_float("controller.chi"),
            input_set=box, seed=cfg.get_int("controller.seed"), lattice=cfg.get_int("controller.lattice"),
        )
        clf = clf if clf is not None else build_clf(cfg)
        run = ShRunConfig(
            dyn=dyn, clf=clf, params=params, delta=cfg.get_float("sim.delta"),
            horizon_samples=cfg.get_int("sim.horizon"), x0=np.array(cfg.get_list("sim.x0")),
            meas_noise=_noise(cfg, "meas"), dist_noise=_noise(cfg, "dist"),
            r=cfg.get_float("sim.r"), R=cfg.get_float("sim.R"), substeps=cfg.get_int("sim.substeps"),
            audit_stride=cfg.get_int("sim.audit_stride"),
            audit_grid_step=cfg.get_float("sim.audit_grid_step"),
            core_level=cfg.opt_float("sim.core_level"),
        )
        est = EstimationConfig(
            samples=cfg.get_int("bounds.samples"), lipschitz_safety=cfg.get_float("bounds.lipschitz_safety"),
            sup_safety=cfg.get_float("bounds.sup_safety"), inf_safety=cfg.get_float("bounds.inf_safety"),
            seed=cfg.get_int("bounds.seed"),
        )
    except ConfigurationError:
        raise
    except UinfcError as exc:
        raise ConfigurationError(f"{cfg.source}: {exc}")
    return RunSetup(
        run=run, t_max=cfg.get_float("sim.t_max"), estimation=est,
        bounds_R=cfg.opt_float("bounds.R") or run.R, bounds_r=cfg.opt_float("bounds.r") or run.r,
    )


SWEEP_KEYS = {
    "eps": ("controller.eps",),
    "eta": ("controller.eta",),
    "eps_and_eta": ("controller.eps", "controller.eta"),
    "e_bar": ("noise.meas.bound",),
    "q_bar": ("noise.dist.bound",),
    "e_and_q": ("noise.meas.bound", "noise.dist.bound"),
}


def with_sweep_value(cfg, parameter, value):
    """Copy of ``cfg`` with the swept field(s) set to ``value``."""
    if parameter not in SWEEP_KEYS:
        raise ConfigurationError(f"unknown sweep parameter {parameter!r}; choose from {sorted(SWEEP_KEYS)}")
    out = Config(cfg, cfg.lines, cfg.source)
    for key in SWEEP_KEYS[parameter]:
        out[key] = repr(float(value))
        if key.startswith("noise.") and out.get(key.replace("bound", "kind"), "zero") == "zero":
            out[key.replace("bound", "kind")] = "uniform_ball"
    return out


def parse_values(text):
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigurationError(f"sweep values must be comma-separated numbers, got {text!r}")
    if not vals:
        raise ConfigurationError("sweep values list is empty")
    if any(not (math.isfinite(v) and v > 0) for v in vals):
        raise ConfigurationError("sweep values must be positive and finite")
    return vals
