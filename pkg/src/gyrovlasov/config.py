"""Run configuration: sectioned ``key = value`` files, validation and presets.

Recognized sections and keys (all optional, defaults shown by ``RunConfig()``)::

    [physics]     omega_c, epsilon, delta
    [initial]     kind, center_x, center_v, radius_x, radius_v, total_mass,
                  n_per_dim, jitter, seed
                  kind = explicit takes positions, velocities, weights instead
    [integrator]  scheme, dt, midpoint_tol, midpoint_max_iters
    [split]       dt, substeps_per_cyclotron_period, field
    [run]         t_end, snapshot_every, output_dir
    [compare]     eps

Vectors are written ``a, b``; marker lists ``x1 x2; x1 x2; ...``.
Unknown sections or keys and malformed values raise :class:`ConfigError`.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .core import Ensemble, Frame, PhysicalParams
from .epsilon_model import SplitStepConfig
from .limit_model import IntegratorConfig, Scheme
from .sampling import ICKind, InitialCondition, sample_lab


class ConfigError(ValueError):
    """A configuration value is missing, malformed or violates an invariant."""


@dataclass(frozen=True)
class ExplicitMarkers:
    """Lab-frame markers given verbatim in the configuration."""

    positions: np.ndarray
    velocities: np.ndarray
    weights: np.ndarray


@dataclass(frozen=True)
class RunConfig:
    params: PhysicalParams = field(default_factory=lambda: PhysicalParams(1.0, 0.1, 1e-3))
    ic: InitialCondition | ExplicitMarkers = field(default_factory=InitialCondition)
    n_per_dim: int = 3
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    split: SplitStepConfig = field(default_factory=SplitStepConfig)
    t_end: float = 1.0
    snapshot_every: float = 0.1
    seed: int = 0
    jitter: bool = False
    output_dir: Path = Path("out")
    eps_list: tuple = (0.1, 0.05, 0.025)

    def __post_init__(self):
        if self.n_per_dim < 2:
            raise ConfigError("initial.n_per_dim must be at least 2")
        if not (np.isfinite(self.t_end) and self.t_end > 0):
            raise ConfigError("run.t_end must be positive")
        if not (np.isfinite(self.snapshot_every) and self.snapshot_every > 0):
            raise ConfigError("run.snapshot_every must be positive")
        eps = np.asarray(self.eps_list, dtype=np.float64)
        if eps.size == 0 or np.any(eps <= 0) or np.any(np.diff(eps) >= 0):
            raise ConfigError("compare.eps must be positive and strictly decreasing")


_SCHEMA = {
    "physics": {"omega_c", "epsilon", "delta"},
    "initial": {"kind", "center_x", "center_v", "radius_x", "radius_v", "total_mass",
                "n_per_dim", "jitter", "seed", "positions", "velocities", "weights"},
    "integrator": {"scheme", "dt", "midpoint_tol", "midpoint_max_iters"},
    "split": {"dt", "substeps_per_cyclotron_period", "field"},
    "run": {"t_end", "snapshot_every", "output_dir"},
    "compare": {"eps"},
}


def _float(sec, key, default):
    raw = sec.get(key)
    if raw is None:
        return default
    try:
        val = float(raw)
    except ValueError:
        raise ConfigError(f"[{sec.name}] {key}: expected a number, got {raw!r}") from None
    if not np.isfinite(val):
        raise ConfigError(f"[{sec.name}] {key}: must be finite")
    return val


def _int(sec, key, default):
    raw = sec.get(key)
    if raw is None:
        return default
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"[{sec.name}] {key}: expected an integer, got {raw!r}") from None


def _bool(sec, key, default):
    if sec.get(key) is None:
        return default
    try:
        return sec.getboolean(key)
    except ValueError:
        raise ConfigError(f"[{sec.name}] {key}: expected true/false, got {sec[key]!r}") from None


def _floats(sec, key, default, sep=","):
    raw = sec.get(key)
    if raw is None:
        return default
    try:
        vals = tuple(float(p) for p in raw.replace(";", sep).split(sep) if p.strip())
    except ValueError:
        raise ConfigError(f"[{sec.name}] {key}: expected numbers, got {raw!r}") from None
    if not all(np.isfinite(vals)):
        raise ConfigError(f"[{sec.name}] {key}: must be finite")
    return vals


def _vec(sec, key, default):
    vals = _floats(sec, key, None)
    if vals is None:
        return default
    if len(vals) != 2:
        raise ConfigError(f"[{sec.name}] {key}: expected two components")
    return vals


def _rows(sec, key):
    raw = sec.get(key)
    if raw is None:
        raise ConfigError(f"[{sec.name}] {key} is required for kind = explicit")
    try:
        rows = [[float(c) for c in r.replace(",", " ").split()] for r in raw.split(";") if r.strip()]
        arr = np.array(rows, dtype=np.float64)
    except ValueError:
        raise ConfigError(f"[{sec.name}] {key}: malformed marker list") from None
    if arr.ndim != 2 or arr.shape[1] != 2 or not np.isfinite(arr).all():
        raise ConfigError(f"[{sec.name}] {key}: expected 'x1 x2; x1 x2; ...'")
    return arr


def _build(cp: configparser.ConfigParser, base_dir: Path) -> RunConfig:
    for name in cp.sections():
        if name not in _SCHEMA:
            raise ConfigError(f"unknown section [{name}]")
        unknown = set(cp[name]) - _SCHEMA[name]
        if unknown:
            raise ConfigError(f"[{name}]: unknown key(s) {', '.join(sorted(unknown))}")
    for name in _SCHEMA:
        if not cp.has_section(name):
            cp.add_section(name)
    defaults = RunConfig()
    ph, ini, it, sp, run, cmp_ = (cp[s] for s in _SCHEMA)
    try:
        params = PhysicalParams(_float(ph, "omega_c", defaults.params.omega_c),
                                _float(ph, "epsilon", defaults.params.epsilon),
                                _float(ph, "delta", defaults.params.delta))
        kind = ini.get("kind", ICKind.GAUSSIAN_BUMP.value).strip().lower()
        if kind == "explicit":
            pos = _rows(ini, "positions")
            vel = _rows(ini, "velocities")
            w = np.array(_floats(ini, "weights", None) or (), dtype=np.float64)
            if not (len(pos) == len(vel) == len(w)):
                raise ConfigError("[initial] positions, velocities and weights differ in length")
            if np.any(w <= 0):
                raise ConfigError("[initial] weights must be positive")
            ic = ExplicitMarkers(pos, vel, w)
        else:
            try:
                kind_enum = ICKind(kind)
            except ValueError:
                raise ConfigError(f"[initial] kind: unknown profile {kind!r}") from None
            base = InitialCondition()
            ic = InitialCondition(kind_enum,
                                  _vec(ini, "center_x", base.center_x),
                                  _vec(ini, "center_v", base.center_v),
                                  _float(ini, "radius_x", base.radius_x),
                                  _float(ini, "radius_v", base.radius_v),
                                  _float(ini, "total_mass", base.total_mass))
        base_it = defaults.integrator
        scheme = it.get("scheme", base_it.scheme.value).strip().lower()
        try:
            scheme = Scheme(scheme)
        except ValueError:
            raise ConfigError(f"[integrator] scheme: unknown scheme {scheme!r}") from None
        integrator = IntegratorConfig(scheme, _float(it, "dt", base_it.dt),
                                      _float(it, "midpoint_tol", base_it.midpoint_tol),
                                      _int(it, "midpoint_max_iters", base_it.midpoint_max_iters))
        base_sp = defaults.split
        split = SplitStepConfig(_float(sp, "dt", base_sp.dt),
                                _int(sp, "substeps_per_cyclotron_period",
                                     base_sp.substeps_per_cyclotron_period),
                                _bool(sp, "field", base_sp.field))
        out = Path(run.get("output_dir", str(defaults.output_dir)))
        if not out.is_absolute():
            out = base_dir / out
        return RunConfig(params=params, ic=ic,
                         n_per_dim=_int(ini, "n_per_dim", defaults.n_per_dim),
                         integrator=integrator, split=split,
                         t_end=_float(run, "t_end", defaults.t_end),
                         snapshot_every=_float(run, "snapshot_every", defaults.snapshot_every),
                         seed=_int(ini, "seed", defaults.seed),
                         jitter=_bool(ini, "jitter", defaults.jitter),
                         output_dir=out,
                         eps_list=_floats(cmp_, "eps", defaults.eps_list))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def parse_config(text: str, base_dir: Path | str = ".") -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed configuration: {exc}") from None
    return _build(cp, Path(base_dir))


def load_config(path: Path | str) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc.strerror or exc}") from None
    return parse_config(text, path.parent)


def sample_initial(cfg: RunConfig):
    """Lab-frame markers of the configured initial condition and their gyro-frame twin."""
    if isinstance(cfg.ic, ExplicitMarkers):
        lab = Ensemble(cfg.ic.positions, cfg.ic.velocities, cfg.ic.weights, cfg.params,
                       0.0, Frame.LAB)
    else:
        lab = sample_lab(cfg.ic, cfg.n_per_dim, cfg.params, cfg.jitter, cfg.seed)
    return lab, lab.to_gyro_frame()


PRESETS = {
    # unit-weight vortex pair at distance 1, rotation period 2 pi^2
    "two_vortex": """
[physics]
omega_c = 1
epsilon = 0.1
delta = 0
[initial]
kind = explicit
positions = 0 0; 1 0
velocities = 0 0; 0 0
weights = 1, 1
[integrator]
scheme = rk4
dt = 1e-3
[run]
t_end = 19.739208802178716
snapshot_every = 1
""",
    # 64-marker jittered Gaussian bump (seed 38 keeps 8 x 8 cells) for the conservation runs
    "gaussian_bump": """
[physics]
omega_c = 1
epsilon = 0.1
delta = 1e-3
[initial]
kind = gaussian_bump
n_per_dim = 3
jitter = true
seed = 38
[integrator]
scheme = rk4
dt = 1e-3
[run]
t_end = 10
snapshot_every = 0.1
""",
    # epsilon sweep against the limit model on the same 64 markers
    "compare": """
[physics]
omega_c = 1
epsilon = 0.1
delta = 1e-3
[initial]
kind = gaussian_bump
n_per_dim = 3
jitter = true
seed = 38
[integrator]
scheme = rk4
dt = 1e-3
[split]
dt = 1
substeps_per_cyclotron_period = 200
[run]
t_end = 1
snapshot_every = 0.1
[compare]
eps = 0.1, 0.05, 0.025
""",
}


def preset(name: str, **overrides) -> RunConfig:
    try:
        text = PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None
    cfg = parse_config(text)
    return replace(cfg, **overrides) if overrides else cfg
