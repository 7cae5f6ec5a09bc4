"""Effective N-particle dynamics in gyro-coordinates.

Each marker ``j`` carries a guiding center ``x_j``, a rotated velocity
``v_j`` and a weight ``w_j``. A pair ``(j, k)`` interacts through the gated
kernel: when ``|x_j - x_k| > |v_j - v_k|/|omega_c|`` it drifts ``x_j`` like a
point vortex, otherwise it turns ``v_j`` like a point vortex in velocity
space::

    V_j = -(1/omega_c) sum_k w_k perp(grad e(x_j - x_k))           [spatial branch]
    A_j =              sum_k w_k perp(grad e((v_j - v_k)/omega_c))  [velocity branch]

Both are perpendicular gradients of the potential ``phi_j = sum_k w_k E(..)``,
so every pair term is orthogonal to its separation and antisymmetric under
exchange. Mass, momentum-like first moments, the quadratic moments and the
electric energy are invariants of the particle ODE.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike

from .core import (Ensemble, FloatArray, Frame, PhysicalParams, TrajectoryRecord, perp,
                   segment_steps, snapshot_times)
from . import _direct
from .kernel import KernelDomainError
from .treecode import build_tree, fast_velocity_field  # noqa: F401  (fast drift path)

_INV_TWO_PI = 1.0 / (2.0 * np.pi)
_PAIR_BUDGET = 1 << 21


class StepFailure(RuntimeError):
    """The implicit midpoint iteration did not converge."""


class Scheme(enum.Enum):
    RK4 = "rk4"
    IMPLICIT_MIDPOINT = "implicit_midpoint"


@dataclass(frozen=True)
class IntegratorConfig:
    """Time stepping of the limit model.

    With ``locate_crossings`` every step runs on a frozen branch pattern and
    stops at gate crossings, located to a relative ``1e-12`` of the step.
    ``max_crossings_per_step`` caps the number of crossing searches per step
    (``None``: ``64 + 8 N``); once spent, the step is accepted and re-gated.
    """

    scheme: Scheme = Scheme.RK4
    dt: float = 1e-3
    midpoint_tol: float = 1e-13
    midpoint_max_iters: int = 50
    locate_crossings: bool = True
    max_crossings_per_step: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ValueError("dt must be positive")
        if not self.midpoint_tol > 0:
            raise ValueError("midpoint_tol must be positive")
        if self.midpoint_max_iters < 1:
            raise ValueError("midpoint_max_iters must be at least 1")
        if self.max_crossings_per_step is not None and self.max_crossings_per_step < 0:
            raise ValueError("max_crossings_per_step must be nonnegative")


@dataclass(frozen=True)
class FieldSample:
    """Effective drift ``velocity`` and ``acceleration`` at one or more phase points."""

    velocity: FloatArray
    acceleration: FloatArray


def _chunks(m: int, n: int):
    step = max(1, _PAIR_BUDGET // max(n, 1))
    for start in range(0, m, step):
        yield slice(start, min(m, start + step))


def _pair_geometry(xq, vq, pos, vel, omega_c, delta, self_index=None):
    """Separations, squared norms and branch masks for targets vs. sources.

    ``self_index[i]`` names the source skipped for target ``i``; ``-1`` skips none.
    """
    dx = xq[:, None, :] - pos[None, :, :]
    dv = vq[:, None, :] - vel[None, :, :]
    rx2 = dx[..., 0] ** 2 + dx[..., 1] ** 2
    rv2 = dv[..., 0] ** 2 + dv[..., 1] ** 2
    active = np.ones(rx2.shape, dtype=bool)
    if self_index is not None:
        rows = np.nonzero(self_index >= 0)[0]
        active[rows, self_index[rows]] = False
    if delta == 0 and np.any(active & (rx2 == 0) & (rv2 == 0)):
        raise KernelDomainError("two markers coincide in phase space and delta = 0")
    far = active & (omega_c * omega_c * rx2 > rv2)
    near = active & ~far
    return dx, dv, rx2, rv2, far, near


def _coincident_index(xq, vq, pos, vel):
    """Index of the stored marker equal to each query point, or -1."""
    idx = np.full(len(xq), -1, dtype=np.int64)
    for s in _chunks(len(xq), len(pos)):
        hit = (np.all(xq[s, None, :] == pos[None], axis=-1)
               & np.all(vq[s, None, :] == vel[None], axis=-1))
        rows, cols = np.nonzero(hit)
        idx[s.start + rows] = cols
    return idx


def _fields_arrays(xq, vq, pos, vel, weights, params: PhysicalParams, self_index=None):
    wc = params.omega_c
    d2 = params.delta ** 2
    m = len(xq)
    gx = np.zeros((m, 2))
    gv = np.zeros((m, 2))
    for s in _chunks(m, len(pos)):
        si = None if self_index is None else self_index[s]
        dx, dv, rx2, rv2, far, near = _pair_geometry(xq[s], vq[s], pos, vel, wc,
                                                    params.delta, si)
        cx = np.where(far, weights / np.where(far, rx2 + d2, 1.0), 0.0)
        cv = np.where(near, weights / np.where(near, rv2 / (wc * wc) + d2, 1.0), 0.0)
        # gx = sum_k w_k grad e(dx),  gv = sum_k w_k grad e(dv/wc)
        gx[s] = -_INV_TWO_PI * np.einsum("ij,ijk->ik", cx, dx)
        gv[s] = -_INV_TWO_PI * np.einsum("ij,ijk->ik", cv, dv) / wc
    return -perp(gx) / wc, perp(gv)


def ensemble_fields(ens: Ensemble) -> FieldSample:
    """Drift and acceleration of every marker, self-interaction excluded."""
    ens.require(Frame.GYRO)
    return _marker_fields(ens.pos, ens.vel, ens.weights, ens.params)


def _marker_fields(pos, vel, weights, params) -> FieldSample:
    V, A, ok = _direct.marker_fields(pos, vel, weights, float(params.omega_c), float(params.delta))
    if not ok:
        raise KernelDomainError("two markers coincide in phase space and delta = 0")
    return FieldSample(V, A)


def velocity_field(ens: Ensemble, j: int | None = None) -> FloatArray:
    """Effective drift of marker ``j`` (all markers when ``j`` is None)."""
    ens.require(Frame.GYRO)
    if j is None:
        return ensemble_fields(ens).velocity
    V, _ = _fields_arrays(ens.pos[j:j + 1], ens.vel[j:j + 1], ens.pos, ens.vel,
                          ens.weights, ens.params, np.array([j]))
    return V[0]


def acceleration_field(ens: Ensemble, j: int | None = None) -> FloatArray:
    """Effective acceleration of marker ``j`` (all markers when ``j`` is None)."""
    ens.require(Frame.GYRO)
    if j is None:
        return ensemble_fields(ens).acceleration
    _, A = _fields_arrays(ens.pos[j:j + 1], ens.vel[j:j + 1], ens.pos, ens.vel,
                          ens.weights, ens.params, np.array([j]))
    return A[0]


def field_at(ens: Ensemble, xt: ArrayLike, vt: ArrayLike) -> FieldSample:
    """Fields at arbitrary phase points.

    A query that coincides exactly with a stored marker skips that marker.
    """
    ens.require(Frame.GYRO)
    xq = np.atleast_2d(np.asarray(xt, dtype=np.float64))
    vq = np.atleast_2d(np.asarray(vt, dtype=np.float64))
    idx = _coincident_index(xq, vq, ens.pos, ens.vel)
    V, A = _fields_arrays(xq, vq, ens.pos, ens.vel, ens.weights, ens.params, idx)
    if np.ndim(xt) == 1:
        return FieldSample(V[0], A[0])
    return FieldSample(V, A)


def potential_tilde(ens: Ensemble, xt: ArrayLike, vt: ArrayLike):
    """Averaged potential ``sum_k w_k E(xt - x_k, vt - v_k)``.

    Markers sitting exactly at the query point are left out of the sum.
    """
    ens.require(Frame.GYRO)
    scalar = np.ndim(xt) == 1
    xq = np.atleast_2d(np.asarray(xt, dtype=np.float64))
    vq = np.atleast_2d(np.asarray(vt, dtype=np.float64))
    idx = _coincident_index(xq, vq, ens.pos, ens.vel)
    out = np.zeros(len(xq))
    p = ens.params
    wc2 = p.omega_c ** 2
    for s in _chunks(len(xq), ens.n):
        _, _, rx2, rv2, far, near = _pair_geometry(xq[s], vq[s], ens.pos, ens.vel, p.omega_c,
                                                   p.delta, idx[s])
        r2 = np.where(far, rx2, rv2 / wc2) + p.delta ** 2
        terms = np.where(far | near, -0.5 * _INV_TWO_PI * np.log(np.where(far | near, r2, 1.0)), 0.0)
        out[s] = terms @ ens.weights
    return float(out[0]) if scalar else out


# ---------------------------------------------------------------- stepping
#
# The fields jump whenever a pair crosses its gate surface
# omega_c^2 |x_j - x_k|^2 = |v_j - v_k|^2. A step therefore runs with the
# branch of every pair frozen at its start; if some pair ends the step on the
# other side, the crossing time is located by root finding on that pair's
# switching function, the step is cut there, the pair's branch is flipped and
# the remainder of the step continues from the crossing.

_EVENT_RTOL = 1e-12


def _frozen_rhs(pos, vel, weights, params, far):
    V, A, ok = _direct.marker_fields_frozen(pos, vel, weights, float(params.omega_c),
                                            float(params.delta), far)
    if not ok:
        raise KernelDomainError("two markers coincide in phase space and delta = 0")
    return V, A


def _rk4(pos, vel, weights, params, far, dt):
    k1x, k1v = _frozen_rhs(pos, vel, weights, params, far)
    k2x, k2v = _frozen_rhs(pos + 0.5 * dt * k1x, vel + 0.5 * dt * k1v, weights, params, far)
    k3x, k3v = _frozen_rhs(pos + 0.5 * dt * k2x, vel + 0.5 * dt * k2v, weights, params, far)
    k4x, k4v = _frozen_rhs(pos + dt * k3x, vel + dt * k3v, weights, params, far)
    pos = pos + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
    vel = vel + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
    return pos, vel


def _make_midpoint(tol, max_iters):
    def _implicit_midpoint(pos, vel, weights, params, far, dt):
        kx, kv = _frozen_rhs(pos, vel, weights, params, far)
        for _ in range(max_iters):
            nx, nv = _frozen_rhs(pos + 0.5 * dt * kx, vel + 0.5 * dt * kv, weights, params, far)
            change = dt * max(np.max(np.abs(nx - kx), initial=0.0),
                              np.max(np.abs(nv - kv), initial=0.0))
            kx, kv = nx, nv
            if change <= tol:
                return pos + dt * kx, vel + dt * kv
        raise StepFailure(f"implicit midpoint did not reach tol={tol:g} "
                          f"in {max_iters} iterations")
    return _implicit_midpoint


def _flipped(pos, vel, omega_c, far):
    return np.argwhere(np.triu(_direct.gate_pattern(pos, vel, omega_c) != far, 1))


def _switch(pos, vel, omega_c, pair):
    return _direct.switching(pos, vel, omega_c, int(pair[0]), int(pair[1]))


def _locate_crossing(advance, pos, vel, far, omega_c, hi, state_hi, flips, tol):
    """Earliest time in ``(0, hi]`` at which some pair leaves its frozen branch.

    Returns ``(tau, pos_tau, vel_tau, pairs)`` with ``tau`` just past the
    crossing (within ``tol``) and ``pairs`` the pairs flipped at ``tau``.
    """
    lo, state_lo = 0.0, (pos, vel)
    while True:
        s_lo = np.array([_switch(*state_lo, omega_c, p) for p in flips])
        s_hi = np.array([_switch(*state_hi, omega_c, p) for p in flips])
        is_far = far[flips[:, 0], flips[:, 1]]
        side = np.where(is_far, 1.0, -1.0)
        # a pair already past its surface at ``lo`` (same tie rule as the
        # gate: s = 0 belongs to the velocity branch) crosses right there
        on_surface = np.where(is_far, s_lo <= 0, s_lo > 0)
        if np.any(on_surface):
            return lo, state_lo[0], state_lo[1], flips[on_surface]
        frac = s_lo / (s_lo - s_hi)
        i = int(np.argmin(frac))
        p, sgn, p_far = flips[i], side[i], bool(is_far[i])

        def f(state):
            return sgn * _switch(*state, omega_c, p)

        def crossed(val):
            # must agree with the gate: far pairs cross at s <= 0, others at s > 0
            return val <= 0 if p_far else val < 0

        # Illinois iteration on the chosen pair's switching function
        a, fa, sa = lo, f(state_lo), state_lo
        b, fb, sb = hi, f(state_hi), state_hi
        last = 0
        while b - a > tol:
            c = b - fb * (b - a) / (fb - fa) if fb != fa else 0.5 * (a + b)
            if not (a < c < b):
                c = 0.5 * (a + b)
            sc = advance(c)
            fc = f(sc)
            if not crossed(fc):
                a, fa, sa = c, fc, sc
                if last == -1:
                    fb *= 0.5
                last = -1
            else:
                b, fb, sb = c, fc, sc
                if last == 1:
                    fa *= 0.5
                last = 1
        early = _flipped(*sa, omega_c, far)
        if len(early) and a > lo:
            # another pair crossed before this one; search the shorter bracket
            hi, state_hi, flips = a, sa, early
            continue
        at_b = _flipped(*sb, omega_c, far)
        return b, sb[0], sb[1], at_b


def _advance_with_events(pos, vel, weights, params, far, dt, stepper, max_events):
    wc = float(params.omega_c)
    remaining = dt
    tol = _EVENT_RTOL * dt
    n_events = 0
    n_locates = 0
    while True:
        trial = stepper(pos, vel, weights, params, far, remaining)
        flips = _flipped(*trial, wc, far)
        if len(flips) == 0:
            return trial[0], trial[1], far, n_events
        if n_locates >= max_events:
            # budget spent: accept the step and re-gate from its end point
            return trial[0], trial[1], _direct.gate_pattern(*trial, wc), n_events

        def advance(tau):
            return stepper(pos, vel, weights, params, far, tau)

        tau, pos, vel, pairs = _locate_crossing(advance, pos, vel, far, wc, remaining,
                                                trial, flips, tol)
        far = far.copy()
        far[pairs[:, 0], pairs[:, 1]] = ~far[pairs[:, 0], pairs[:, 1]]
        n_events += len(pairs)
        n_locates += 1
        remaining -= tau
        if remaining <= tol:
            return pos, vel, far, n_events


def _plain_step(pos, vel, weights, params, dt, stepper):
    far = _direct.gate_pattern(pos, vel, float(params.omega_c))
    return stepper(pos, vel, weights, params, far, dt)


def _stepper(cfg: IntegratorConfig):
    if cfg.scheme is Scheme.RK4:
        return _rk4
    return _make_midpoint(cfg.midpoint_tol, cfg.midpoint_max_iters)


class LimitStepper:
    """Stateful stepping of one ensemble, carrying the per-pair branch pattern."""

    def __init__(self, cfg: IntegratorConfig, ens: Ensemble):
        ens.require(Frame.GYRO)
        self.cfg = cfg
        self.params = ens.params
        self.weights = ens.weights
        self._step = _stepper(cfg)
        self.far = _direct.gate_pattern(ens.pos, ens.vel, float(ens.params.omega_c))
        self.n_events = 0

    def advance(self, ens: Ensemble, dt: float) -> Ensemble:
        if not self.cfg.locate_crossings:
            pos, vel = _plain_step(ens.pos, ens.vel, self.weights, self.params, dt, self._step)
        else:
            max_events = self.cfg.max_crossings_per_step
            if max_events is None:
                max_events = 64 + 8 * len(self.weights)
            pos, vel, self.far, k = _advance_with_events(ens.pos, ens.vel, self.weights,
                                                         self.params, self.far, dt,
                                                         self._step, max_events)
            self.n_events += k
        return ens.with_state(pos, vel, ens.time + dt)


def step(ens: Ensemble, cfg: IntegratorConfig, dt: float | None = None) -> Ensemble:
    """Advance every marker by one step under the self-consistent fields."""
    h = cfg.dt if dt is None else dt
    return LimitStepper(cfg, ens).advance(ens, h)


Observer = Callable[[Ensemble], dict]


def integrate(ens: Ensemble, cfg: IntegratorConfig, t_end: float,
              observer: Observer | None = None,
              snapshot_every: float | None = None) -> TrajectoryRecord:
    """Step from ``ens.time`` to ``t_end`` and record snapshots.

    Snapshots (and observer rows) are taken at ``ens.time``, every
    ``snapshot_every`` time units and at ``t_end``; without ``snapshot_every``
    only the first and last states are kept. Each interval between snapshots
    is covered by uniform steps no longer than ``cfg.dt``.
    """
    ens.require(Frame.GYRO)
    times = snapshot_times(ens.time, t_end, snapshot_every)
    record = TrajectoryRecord.empty(ens)
    record.append(ens, observer(ens) if observer else None)
    stepper = LimitStepper(cfg, ens)
    for a, b in zip(times[:-1], times[1:]):
        n, h = segment_steps(a, b, cfg.dt)
        for i in range(1, n + 1):
            ens = stepper.advance(ens, h)
            ens.time = b if i == n else a + i * h
        record.append(ens, observer(ens) if observer else None)
    record.n_crossings = stepper.n_events
    return record
