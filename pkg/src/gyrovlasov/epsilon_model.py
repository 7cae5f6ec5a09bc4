"""The stiff epsilon-scaled particle system in lab coordinates.

Markers obey

    dX/dt = V / eps,    dV/dt = (omega_c / eps) perp(V) + E(X),

with ``E = -sum_k w_k grad e(X - X_k)``. The magnetic part is solved exactly
(a rotation of ``V`` about a fixed gyro-center) and composed with electric
kicks in a Strang splitting, so the fast gyration never limits stability.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike

from . import _direct
from .core import (Ensemble, FloatArray, Frame, FrameMismatchError, PhysicalParams,
                   TrajectoryRecord, perp, rotate, segment_steps, snapshot_times, to_gyro)
from .kernel import KernelDomainError

_INV_TWO_PI = 1.0 / (2.0 * np.pi)


@dataclass(frozen=True)
class SplitStepConfig:
    """Step control for the split full model.

    ``integrate_full`` never steps further than ``dt`` nor than
    ``fast_cyclotron_period / substeps_per_cyclotron_period``. ``field``
    switches the electric kick off, leaving free gyration (a debug mode).
    """

    dt: float = 1e-3
    substeps_per_cyclotron_period: int = 20
    field: bool = True

    def __post_init__(self):
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ValueError("dt must be positive")
        if self.substeps_per_cyclotron_period < 20:
            raise ValueError("substeps_per_cyclotron_period must be at least 20")

    def max_step(self, params: PhysicalParams) -> float:
        return min(self.dt, params.fast_cyclotron_period / self.substeps_per_cyclotron_period)


def electric_field(ens: Ensemble, x: ArrayLike) -> FloatArray:
    """``-sum_k w_k grad e(x - x_k)`` at query points.

    Markers located exactly at a query point are left out of its sum.
    """
    ens.require(Frame.LAB)
    xq = np.atleast_2d(np.asarray(x, dtype=np.float64))
    d2 = ens.params.delta ** 2
    dx = xq[:, None, :] - ens.pos[None, :, :]
    r2 = dx[..., 0] ** 2 + dx[..., 1] ** 2
    # a marker sitting exactly on the query point is that point's own marker
    coincident = r2 == 0
    c = np.where(coincident, 0.0, ens.weights / np.where(coincident, 1.0, r2 + d2))
    E = _INV_TWO_PI * np.einsum("ij,ijk->ik", c, dx)
    return E[0] if np.ndim(x) == 1 else E


def marker_electric_field(ens: Ensemble) -> FloatArray:
    """Electric field at every marker, self term excluded."""
    ens.require(Frame.LAB)
    E, ok = _direct.electric_field(ens.pos, ens.weights, float(ens.params.delta))
    if not ok:
        raise KernelDomainError("two markers coincide in space and delta = 0")
    return E


def _gyrate(pos, vel, params: PhysicalParams, dt: float):
    wc = params.omega_c
    centers = pos + perp(vel) / wc
    vel = rotate(-wc * dt / params.epsilon, vel)
    return centers - perp(vel) / wc, vel


def cyclotron_substep(ens: Ensemble, dt: float) -> Ensemble:
    """Exact magnetic flow over ``dt``: ``V`` turns by ``-omega_c dt / eps`` about a fixed gyro-center."""
    ens.require(Frame.LAB)
    pos, vel = _gyrate(ens.pos, ens.vel, ens.params, dt)
    return ens.with_state(pos, vel, ens.time + dt)


def kick_substep(ens: Ensemble, dt: float) -> Ensemble:
    """``V <- V + dt E(X)`` with positions frozen; the time is left unchanged."""
    E = marker_electric_field(ens)
    return ens.with_state(ens.pos, ens.vel + dt * E, ens.time)


def step_full(ens: Ensemble, cfg: SplitStepConfig, dt: float | None = None) -> Ensemble:
    """Strang step ``cyclotron(dt/2) . kick(dt) . cyclotron(dt/2)``."""
    ens.require(Frame.LAB)
    h = cfg.dt if dt is None else dt
    out = cyclotron_substep(ens, 0.5 * h)
    if cfg.field:
        out = kick_substep(out, h)
    out = cyclotron_substep(out, 0.5 * h)
    out.time = ens.time + h
    return out


def _strang_arrays(pos, vel, w, params, h, field):
    pos, vel = _gyrate(pos, vel, params, 0.5 * h)
    if field:
        E, ok = _direct.electric_field(pos, w, float(params.delta))
        if not ok:
            raise KernelDomainError("two markers coincide in space and delta = 0")
        vel = vel + h * E
    return _gyrate(pos, vel, params, 0.5 * h)


def integrate_full(ens: Ensemble, cfg: SplitStepConfig, t_end: float, observer=None,
                   snapshot_every: float | None = None) -> TrajectoryRecord:
    """Run the split model to ``t_end`` with the same snapshot schedule as the limit model."""
    ens.require(Frame.LAB)
    times = snapshot_times(ens.time, t_end, snapshot_every)
    record = TrajectoryRecord.empty(ens)
    record.append(ens, observer(ens) if observer else None)
    h_max = cfg.max_step(ens.params)
    pos, vel = ens.pos, ens.vel
    for a, b in zip(times[:-1], times[1:]):
        n, h = segment_steps(a, b, h_max)
        for _ in range(n):
            pos, vel = _strang_arrays(pos, vel, ens.weights, ens.params, h, cfg.field)
        ens = ens.with_state(pos, vel, b)
        record.append(ens, observer(ens) if observer else None)
    return record


def filtered_trajectory(record: TrajectoryRecord, params: PhysicalParams | None = None
                        ) -> TrajectoryRecord:
    """Map every lab snapshot to gyro-coordinates at its own time."""
    if record.frame is not Frame.LAB:
        raise FrameMismatchError("filtered_trajectory expects a lab-frame record")
    p = record.params if params is None else params
    out = TrajectoryRecord(record.weights, p, Frame.GYRO, record.ids)
    for t, x, v in zip(record.times, record.positions, record.velocities):
        xt, vt = to_gyro(x, v, p, t)
        out.append(Ensemble(xt, vt, record.weights, p, t, Frame.GYRO, record.ids))
    return out
