"""Invariants of the limit dynamics and trajectory comparison metrics."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from . import _direct
from .core import Ensemble, FloatArray, Frame, FrameMismatchError, TrajectoryRecord, perp
from .kernel import KernelDomainError

_INV_TWO_PI = 1.0 / (2.0 * np.pi)

DIAG_COLUMNS = ("t", "mass", "mpx", "mpy", "mvx", "mvy", "possq", "velsq", "e_elec", "e_kin")


@dataclass(frozen=True)
class MomentSet:
    """Weighted sums of ``1, x, v, |x|^2, |v|^2`` over the markers."""

    mass: float
    mean_pos: FloatArray
    mean_vel: FloatArray
    pos_sq: float
    vel_sq: float


@dataclass(frozen=True)
class EnergyReport:
    electric: float
    kinetic: float


def moments(ens: Ensemble) -> MomentSet:
    if ens.n == 0:
        raise ValueError("moments of an empty ensemble are undefined")
    w = ens.weights
    return MomentSet(
        mass=float(w.sum()),
        mean_pos=w @ ens.pos,
        mean_vel=w @ ens.vel,
        pos_sq=float(w @ np.einsum("ij,ij->i", ens.pos, ens.pos)),
        vel_sq=float(w @ np.einsum("ij,ij->i", ens.vel, ens.vel)),
    )


def electric_energy(ens: Ensemble) -> float:
    """``1/2 sum_{j != k} w_j w_k E(x_j - x_k, v_j - v_k)`` with the gated kernel."""
    ens.require(Frame.GYRO)
    total, ok = _direct.pair_energy(ens.pos, ens.vel, ens.weights, float(ens.params.omega_c),
                                    float(ens.params.delta))
    if not ok:
        raise KernelDomainError("two markers coincide in phase space and delta = 0")
    return float(total)


def kinetic_energy(ens: Ensemble) -> float:
    return 0.5 * float(ens.weights @ np.einsum("ij,ij->i", ens.vel, ens.vel))


def energy(ens: Ensemble) -> EnergyReport:
    return EnergyReport(electric_energy(ens), kinetic_energy(ens))


# A test function is given through its gradients: psi(pos, vel) returns
# (grad_x psi, grad_v psi), each of shape (N, 2).
GradientPair = Callable[[FloatArray, FloatArray], tuple]


def _const(pos, vel):
    return np.zeros_like(pos), np.zeros_like(vel)


def _unit(axis, on_pos):
    def grads(pos, vel):
        g = np.zeros_like(pos)
        g[:, axis] = 1.0
        return (g, np.zeros_like(vel)) if on_pos else (np.zeros_like(pos), g)
    return grads


CONSERVED_PSI: Mapping[str, GradientPair] = {
    "1": _const,
    "x1": _unit(0, True),
    "x2": _unit(1, True),
    "v1": _unit(0, False),
    "v2": _unit(1, False),
    "pos_sq": lambda pos, vel: (2.0 * pos, np.zeros_like(vel)),
    "vel_sq": lambda pos, vel: (np.zeros_like(pos), 2.0 * vel),
}


def moment_identity_rhs(ens: Ensemble, psi: GradientPair, chunk: int = 256) -> float:
    """Pairwise-symmetrized right-hand side of the moment identity.

    Returns

        sum_{j != k} w_j w_k [ (1/omega_c)(gx_k - gx_j) . perp grad e(x_j - x_k)  [spatial]
                              + (gv_j - gv_k) . perp grad e((v_j - v_k)/omega_c)  [velocity] ]

    with ``gx, gv`` the gradients of ``psi`` at the markers. It equals
    ``2 d/dt sum_j w_j psi(x_j, v_j)`` along the particle flow.
    """
    ens.require(Frame.GYRO)
    gx, gv = (np.asarray(g, dtype=np.float64) for g in psi(ens.pos, ens.vel))
    wc = ens.params.omega_c
    d2 = ens.params.delta ** 2
    w = ens.weights
    n = ens.n
    total = 0.0
    for start in range(0, n, chunk):
        s = slice(start, min(n, start + chunk))
        dx = ens.pos[s, None, :] - ens.pos[None, :, :]
        dv = ens.vel[s, None, :] - ens.vel[None, :, :]
        rx2 = np.einsum("ijk,ijk->ij", dx, dx)
        rv2 = np.einsum("ijk,ijk->ij", dv, dv)
        other = np.ones(rx2.shape, dtype=bool)
        rows = np.arange(s.stop - s.start)
        other[rows, rows + start] = False
        if d2 == 0 and np.any(other & (rx2 == 0) & (rv2 == 0)):
            raise KernelDomainError("two markers coincide in phase space and delta = 0")
        far = other & (wc * wc * rx2 > rv2)
        near = other & ~far
        # perp grad e(z) = -perp(z) / (2 pi (|z|^2 + delta^2))
        cx = np.where(far, -_INV_TWO_PI / np.where(far, rx2 + d2, 1.0), 0.0)
        cv = np.where(near, -_INV_TWO_PI / np.where(near, rv2 / (wc * wc) + d2, 1.0), 0.0)
        px = cx[..., None] * perp(dx)
        pv = cv[..., None] * perp(dv / wc)
        tx = np.einsum("ijk,ijk->ij", gx[None, :, :] - gx[s, None, :], px) / wc
        tv = np.einsum("ijk,ijk->ij", gv[s, None, :] - gv[None, :, :], pv)
        total += float(w[s] @ (tx + tv) @ w)
    return total


def diag_row(ens: Ensemble) -> dict:
    """One diagnostics row; lab-frame ensembles are measured in gyro-coordinates."""
    g = ens if ens.frame is Frame.GYRO else ens.to_gyro_frame()
    m = moments(g)
    return {
        "t": float(ens.time), "mass": m.mass,
        "mpx": float(m.mean_pos[0]), "mpy": float(m.mean_pos[1]),
        "mvx": float(m.mean_vel[0]), "mvy": float(m.mean_vel[1]),
        "possq": m.pos_sq, "velsq": m.vel_sq,
        "e_elec": electric_energy(g), "e_kin": kinetic_energy(g),
    }


def relative_drift(rows: Sequence[Mapping[str, float]]) -> dict:
    """Largest deviation of each invariant from its first value, made relative.

    Quadratic moments and energies are divided by their initial magnitude.
    First moments that may start at zero are divided by the matching
    root-mean-square scale ``sqrt(mass * possq)`` or ``sqrt(mass * velsq)``.
    """
    r0 = rows[0]
    table = {k: np.array([r[k] for r in rows]) for k in DIAG_COLUMNS[1:]}
    pos_scale = np.sqrt(r0["mass"] * r0["possq"]) or 1.0
    vel_scale = np.sqrt(r0["mass"] * r0["velsq"]) or 1.0
    scale = {"mpx": pos_scale, "mpy": pos_scale, "mvx": vel_scale, "mvy": vel_scale}
    out = {}
    for k, series in table.items():
        s = scale.get(k, abs(r0[k]) or 1.0)
        out[k] = float(np.max(np.abs(series - series[0])) / s)
    return out


def _check_comparable(a: TrajectoryRecord, b: TrajectoryRecord):
    if a.frame is not Frame.GYRO or b.frame is not Frame.GYRO:
        raise FrameMismatchError("trajectory_error compares gyro-frame records only")
    if len(a) != len(b):
        raise ValueError(f"records hold {len(a)} and {len(b)} snapshots")
    if len(a) == 0:
        raise ValueError("records are empty")
    if a.positions.shape != b.positions.shape:
        raise ValueError("records carry different particle counts")
    ta, tb = a.times, b.times
    if not np.allclose(ta, tb, rtol=1e-12, atol=1e-12):
        raise ValueError("snapshot times differ between the records")


def trajectory_error(filtered: TrajectoryRecord, limit: TrajectoryRecord, sup: bool = False) -> float:
    """Largest over snapshots of the matched-marker phase-space distance.

    By default the distance is the weight-averaged root mean square of
    ``|dx|^2 + |dv|^2``; with ``sup`` it is the largest single-marker distance.
    """
    _check_comparable(filtered, limit)
    d2 = (np.sum((filtered.positions - limit.positions) ** 2, axis=-1)
          + np.sum((filtered.velocities - limit.velocities) ** 2, axis=-1))
    if sup:
        per_snap = np.sqrt(d2.max(axis=1))
    else:
        w = filtered.weights
        per_snap = np.sqrt(d2 @ w / w.sum())
    return float(per_snap.max())
