"""Runs behind the command line: model runs with output, the epsilon sweep and the kernel check."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import epsilon_model, limit_model, storage
from .config import RunConfig, sample_initial
from .core import Ensemble, PhysicalParams, TrajectoryRecord, snapshot_times
from .diagnostics import diag_row, relative_drift, trajectory_error
from .kernel import gyro_average_oracle, gyro_kernel

log = logging.getLogger(__name__)

KERNEL_OMEGAS = (1.0, -1.0, 1.7, -1.7, 3.0, -3.0)


@dataclass(frozen=True)
class RunResult:
    record: TrajectoryRecord
    drift: dict
    out_dir: Path | None


def _write_run(record: TrajectoryRecord, out_dir: Path | None) -> None:
    if out_dir is None:
        return
    out_dir.mkdir(parents=True, exist_ok=True)
    for i in range(len(record)):
        storage.write_snapshot(storage.snapshot_path(out_dir, i), record.snapshot(i))
    storage.write_diag(out_dir / "diag.csv", record.rows)


def run_limit(cfg: RunConfig, out_dir: Path | None = None) -> RunResult:
    """Integrate the limit model from the configured markers; snapshots are in gyro-coordinates."""
    _, gyro = sample_initial(cfg)
    record = limit_model.integrate(gyro, cfg.integrator, cfg.t_end, observer=diag_row,
                                   snapshot_every=cfg.snapshot_every)
    _write_run(record, out_dir)
    return RunResult(record, relative_drift(record.rows), out_dir)


def run_full(cfg: RunConfig, out_dir: Path | None = None) -> RunResult:
    """Integrate the split full model; snapshots are lab-frame, diagnostics gyro-frame."""
    lab, _ = sample_initial(cfg)
    record = epsilon_model.integrate_full(lab, cfg.split, cfg.t_end, observer=diag_row,
                                          snapshot_every=cfg.snapshot_every)
    _write_run(record, out_dir)
    return RunResult(record, relative_drift(record.rows), out_dir)


def _stationary_record(ens: Ensemble, times) -> TrajectoryRecord:
    rec = TrajectoryRecord.empty(ens)
    for t in times:
        rec.append(ens.with_state(ens.pos, ens.vel, t))
    return rec


@dataclass(frozen=True)
class CompareResult:
    eps: tuple
    errors: tuple

    @property
    def strictly_decreasing(self) -> bool:
        return bool(np.all(np.diff(self.errors) < 0))


def compare_eps(cfg: RunConfig, eps_list=None, sup: bool = False) -> CompareResult:
    """Filtered full-model runs against one limit-model run, from identical markers.

    With the electric field switched off in ``cfg.split`` the reference is
    the field-free limit, i.e. markers at rest in gyro-coordinates.
    """
    eps_list = tuple(cfg.eps_list if eps_list is None else eps_list)
    lab, gyro = sample_initial(cfg)
    if cfg.split.field:
        reference = limit_model.integrate(gyro, cfg.integrator, cfg.t_end,
                                          snapshot_every=cfg.snapshot_every)
    else:
        reference = _stationary_record(gyro, snapshot_times(0.0, cfg.t_end, cfg.snapshot_every))
    errors = []
    for eps in eps_list:
        params = replace(cfg.params, epsilon=float(eps))
        rec = epsilon_model.integrate_full(replace(lab, params=params), cfg.split, cfg.t_end,
                                           snapshot_every=cfg.snapshot_every)
        err = trajectory_error(epsilon_model.filtered_trajectory(rec), reference, sup=sup)
        log.info("eps=%g trajectory_error=%.6e", eps, err)
        errors.append(err)
    return CompareResult(eps_list, tuple(errors))


@dataclass(frozen=True)
class KernelCheck:
    n_samples: int
    max_error: float
    mean_error: float


def kernel_samples(n: int, margin: float, relative: bool, seed: int = 0):
    """Random ``(xi, eta, omega_c)`` with ``| |xi| - |eta|/|omega_c| |`` above the margin.

    Radii ``|xi|`` and ``|eta|/|omega_c|`` are uniform on ``(0, 2)``, directions
    uniform, ``omega_c`` drawn from ``KERNEL_OMEGAS``. With ``relative`` the
    margin is a fraction of the larger radius.
    """
    rng = np.random.default_rng(seed)
    xi = np.empty((0, 2))
    eta = np.empty((0, 2))
    wc = np.empty(0)
    while len(wc) < n:
        m = 2 * (n - len(wc)) + 16
        r1 = rng.uniform(0.0, 2.0, m)
        r2 = rng.uniform(0.0, 2.0, m)
        w = rng.choice(KERNEL_OMEGAS, m)
        gap = np.abs(r1 - r2)
        keep = gap > (margin * np.maximum(r1, r2) if relative else margin)
        a1, a2 = rng.uniform(0.0, 2.0 * np.pi, (2, m))
        x = r1[:, None] * np.stack([np.cos(a1), np.sin(a1)], axis=1)
        e = (np.abs(w) * r2)[:, None] * np.stack([np.cos(a2), np.sin(a2)], axis=1)
        xi = np.concatenate([xi, x[keep]])
        eta = np.concatenate([eta, e[keep]])
        wc = np.concatenate([wc, w[keep]])
    return xi[:n], eta[:n], wc[:n]


def verify_kernel(n_samples: int = 1000, n_nodes: int = 512, margin: float = 0.05,
                  relative: bool = True, seed: int = 0) -> KernelCheck:
    """Closed-form gated kernel against the circle-average quadrature at random points."""
    if n_samples <= 0:
        return KernelCheck(0, 0.0, 0.0)
    xi, eta, wc = kernel_samples(n_samples, margin, relative, seed)
    err = np.empty(n_samples)
    for w in np.unique(wc):
        sel = wc == w
        p = PhysicalParams(omega_c=float(w))
        err[sel] = np.abs(np.atleast_1d(gyro_kernel(xi[sel], eta[sel], p))
                          - np.atleast_1d(gyro_average_oracle(xi[sel], eta[sel], p, n_nodes)))
    return KernelCheck(n_samples, float(err.max()), float(err.mean()))
