"""Plane geometry, gyro-coordinates and the particle containers.

Plane vectors are plain ``numpy`` arrays whose last axis has length 2, so
every helper here works on a single vector ``(2,)`` or a stack ``(..., 2)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Iterator, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

FloatArray = NDArray[np.float64]
Vec2 = FloatArray

_TWO_PI = 2.0 * np.pi
_ANGLE_REDUCTION_THRESHOLD = 1e8


class FrameMismatchError(ValueError):
    """An operation received an ensemble in the wrong coordinate frame."""


class Frame(enum.Enum):
    GYRO = "gyro"
    LAB = "lab"


def as_vec(v: ArrayLike, name: str = "vector") -> FloatArray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.shape[-1:] != (2,):
        raise ValueError(f"{name} must have a trailing axis of length 2, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite values")
    return arr


def perp(v: ArrayLike) -> FloatArray:
    """Return ``(v2, -v1)``, the clockwise quarter turn of ``v``."""
    v = np.asarray(v, dtype=np.float64)
    out = np.empty_like(v)
    out[..., 0] = v[..., 1]
    out[..., 1] = -v[..., 0]
    return out


def _reduce_angle(theta):
    theta = np.asarray(theta, dtype=np.float64)
    # Only huge phases are reduced; below the threshold the raw value is used.
    return np.where(np.abs(theta) > _ANGLE_REDUCTION_THRESHOLD,
                    np.remainder(theta, _TWO_PI), theta)


def rotate(theta: ArrayLike, v: ArrayLike) -> FloatArray:
    """Counter-clockwise rotation of ``v`` by ``theta`` radians.

    ``theta`` broadcasts against the leading axes of ``v``.
    """
    v = np.asarray(v, dtype=np.float64)
    theta = _reduce_angle(theta)
    c = np.cos(theta)
    s = np.sin(theta)
    out = np.empty(np.broadcast_shapes(np.shape(c) + (2,), v.shape))
    out[..., 0] = c * v[..., 0] - s * v[..., 1]
    out[..., 1] = s * v[..., 0] + c * v[..., 1]
    return out


@dataclass(frozen=True)
class PhysicalParams:
    """Physical constants of a run.

    Attributes:
        omega_c: rescaled cyclotron frequency, nonzero, either sign.
        epsilon: scale parameter of the stiff model (cyclotron period is
            ``epsilon * 2*pi/|omega_c|``).
        delta: regularization length of the logarithmic kernel.
    """

    omega_c: float = 1.0
    epsilon: float = 1.0
    delta: float = 0.0

    def __post_init__(self):
        for name in ("omega_c", "epsilon", "delta"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.omega_c == 0:
            raise ValueError("omega_c must be nonzero")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")

    @property
    def cyclotron_period(self) -> float:
        return _TWO_PI / abs(self.omega_c)

    @property
    def fast_cyclotron_period(self) -> float:
        """Period of the actual gyration in the stiff model."""
        return self.epsilon * _TWO_PI / abs(self.omega_c)

    def gyro_phase(self, t: float) -> float:
        return self.omega_c * t / self.epsilon


def to_gyro(x: ArrayLike, v: ArrayLike, params: PhysicalParams, t: float = 0.0):
    """Map lab coordinates ``(x, v)`` to ``(x + perp(v)/omega_c, R(omega_c t/eps) v)``."""
    x = np.asarray(x, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    xt = x + perp(v) / params.omega_c
    vt = rotate(params.gyro_phase(t), v)
    return xt, vt


def from_gyro(xt: ArrayLike, vt: ArrayLike, params: PhysicalParams, t: float = 0.0):
    """Inverse of :func:`to_gyro` at the same time ``t``."""
    xt = np.asarray(xt, dtype=np.float64)
    vt = np.asarray(vt, dtype=np.float64)
    v = rotate(-params.gyro_phase(t), vt)
    x = xt - perp(v) / params.omega_c
    return x, v


@dataclass(frozen=True)
class Particle:
    pos: Vec2
    vel: Vec2
    weight: float

    def __post_init__(self):
        if not self.weight > 0:
            raise ValueError("particle weight must be positive")


@dataclass
class Ensemble:
    """Weighted phase-space markers plus the parameters they evolve under.

    ``pos`` and ``vel`` are ``(N, 2)`` arrays, ``weights`` is ``(N,)``. In the
    gyro frame they hold guiding centers and rotated velocities, in the lab
    frame physical positions and velocities.
    """

    pos: FloatArray
    vel: FloatArray
    weights: FloatArray
    params: PhysicalParams
    time: float = 0.0
    frame: Frame = Frame.GYRO
    ids: NDArray[np.int64] | None = field(default=None)

    def __post_init__(self):
        self.pos = np.array(as_vec(self.pos, "pos"), dtype=np.float64, copy=True).reshape(-1, 2)
        self.vel = np.array(as_vec(self.vel, "vel"), dtype=np.float64, copy=True).reshape(-1, 2)
        self.weights = np.array(self.weights, dtype=np.float64, copy=True).reshape(-1)
        n = self.pos.shape[0]
        if self.vel.shape[0] != n or self.weights.shape[0] != n:
            raise ValueError("pos, vel and weights must describe the same number of particles")
        if not (np.isfinite(self.weights).all() and (self.weights > 0).all()):
            raise ValueError("particle weights must be positive and finite")
        self.frame = Frame(self.frame)
        if self.ids is None:
            self.ids = np.arange(n, dtype=np.int64)
        else:
            self.ids = np.asarray(self.ids, dtype=np.int64).reshape(-1)
            if self.ids.shape[0] != n:
                raise ValueError("ids must have one entry per particle")

    def __len__(self) -> int:
        return self.pos.shape[0]

    @property
    def n(self) -> int:
        return self.pos.shape[0]

    @property
    def particles(self) -> list[Particle]:
        return [Particle(p.copy(), v.copy(), float(w))
                for p, v, w in zip(self.pos, self.vel, self.weights)]

    def __iter__(self) -> Iterator[Particle]:
        return iter(self.particles)

    @classmethod
    def from_particles(cls, particles: Sequence[Particle], params: PhysicalParams,
                       time: float = 0.0, frame: Frame = Frame.GYRO) -> "Ensemble":
        if len(particles) == 0:
            return cls(np.empty((0, 2)), np.empty((0, 2)), np.empty(0), params, time, frame)
        return cls(np.array([p.pos for p in particles]), np.array([p.vel for p in particles]),
                   np.array([p.weight for p in particles]), params, time, frame)

    def with_state(self, pos, vel, time) -> "Ensemble":
        """Copy with new coordinates; weights, ids, params and frame are kept."""
        return replace(self, pos=pos, vel=vel, time=float(time))

    def require(self, frame: Frame) -> None:
        if self.frame is not frame:
            raise FrameMismatchError(f"expected an ensemble in the {frame.value} frame, "
                                     f"got {self.frame.value}")

    def to_gyro_frame(self) -> "Ensemble":
        self.require(Frame.LAB)
        xt, vt = to_gyro(self.pos, self.vel, self.params, self.time)
        return replace(self, pos=xt, vel=vt, frame=Frame.GYRO)

    def to_lab_frame(self) -> "Ensemble":
        self.require(Frame.GYRO)
        x, v = from_gyro(self.pos, self.vel, self.params, self.time)
        return replace(self, pos=x, vel=v, frame=Frame.LAB)


class TrajectoryRecord:
    """Snapshots of one run.

    ``positions`` and ``velocities`` are stacked on access into arrays of
    shape ``(n_snapshots, N, 2)``. ``rows`` holds one diagnostics mapping per
    snapshot when an observer was attached.
    """

    def __init__(self, weights, params: PhysicalParams, frame: Frame, ids=None):
        self.weights = np.asarray(weights, dtype=np.float64).copy()
        self.params = params
        self.frame = Frame(frame)
        self.ids = None if ids is None else np.asarray(ids, dtype=np.int64).copy()
        self.rows: list[dict] = []
        self._times: list[float] = []
        self._pos: list[FloatArray] = []
        self._vel: list[FloatArray] = []

    @classmethod
    def empty(cls, ens: Ensemble) -> "TrajectoryRecord":
        return cls(ens.weights, ens.params, ens.frame, ens.ids)

    @classmethod
    def from_arrays(cls, times, positions, velocities, weights, params, frame, ids=None):
        rec = cls(weights, params, frame, ids)
        for t, p, v in zip(times, positions, velocities):
            rec._times.append(float(t))
            rec._pos.append(np.array(p, dtype=np.float64))
            rec._vel.append(np.array(v, dtype=np.float64))
        return rec

    def __len__(self) -> int:
        return len(self._times)

    @property
    def times(self) -> FloatArray:
        return np.asarray(self._times, dtype=np.float64)

    @property
    def positions(self) -> FloatArray:
        return np.asarray(self._pos, dtype=np.float64).reshape(len(self._pos), -1, 2)

    @property
    def velocities(self) -> FloatArray:
        return np.asarray(self._vel, dtype=np.float64).reshape(len(self._vel), -1, 2)

    def append(self, ens: Ensemble, row: dict | None = None) -> None:
        if ens.frame is not self.frame:
            raise FrameMismatchError("snapshot frame differs from the record frame")
        self._times.append(float(ens.time))
        self._pos.append(ens.pos.copy())
        self._vel.append(ens.vel.copy())
        if row is not None:
            self.rows.append(row)

    def snapshot(self, i: int) -> Ensemble:
        return Ensemble(self._pos[i], self._vel[i], self.weights, self.params,
                        self._times[i], self.frame, self.ids)

    def final(self) -> Ensemble:
        return self.snapshot(len(self._times) - 1)


def snapshot_times(t0: float, t_end: float, every: float | None = None) -> FloatArray:
    """Snapshot times ``t0, t0 + every, ...`` closed by ``t_end``.

    Times are computed as ``t0 + i * every`` so independent runs sharing the
    schedule land on bit-identical times. A trailing gap shorter than
    ``1e-9 * every`` is merged into the final snapshot.
    """
    if t_end < t0:
        raise ValueError("t_end must not precede the start time")
    if t_end == t0:
        return np.array([t0])
    if every is None:
        return np.array([t0, t_end])
    if not every > 0:
        raise ValueError("snapshot interval must be positive")
    n = int(np.floor((t_end - t0) / every * (1 + 1e-12)))
    times = t0 + every * np.arange(n + 1)
    if t_end - times[-1] > 1e-9 * every:
        times = np.append(times, t_end)
    else:
        times[-1] = t_end
    return times


def segment_steps(a: float, b: float, dt: float) -> tuple[int, float]:
    """Smallest number of uniform steps of size at most ``dt`` spanning ``[a, b]``."""
    span = b - a
    n = max(1, int(np.ceil(span / dt * (1 - 1e-12))))
    return n, span / n
