"""Logarithmic interaction kernel and its cyclotron-averaged version.

The plane Green's function of ``-Laplacian`` is ``e(z) = -ln|z| / (2 pi)``.
Averaging it over one gyration of a ring of radius ``|eta|/|omega_c|`` about
``xi`` gives the gated kernel

    E(xi, eta) = e(eta/omega_c)  if |xi| <= |eta|/|omega_c|
               = e(xi)           otherwise,

which :func:`gyro_kernel` evaluates in closed form and
:func:`gyro_average_oracle` recomputes by brute-force quadrature.

All functions broadcast over leading axes; vectors carry a trailing axis of
length 2. A positive ``delta`` replaces ``|z|`` by ``sqrt(|z|^2 + delta^2)``
inside ``e`` and its gradient, never inside the gate radii.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike

from .core import FloatArray, PhysicalParams, perp, rotate

_INV_TWO_PI = 1.0 / (2.0 * np.pi)


class KernelDomainError(ValueError):
    """The kernel was evaluated at its unregularized singularity."""


def _sq_norm(z: FloatArray) -> FloatArray:
    return z[..., 0] * z[..., 0] + z[..., 1] * z[..., 1]


def _check_delta(delta: float) -> None:
    if not delta >= 0:
        raise ValueError("delta must be nonnegative")


def fundamental_solution(z: ArrayLike, delta: float = 0.0):
    """``-ln(sqrt(|z|^2 + delta^2)) / (2 pi)``."""
    _check_delta(delta)
    z = np.asarray(z, dtype=np.float64)
    r2 = _sq_norm(z) + delta * delta
    if np.any(r2 == 0):
        raise KernelDomainError("e(z) is singular at z = 0 when delta = 0")
    out = -0.5 * _INV_TWO_PI * np.log(r2)
    return float(out) if np.ndim(out) == 0 else out


def grad_fundamental(z: ArrayLike, delta: float = 0.0) -> FloatArray:
    """``-z / (2 pi (|z|^2 + delta^2))``."""
    _check_delta(delta)
    z = np.asarray(z, dtype=np.float64)
    r2 = _sq_norm(z) + delta * delta
    if np.any(r2 == 0):
        raise KernelDomainError("grad e(z) is singular at z = 0 when delta = 0")
    return -_INV_TWO_PI * z / r2[..., None]


def gate_open(xi: ArrayLike, eta: ArrayLike, omega_c: float):
    """True where the spatial branch applies, ``|xi| > |eta|/|omega_c|``.

    Compared in squared form, ``omega_c^2 |xi|^2 > |eta|^2``, so the result is
    symmetric under ``xi -> -xi`` and ``eta -> -eta`` bit for bit.
    """
    xi = np.asarray(xi, dtype=np.float64)
    eta = np.asarray(eta, dtype=np.float64)
    return omega_c * omega_c * _sq_norm(xi) > _sq_norm(eta)


def _singular(xi, eta, delta):
    return delta == 0 and np.any((_sq_norm(xi) == 0) & (_sq_norm(eta) == 0))


def gyro_kernel(xi: ArrayLike, eta: ArrayLike, params: PhysicalParams):
    """Cyclotron-averaged kernel ``E(xi, eta)`` in closed form."""
    xi = np.asarray(xi, dtype=np.float64)
    eta = np.asarray(eta, dtype=np.float64)
    delta = params.delta
    if _singular(xi, eta, delta):
        raise KernelDomainError("E(xi, eta) is singular at xi = eta = 0 when delta = 0")
    far = gate_open(xi, eta, params.omega_c)
    r2_x = _sq_norm(xi)
    r2_v = _sq_norm(eta) / (params.omega_c * params.omega_c)
    r2 = np.where(far, r2_x, r2_v) + delta * delta
    out = -0.5 * _INV_TWO_PI * np.log(r2)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class KernelEval:
    value: FloatArray | float
    grad_xi: FloatArray
    grad_eta: FloatArray


def gyro_kernel_gradients(xi: ArrayLike, eta: ArrayLike, params: PhysicalParams) -> KernelEval:
    """Value of ``E`` and both gradients, using the branch formulas.

    ``grad_xi = grad e(xi)`` on the spatial branch and zero otherwise;
    ``grad_eta = grad e(eta/omega_c) / omega_c`` on the velocity branch and
    zero otherwise. On the gate circle itself the velocity branch is used.
    """
    xi = np.asarray(xi, dtype=np.float64)
    eta = np.asarray(eta, dtype=np.float64)
    wc = params.omega_c
    delta = params.delta
    value = gyro_kernel(xi, eta, params)
    far = gate_open(xi, eta, wc)
    d2 = delta * delta
    # Zero the unused branch before dividing so closed branches never see 0/0.
    r2_x = np.where(far, _sq_norm(xi) + d2, 1.0)
    u = eta / wc
    r2_v = np.where(far, 1.0, _sq_norm(u) + d2)
    grad_xi = np.where(far[..., None], -_INV_TWO_PI * xi / r2_x[..., None], 0.0)
    grad_eta = np.where(far[..., None], 0.0, -_INV_TWO_PI * u / (wc * r2_v[..., None]))
    return KernelEval(value, grad_xi, grad_eta)


def gyro_average_oracle(xi: ArrayLike, eta: ArrayLike, params: PhysicalParams,
                        n_nodes: int = 512):
    """Trapezoidal average of ``e(xi - R(theta) perp(eta)/omega_c)`` over a full turn.

    This is the defining average of ``E``, evaluated independently of the
    closed form.
    """
    if n_nodes < 8:
        raise ValueError("n_nodes must be at least 8")
    xi = np.asarray(xi, dtype=np.float64)
    eta = np.asarray(eta, dtype=np.float64)
    theta = 2.0 * np.pi * np.arange(n_nodes) / n_nodes
    ring = perp(eta) / params.omega_c                               # (..., 2)
    # (n_nodes, ..., 2)
    offsets = rotate(theta.reshape((n_nodes,) + (1,) * (ring.ndim - 1)), ring[None])
    z = xi[None] - offsets
    r2 = _sq_norm(z) + params.delta ** 2
    if params.delta == 0 and np.any(r2 < 1e-24):
        raise KernelDomainError("a quadrature node sits on the singularity of e")
    out = np.mean(-0.5 * _INV_TWO_PI * np.log(r2), axis=0)
    return float(out) if np.ndim(out) == 0 else out
