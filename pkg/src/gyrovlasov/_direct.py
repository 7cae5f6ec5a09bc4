"""Compiled pairwise sums over all markers of an ensemble.

Each unordered pair is visited once and its contribution is added to one
member and subtracted from the other, so the weighted sums of the fields
cancel to roundoff regardless of the summation order.
"""

import numpy as np
from numba import njit

_INV_TWO_PI = 1.0 / (2.0 * np.pi)


@njit(cache=True)
def marker_fields(pos, vel, w, omega_c, delta):
    """Return ``(V, A, ok)``; ``ok`` is False if two markers coincide with delta = 0."""
    n = pos.shape[0]
    gx = np.zeros((n, 2))
    gv = np.zeros((n, 2))
    wc2 = omega_c * omega_c
    d2 = delta * delta
    ok = True
    for j in range(n):
        xj0 = pos[j, 0]
        xj1 = pos[j, 1]
        vj0 = vel[j, 0]
        vj1 = vel[j, 1]
        for k in range(j + 1, n):
            dx0 = xj0 - pos[k, 0]
            dx1 = xj1 - pos[k, 1]
            dv0 = vj0 - vel[k, 0]
            dv1 = vj1 - vel[k, 1]
            rx2 = dx0 * dx0 + dx1 * dx1
            rv2 = dv0 * dv0 + dv1 * dv1
            if d2 == 0.0 and rx2 == 0.0 and rv2 == 0.0:
                ok = False
                continue
            if wc2 * rx2 > rv2:
                c = 1.0 / (rx2 + d2)
                gx[j, 0] += w[k] * c * dx0
                gx[j, 1] += w[k] * c * dx1
                gx[k, 0] -= w[j] * c * dx0
                gx[k, 1] -= w[j] * c * dx1
            else:
                c = 1.0 / (rv2 / wc2 + d2)
                gv[j, 0] += w[k] * c * dv0
                gv[j, 1] += w[k] * c * dv1
                gv[k, 0] -= w[j] * c * dv0
                gv[k, 1] -= w[j] * c * dv1
    # grad e(z) = -z / (2 pi |z|^2); V = -perp(sum grad e(dx)) / wc,
    # A = perp(sum grad e(dv / wc)) with the 1/wc of the argument folded in.
    V = np.empty((n, 2))
    A = np.empty((n, 2))
    for j in range(n):
        sx0 = -_INV_TWO_PI * gx[j, 0]
        sx1 = -_INV_TWO_PI * gx[j, 1]
        sv0 = -_INV_TWO_PI * gv[j, 0] / omega_c
        sv1 = -_INV_TWO_PI * gv[j, 1] / omega_c
        V[j, 0] = -sx1 / omega_c
        V[j, 1] = sx0 / omega_c
        A[j, 0] = sv1
        A[j, 1] = -sv0
    return V, A, ok


@njit(cache=True)
def electric_field(pos, w, delta):
    """``-sum_k w_k grad e(x_j - x_k)`` at every marker, self term excluded."""
    n = pos.shape[0]
    E = np.zeros((n, 2))
    d2 = delta * delta
    ok = True
    for j in range(n):
        for k in range(j + 1, n):
            dx0 = pos[j, 0] - pos[k, 0]
            dx1 = pos[j, 1] - pos[k, 1]
            r2 = dx0 * dx0 + dx1 * dx1 + d2
            if r2 == 0.0:
                ok = False
                continue
            c = _INV_TWO_PI / r2
            E[j, 0] += w[k] * c * dx0
            E[j, 1] += w[k] * c * dx1
            E[k, 0] -= w[j] * c * dx0
            E[k, 1] -= w[j] * c * dx1
    return E, ok


@njit(cache=True)
def pair_energy(pos, vel, w, omega_c, delta):
    """``sum_{j<k} w_j w_k E(x_j - x_k, v_j - v_k)``."""
    n = pos.shape[0]
    wc2 = omega_c * omega_c
    d2 = delta * delta
    total = 0.0
    ok = True
    for j in range(n):
        for k in range(j + 1, n):
            dx0 = pos[j, 0] - pos[k, 0]
            dx1 = pos[j, 1] - pos[k, 1]
            dv0 = vel[j, 0] - vel[k, 0]
            dv1 = vel[j, 1] - vel[k, 1]
            rx2 = dx0 * dx0 + dx1 * dx1
            rv2 = dv0 * dv0 + dv1 * dv1
            if wc2 * rx2 > rv2:
                r2 = rx2 + d2
            else:
                r2 = rv2 / wc2 + d2
            if r2 == 0.0:
                ok = False
                continue
            total += w[j] * w[k] * (-0.5 * _INV_TWO_PI * np.log(r2))
    return total, ok


@njit(cache=True)
def gate_pattern(pos, vel, omega_c):
    """``far[j, k]`` for ``j < k``: True where the spatial branch applies."""
    n = pos.shape[0]
    far = np.zeros((n, n), dtype=np.bool_)
    wc2 = omega_c * omega_c
    for j in range(n):
        for k in range(j + 1, n):
            dx0 = pos[j, 0] - pos[k, 0]
            dx1 = pos[j, 1] - pos[k, 1]
            dv0 = vel[j, 0] - vel[k, 0]
            dv1 = vel[j, 1] - vel[k, 1]
            far[j, k] = wc2 * (dx0 * dx0 + dx1 * dx1) > dv0 * dv0 + dv1 * dv1
    return far


@njit(cache=True)
def switching(pos, vel, omega_c, j, k):
    """``omega_c^2 |x_j - x_k|^2 - |v_j - v_k|^2``; positive on the spatial branch."""
    dx0 = pos[j, 0] - pos[k, 0]
    dx1 = pos[j, 1] - pos[k, 1]
    dv0 = vel[j, 0] - vel[k, 0]
    dv1 = vel[j, 1] - vel[k, 1]
    return omega_c * omega_c * (dx0 * dx0 + dx1 * dx1) - (dv0 * dv0 + dv1 * dv1)


@njit(cache=True)
def marker_fields_frozen(pos, vel, w, omega_c, delta, far):
    """As :func:`marker_fields` but with the branch of each pair ``j < k`` given by ``far``."""
    n = pos.shape[0]
    gx = np.zeros((n, 2))
    gv = np.zeros((n, 2))
    wc2 = omega_c * omega_c
    d2 = delta * delta
    ok = True
    for j in range(n):
        for k in range(j + 1, n):
            if far[j, k]:
                dx0 = pos[j, 0] - pos[k, 0]
                dx1 = pos[j, 1] - pos[k, 1]
                r2 = dx0 * dx0 + dx1 * dx1 + d2
                if r2 == 0.0:
                    ok = False
                    continue
                c = 1.0 / r2
                gx[j, 0] += w[k] * c * dx0
                gx[j, 1] += w[k] * c * dx1
                gx[k, 0] -= w[j] * c * dx0
                gx[k, 1] -= w[j] * c * dx1
            else:
                dv0 = vel[j, 0] - vel[k, 0]
                dv1 = vel[j, 1] - vel[k, 1]
                r2 = (dv0 * dv0 + dv1 * dv1) / wc2 + d2
                if r2 == 0.0:
                    ok = False
                    continue
                c = 1.0 / r2
                gv[j, 0] += w[k] * c * dv0
                gv[j, 1] += w[k] * c * dv1
                gv[k, 0] -= w[j] * c * dv0
                gv[k, 1] -= w[j] * c * dv1
    V = np.empty((n, 2))
    A = np.empty((n, 2))
    for j in range(n):
        sx0 = -_INV_TWO_PI * gx[j, 0]
        sx1 = -_INV_TWO_PI * gx[j, 1]
        sv0 = -_INV_TWO_PI * gv[j, 0] / omega_c
        sv1 = -_INV_TWO_PI * gv[j, 1] / omega_c
        V[j, 0] = -sx1 / omega_c
        V[j, 1] = sx0 / omega_c
        A[j, 0] = sv1
        A[j, 1] = -sv0
    return V, A, ok
