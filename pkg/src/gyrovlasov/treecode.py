"""Gated quadtree summation of the drift field.

A spatial pair term only contributes when ``|x_j - x_k| > |v_j - v_k|/|omega_c|``.
For a target ``j`` and a cell with center ``c``, spatial radius ``r`` and a
velocity ball ``(c_v, r_v)`` around its markers, every pair is on the spatial
branch as soon as

    |omega_c| (|x_j - c| - r) > |v_j - c_v| + r_v,

and the cell's whole sum is then a harmonic function of ``x_j`` which a
truncated Laurent series reproduces. With ``z = x_1 + i x_2``,

    sum_k w_k / (z - z_k) = sum_p a_p / (z - c)^(p+1),   a_p = sum_k w_k (z_k - c)^p,

and ``sum_k w_k grad e(x - x_k)`` is ``-conj(...) / (2 pi)`` read as a plane
vector. Cells that fail the acceptance test are opened; leaves are summed
directly with the per-pair gate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .core import Ensemble, FloatArray, Frame
from .kernel import KernelDomainError

_INV_TWO_PI = 1.0 / (2.0 * np.pi)


@dataclass(frozen=True)
class GatedQuadtree:
    """Flattened quadtree; node ``i`` owns markers ``order[start[i]:end[i]]``."""

    order: np.ndarray
    start: np.ndarray
    end: np.ndarray
    children: np.ndarray        # (n_nodes, 4), -1 where absent
    center: np.ndarray          # complex expansion centers
    radius: np.ndarray          # max |z_k - center|
    vel_center: np.ndarray      # (n_nodes, 2)
    vel_radius: np.ndarray
    coeffs: np.ndarray          # (n_nodes, n_terms + 1) complex
    n_terms: int


def build_tree(ens: Ensemble, leaf_size: int = 16, n_terms: int = 24) -> GatedQuadtree:
    """Quadtree over the guiding centers with velocity bounds and multipoles."""
    ens.require(Frame.GYRO)
    if leaf_size < 1 or n_terms < 1:
        raise ValueError("leaf_size and n_terms must be positive")
    z = ens.pos[:, 0] + 1j * ens.pos[:, 1]
    order = np.arange(ens.n)
    nodes = []          # (start, end) of each node in ``order``
    children = []

    def split(idx, start, lo, hi):
        node = len(nodes)
        nodes.append((start, start + len(idx)))
        children.append([-1, -1, -1, -1])
        order[start:start + len(idx)] = idx
        if len(idx) <= leaf_size or hi.real - lo.real < 1e-12 * max(1.0, abs(hi)):
            return node
        mid = 0.5 * (lo + hi)
        east = z[idx].real > mid.real
        north = z[idx].imag > mid.imag
        quads = [(~east & ~north, lo, mid),
                 (east & ~north, complex(mid.real, lo.imag), complex(hi.real, mid.imag)),
                 (~east & north, complex(lo.real, mid.imag), complex(mid.real, hi.imag)),
                 (east & north, mid, hi)]
        offset = start
        for q, (mask, qlo, qhi) in enumerate(quads):
            sub = idx[mask]
            if len(sub):
                children[node][q] = split(sub, offset, qlo, qhi)
                offset += len(sub)
        return node

    if ens.n:
        lo = complex(z.real.min(), z.imag.min())
        hi = complex(z.real.max(), z.imag.max())
        side = max(hi.real - lo.real, hi.imag - lo.imag, 1e-300)
        split(np.arange(ens.n), 0, lo, lo + complex(side, side))

    m = len(nodes)
    start = np.array([s for s, _ in nodes], dtype=np.int64)
    end = np.array([e for _, e in nodes], dtype=np.int64)
    center, radius, vel_center, vel_radius, coeffs = _node_moments(
        z, ens.vel, ens.weights, order, start, end, n_terms)
    return GatedQuadtree(order, start, end, np.array(children, dtype=np.int64).reshape(m, 4),
                         center, radius, vel_center, vel_radius, coeffs, n_terms)


@njit(cache=True)
def _node_moments(z, vel, w, order, start, end, n_terms):
    m = start.shape[0]
    center = np.empty(m, dtype=np.complex128)
    radius = np.zeros(m)
    vel_center = np.zeros((m, 2))
    vel_radius = np.zeros(m)
    coeffs = np.zeros((m, n_terms + 1), dtype=np.complex128)
    for i in range(m):
        mass = 0.0
        c = 0.0 + 0.0j
        for q in range(start[i], end[i]):
            k = order[q]
            mass += w[k]
            c += w[k] * z[k]
            vel_center[i, 0] += w[k] * vel[k, 0]
            vel_center[i, 1] += w[k] * vel[k, 1]
        c /= mass
        vel_center[i, 0] /= mass
        vel_center[i, 1] /= mass
        center[i] = c
        for q in range(start[i], end[i]):
            k = order[q]
            d = z[k] - c
            radius[i] = max(radius[i], abs(d))
            dv = np.sqrt((vel[k, 0] - vel_center[i, 0]) ** 2 + (vel[k, 1] - vel_center[i, 1]) ** 2)
            vel_radius[i] = max(vel_radius[i], dv)
            term = w[k] + 0.0j
            for p in range(n_terms + 1):
                coeffs[i, p] += term
                term *= d
    return center, radius, vel_center, vel_radius, coeffs


@njit(cache=True)
def _tree_grad_sum(targets, pos, vel, w, omega_c, delta, theta, delta_tol,
                   order, start, end, children, center, radius, vel_center, vel_radius, coeffs):
    """``sum_k w_k grad e(x_j - x_k)`` over spatial-branch pairs, for each target ``j``."""
    out = np.zeros((targets.shape[0], 2))
    stack = np.empty(4 * children.shape[0] + 1, dtype=np.int64)
    wc = abs(omega_c)
    d2 = delta * delta
    n_terms = coeffs.shape[1]
    ok = True
    for t in range(targets.shape[0]):
        j = targets[t]
        zj = complex(pos[j, 0], pos[j, 1])
        vj0 = vel[j, 0]
        vj1 = vel[j, 1]
        gx = 0.0
        gy = 0.0
        top = 0
        if children.shape[0] > 0:
            stack[0] = 0
            top = 1
        while top > 0:
            top -= 1
            node = stack[top]
            rel = zj - center[node]
            R = abs(rel)
            accept = False
            if radius[node] < theta * R:
                dmin = R - radius[node]
                dv = np.sqrt((vj0 - vel_center[node, 0]) ** 2 + (vj1 - vel_center[node, 1]) ** 2)
                if wc * dmin > dv + vel_radius[node] and d2 <= delta_tol * dmin * dmin:
                    accept = True
            if accept:
                inv = 1.0 / rel
                term = inv
                s = 0.0 + 0.0j
                for p in range(n_terms):
                    s += coeffs[node, p] * term
                    term *= inv
                # sum w / (z - z_k) = s; grad e sum = -conj(s) / (2 pi)
                gx -= _INV_TWO_PI * s.real
                gy += _INV_TWO_PI * s.imag
                continue
            leaf = True
            for q in range(4):
                if children[node, q] >= 0:
                    leaf = False
                    stack[top] = children[node, q]
                    top += 1
            if leaf:
                for m in range(start[node], end[node]):
                    k = order[m]
                    if k == j:
                        continue
                    dx0 = pos[j, 0] - pos[k, 0]
                    dx1 = pos[j, 1] - pos[k, 1]
                    dv0 = vj0 - vel[k, 0]
                    dv1 = vj1 - vel[k, 1]
                    rx2 = dx0 * dx0 + dx1 * dx1
                    rv2 = dv0 * dv0 + dv1 * dv1
                    if omega_c * omega_c * rx2 > rv2:
                        c = w[k] / (rx2 + d2)
                        gx -= _INV_TWO_PI * c * dx0
                        gy -= _INV_TWO_PI * c * dx1
                    elif d2 == 0.0 and rx2 == 0.0 and rv2 == 0.0:
                        ok = False
        out[t, 0] = gx
        out[t, 1] = gy
    return out, ok


def fast_velocity_field(ens: Ensemble, j: int | None = None, mac_theta: float = 0.5,
                        tree: GatedQuadtree | None = None, delta_tol: float = 1e-10,
                        leaf_size: int = 16, n_terms: int = 24) -> FloatArray:
    """Drift field from the gated treecode; ``j=None`` evaluates every marker.

    A cell is summed by its expansion only when ``radius < mac_theta * R``,
    the gate is provably open for all its markers, and
    ``delta^2 <= delta_tol * dmin^2`` so the regularized kernel is within a
    relative ``delta_tol`` of the harmonic one. Everything else is summed
    directly. ``mac_theta = 0`` accepts no cell.
    """
    ens.require(Frame.GYRO)
    if mac_theta < 0:
        raise ValueError("mac_theta must be nonnegative")
    if tree is None:
        tree = build_tree(ens, leaf_size, n_terms)
    targets = np.arange(ens.n, dtype=np.int64) if j is None else np.array([j], dtype=np.int64)
    g, ok = _tree_grad_sum(targets, ens.pos, ens.vel, ens.weights, float(ens.params.omega_c),
                           float(ens.params.delta), float(mac_theta), float(delta_tol),
                           tree.order, tree.start, tree.end, tree.children, tree.center,
                           tree.radius, tree.vel_center, tree.vel_radius, tree.coeffs)
    if not ok:
        raise KernelDomainError("two markers coincide in phase space and delta = 0")
    # V = -(1/omega_c) perp(g) with perp(a, b) = (b, -a)
    V = np.empty_like(g)
    V[:, 0] = -g[:, 1] / ens.params.omega_c
    V[:, 1] = g[:, 0] / ens.params.omega_c
    return V[0] if j is not None else V
