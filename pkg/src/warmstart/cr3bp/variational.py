"""Ballistic variational equations: state + 6x6 state-transition matrix."""

from __future__ import annotations

import numpy as np
from numba import njit

from .constants import EARTH_MOON
from .dynamics import _DP_A, _DP_B5, _DP_E, PropagationError


@njit(cache=True)
def _rhs_var(s, mu, out):
    """42-dim RHS: ballistic 6-state followed by row-major 6x6 STM."""
    x, y, z, vx, vy, vz = s[0], s[1], s[2], s[3], s[4], s[5]
    d1x, d1y, d1z = x + mu, y, z
    d2x, d2y, d2z = x - 1.0 + mu, y, z
    r1sq = d1x * d1x + d1y * d1y + d1z * d1z
    r2sq = d2x * d2x + d2y * d2y + d2z * d2z
    r1 = np.sqrt(r1sq)
    r2 = np.sqrt(r2sq)
    r13 = r1sq * r1
    r23 = r2sq * r2
    r15 = r13 * r1sq
    r25 = r23 * r2sq
    c1 = 1.0 - mu
    gx = x - c1 * d1x / r13 - mu * d2x / r23
    gy = y - c1 * d1y / r13 - mu * d2y / r23
    gz = z - c1 * d1z / r13 - mu * d2z / r23
    out[0] = vx
    out[1] = vy
    out[2] = vz
    out[3] = 2.0 * vy + gx
    out[4] = -2.0 * vx + gy
    out[5] = gz
    # G = d(accel)/d(pos) = I - c1 (I/r1^3 - 3 d1 d1^T / r1^5) - mu (...)
    g = np.empty((3, 3))
    dvec1 = (d1x, d1y, d1z)
    dvec2 = (d2x, d2y, d2z)
    for i in range(3):
        for j in range(3):
            val = 1.0 if i == j else 0.0
            val -= c1 * ((1.0 if i == j else 0.0) / r13 - 3.0 * dvec1[i] * dvec1[j] / r15)
            val -= mu * ((1.0 if i == j else 0.0) / r23 - 3.0 * dvec2[i] * dvec2[j] / r25)
            g[i, j] = val
    # Phi_dot = A Phi, A = [[0, I], [G, Omega]], Omega = [[0,2,0],[-2,0,0],[0,0,0]]
    for col in range(6):
        p = s[6 + col::6]  # column `col` of Phi (stride over rows)
        out[6 + col + 0 * 6] = p[3]
        out[6 + col + 1 * 6] = p[4]
        out[6 + col + 2 * 6] = p[5]
        out[6 + col + 3 * 6] = g[0, 0] * p[0] + g[0, 1] * p[1] + g[0, 2] * p[2] + 2.0 * p[4]
        out[6 + col + 4 * 6] = g[1, 0] * p[0] + g[1, 1] * p[1] + g[1, 2] * p[2] - 2.0 * p[3]
        out[6 + col + 5 * 6] = g[2, 0] * p[0] + g[2, 1] * p[1] + g[2, 2] * p[2]


@njit(cache=True)
def _propagate_var(s0, dt, mu, rtol, atol, a_tab, b5, e_tab, max_steps):
    s = s0.copy()
    if dt == 0.0:
        return s, 0
    direction = 1.0 if dt > 0 else -1.0
    t = 0.0
    h = direction * min(0.01, abs(dt))
    n = s.shape[0]
    k = np.empty((7, n))
    tmp = np.empty(n)
    s_new = np.empty(n)
    err = np.empty(n)
    for _ in range(max_steps):
        if direction * (t + h - dt) > 0.0:
            h = dt - t
        _rhs_var(s, mu, k[0])
        for stage in range(1, 7):
            for j in range(n):
                acc = 0.0
                for m_ in range(stage):
                    acc += a_tab[stage, m_] * k[m_, j]
                tmp[j] = s[j] + h * acc
            _rhs_var(tmp, mu, k[stage])
        for j in range(n):
            acc5 = 0.0
            eacc = 0.0
            for stage in range(7):
                acc5 += b5[stage] * k[stage, j]
                eacc += e_tab[stage] * k[stage, j]
            s_new[j] = s[j] + h * acc5
            err[j] = h * eacc
        enorm = 0.0
        for j in range(n):
            sc = atol + rtol * max(abs(s[j]), abs(s_new[j]))
            enorm += (err[j] / sc) ** 2
        enorm = np.sqrt(enorm / n)
        if enorm <= 1.0:
            t += h
            s = s_new.copy()
            if direction * (t - dt) >= 0.0:
                return s, 0
        factor = 0.9 * enorm ** -0.2 if enorm > 0.0 else 5.0
        if factor > 5.0:
            factor = 5.0
        elif factor < 0.2:
            factor = 0.2
        h *= factor
        if abs(h) < 1e-14:
            return s, 1
    return s, 2


def propagate_with_stm(state6, dt, constants=EARTH_MOON, rel_tol=1e-12, abs_tol=1e-12,
                       max_steps=2_000_000):
    """Ballistic propagation of a 6-state and its state-transition matrix."""
    s = np.asarray(state6, dtype=float)
    if s.shape != (6,):
        raise ValueError(f"expected 6-state, got {s.shape}")
    packed = np.concatenate([s, np.eye(6).ravel()])
    out, status = _propagate_var(packed, float(dt), constants.mu, rel_tol, abs_tol,
                                 _DP_A, _DP_B5, _DP_E, max_steps)
    if status == 1:
        raise PropagationError("step-size underflow in variational propagation")
    if status == 2:
        raise PropagationError("maximum step count exceeded in variational propagation")
    return out[:6], out[6:].reshape(6, 6)
