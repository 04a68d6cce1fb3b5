"""CR3BP equations of motion, Jacobi constant and Dormand-Prince propagation.

States are 7-vectors (x, y, z, vx, vy, vz, m): nondimensional rotating-frame
position/velocity plus mass in kilograms. Thrust is a 3-vector in newtons,
constant over each propagation segment. The inner kernels are numba-compiled;
adaptive DP5(4) is the reference integrator, and a fixed-step variant (step
count proportional to duration) provides the smooth-in-x evaluations the
shooting solver differentiates through.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .constants import EARTH_MOON

# Dormand-Prince 5(4) tableau
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = np.zeros((7, 6))
_DP_A[1, 0] = 1 / 5
_DP_A[2, :2] = (3 / 40, 9 / 40)
_DP_A[3, :3] = (44 / 45, -56 / 15, 32 / 9)
_DP_A[4, :4] = (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729)
_DP_A[5, :5] = (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656)
_DP_A[6, :6] = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84)
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])


def effective_potential(x, y, z, mu):
    """-(1/2)((1-mu) r1^2 + mu r2^2) - (1-mu)/r1 - mu/r2."""
    r1 = np.sqrt((x + mu) ** 2 + y ** 2 + z ** 2)
    r2 = np.sqrt((x - 1.0 + mu) ** 2 + y ** 2 + z ** 2)
    if r1 == 0.0 or r2 == 0.0:
        raise ZeroDivisionError("state coincides with a primary")
    return (-0.5 * ((1.0 - mu) * r1 ** 2 + mu * r2 ** 2)
            - (1.0 - mu) / r1 - mu / r2)


def jacobi_constant(state, mu):
    """C = -(vx^2 + vy^2 + vz^2) - 2 Ubar; conserved on coast arcs."""
    s = np.asarray(state, dtype=float)
    v2 = s[3] ** 2 + s[4] ** 2 + s[5] ** 2
    return -v2 - 2.0 * effective_potential(s[0], s[1], s[2], mu)


@njit(cache=True)
def _rhs(s, tx, ty, tz, mu, acc_scale, mdot_tu, out):
    x, y, z, vx, vy, vz, m = s
    r1sq = (x + mu) ** 2 + y * y + z * z
    r2sq = (x - 1.0 + mu) ** 2 + y * y + z * z
    r1 = np.sqrt(r1sq)
    r2 = np.sqrt(r2sq)
    r13 = r1sq * r1
    r23 = r2sq * r2
    # -grad(Ubar): the r^2 part contributes the full (x, y, z) term
    ax = x - (1.0 - mu) * (x + mu) / r13 - mu * (x - 1.0 + mu) / r23
    ay = y - (1.0 - mu) * y / r13 - mu * y / r23
    az = z - (1.0 - mu) * z / r13 - mu * z / r23
    tmag = np.sqrt(tx * tx + ty * ty + tz * tz)
    # thrust acceleration: (T[N] / m[kg]) m/s^2 -> DU/TU^2
    k = acc_scale / m
    out[0] = vx
    out[1] = vy
    out[2] = vz
    out[3] = 2.0 * vy + ax + k * tx
    out[4] = -2.0 * vx + ay + k * ty
    out[5] = az + k * tz
    out[6] = -tmag * mdot_tu


@njit(cache=True)
def _dp_step(s, h, tx, ty, tz, mu, acc_scale, mdot_tu, a_tab, b5, e_tab, k, s_new, err):
    """One DP5(4) step of size h; fills s_new and err, returns nothing."""
    n = s.shape[0]
    tmp = np.empty(n)
    _rhs(s, tx, ty, tz, mu, acc_scale, mdot_tu, k[0])
    for stage in range(1, 7):
        for j in range(n):
            acc = 0.0
            for m_ in range(stage):
                acc += a_tab[stage, m_] * k[m_, j]
            tmp[j] = s[j] + h * acc
        _rhs(tmp, tx, ty, tz, mu, acc_scale, mdot_tu, k[stage])
    for j in range(n):
        acc5 = 0.0
        eacc = 0.0
        for stage in range(7):
            acc5 += b5[stage] * k[stage, j]
            eacc += e_tab[stage] * k[stage, j]
        s_new[j] = s[j] + h * acc5
        err[j] = h * eacc


@njit(cache=True)
def _propagate_adaptive(s0, dt, tx, ty, tz, mu, acc_scale, mdot_tu,
                        rtol, atol, a_tab, b5, e_tab, max_steps):
    """Adaptive DP5(4) over signed duration dt; returns (state, status).

    status 0 = ok, 1 = step-size underflow, 2 = max_steps exceeded.
    """
    s = s0.copy()
    if dt == 0.0:
        return s, 0
    direction = 1.0 if dt > 0 else -1.0
    t = 0.0
    h = direction * min(0.01, abs(dt))
    k = np.empty((7, s.shape[0]))
    s_new = np.empty(s.shape[0])
    err = np.empty(s.shape[0])
    for _ in range(max_steps):
        if direction * (t + h - dt) > 0.0:
            h = dt - t
        _dp_step(s, h, tx, ty, tz, mu, acc_scale, mdot_tu, a_tab, b5, e_tab, k, s_new, err)
        enorm = 0.0
        for j in range(s.shape[0]):
            sc = atol + rtol * max(abs(s[j]), abs(s_new[j]))
            enorm += (err[j] / sc) ** 2
        enorm = np.sqrt(enorm / s.shape[0])
        if enorm <= 1.0:
            t += h
            s = s_new.copy()
            if abs(t - dt) <= 1e-300 or direction * (t - dt) >= 0.0:
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


@njit(cache=True)
def _propagate_fixed(s0, dt, tx, ty, tz, mu, acc_scale, mdot_tu, n_steps, a_tab, b5, e_tab):
    """n_steps equal DP5 steps over signed duration dt (no error control)."""
    s = s0.copy()
    if dt == 0.0 or n_steps == 0:
        return s
    h = dt / n_steps
    k = np.empty((7, s.shape[0]))
    s_new = np.empty(s.shape[0])
    err = np.empty(s.shape[0])
    for _ in range(n_steps):
        _dp_step(s, h, tx, ty, tz, mu, acc_scale, mdot_tu, a_tab, b5, e_tab, k, s_new, err)
        s = s_new.copy()
    return s


@njit(cache=True)
def _propagate_trace(s0, dt, tx, ty, tz, mu, acc_scale, mdot_tu,
                     rtol, atol, a_tab, b5, e_tab, max_steps):
    """Adaptive propagation keeping every accepted step; returns (times, states, n, status)."""
    times = np.empty(max_steps + 1)
    states = np.empty((max_steps + 1, s0.shape[0]))
    times[0] = 0.0
    states[0] = s0
    s = s0.copy()
    if dt == 0.0:
        return times, states, 1, 0
    direction = 1.0 if dt > 0 else -1.0
    t = 0.0
    h = direction * min(0.01, abs(dt))
    k = np.empty((7, s.shape[0]))
    s_new = np.empty(s.shape[0])
    err = np.empty(s.shape[0])
    count = 1
    for _ in range(max_steps):
        if direction * (t + h - dt) > 0.0:
            h = dt - t
        _dp_step(s, h, tx, ty, tz, mu, acc_scale, mdot_tu, a_tab, b5, e_tab, k, s_new, err)
        enorm = 0.0
        for j in range(s.shape[0]):
            sc = atol + rtol * max(abs(s[j]), abs(s_new[j]))
            enorm += (err[j] / sc) ** 2
        enorm = np.sqrt(enorm / s.shape[0])
        if enorm <= 1.0:
            t += h
            s = s_new.copy()
            times[count] = t
            states[count] = s
            count += 1
            if direction * (t - dt) >= 0.0:
                return times, states, count, 0
        factor = 0.9 * enorm ** -0.2 if enorm > 0.0 else 5.0
        if factor > 5.0:
            factor = 5.0
        elif factor < 0.2:
            factor = 0.2
        h *= factor
        if abs(h) < 1e-14:
            return times, states, count, 1
    return times, states, count, 2


class PropagationError(RuntimeError):
    pass


def eom(state, thrust, constants=EARTH_MOON, max_thrust=None):
    """State derivative under constant thrust (N); mass flow in kg/TU."""
    s = np.asarray(state, dtype=float)
    t = np.asarray(thrust, dtype=float)
    if s.shape != (7,):
        raise ValueError(f"state must be a 7-vector, got {s.shape}")
    tmag = float(np.linalg.norm(t))
    if max_thrust is not None and tmag > max_thrust * (1.0 + 1e-12):
        raise ValueError(f"thrust magnitude {tmag} exceeds limit {max_thrust}")
    out = np.empty(7)
    _rhs(s, t[0], t[1], t[2], constants.mu, constants.acc_scale, constants.mdot_tu, out)
    if not np.all(np.isfinite(out)):
        raise PropagationError("state derivative is non-finite (near a primary?)")
    return out


def _check_status(status):
    if status == 1:
        raise PropagationError("step-size underflow (singularity?)")
    if status == 2:
        raise PropagationError("maximum step count exceeded")


def propagate_segment(state, thrust, dt, constants=EARTH_MOON,
                      rel_tol=1e-12, abs_tol=1e-12, max_steps=2_000_000):
    """Adaptive DP5(4) propagation over one constant-thrust segment."""
    s = np.asarray(state, dtype=float)
    t = np.asarray(thrust, dtype=float)
    out, status = _propagate_adaptive(s, float(dt), t[0], t[1], t[2],
                                      constants.mu, constants.acc_scale,
                                      constants.mdot_tu, rel_tol, abs_tol,
                                      _DP_A, _DP_B5, _DP_E, max_steps)
    _check_status(status)
    return out


def propagate_segment_fixed(state, thrust, dt, constants=EARTH_MOON, steps_per_tu=128,
                            min_steps=8):
    """Fixed-step DP5 propagation: smooth dependence on (state, thrust, dt)."""
    s = np.asarray(state, dtype=float)
    t = np.asarray(thrust, dtype=float)
    n_steps = max(min_steps, int(np.ceil(abs(float(dt)) * steps_per_tu)))
    return _propagate_fixed(s, float(dt), t[0], t[1], t[2], constants.mu,
                            constants.acc_scale, constants.mdot_tu, n_steps,
                            _DP_A, _DP_B5, _DP_E)


def propagate_segment_trace(state, thrust, dt, constants=EARTH_MOON,
                            rel_tol=1e-10, abs_tol=1e-10, max_steps=200_000):
    """Adaptive propagation returning every accepted step (times, states)."""
    s = np.asarray(state, dtype=float)
    t = np.asarray(thrust, dtype=float)
    times, states, n, status = _propagate_trace(s, float(dt), t[0], t[1], t[2],
                                                constants.mu, constants.acc_scale,
                                                constants.mdot_tu, rel_tol, abs_tol,
                                                _DP_A, _DP_B5, _DP_E, max_steps)
    _check_status(status)
    return times[:n].copy(), states[:n].copy()


def propagate(state, control_schedule, t_span, constants=EARTH_MOON,
              rel_tol=1e-12, abs_tol=1e-12, dense=False):
    """Propagate over t_span under a piecewise-constant thrust schedule.

    control_schedule: sequence of (duration_tu, thrust_newtons) pairs laid out
    from t_span[0], or None for a pure coast; it must cover the span. With
    dense=True, (times, states) for every accepted step are returned alongside
    the final state.
    """
    t0, t1 = float(t_span[0]), float(t_span[1])
    total = t1 - t0
    sign = 1.0 if total >= 0 else -1.0
    if control_schedule is None:
        control_schedule = [(abs(total), np.zeros(3))]
    covered = sum(d for d, _ in control_schedule)
    if covered < abs(total) - 1e-12:
        raise ValueError(f"schedule covers {covered} TU but span needs {abs(total)}")
    s = np.asarray(state, dtype=float)
    remaining = abs(total)
    all_times, all_states = [np.array([0.0])], [s[None, :].copy()]
    t_accum = 0.0
    for duration, thrust in control_schedule:
        if remaining <= 1e-15:
            break
        d = min(duration, remaining)
        if dense:
            times, states = propagate_segment_trace(s, thrust, sign * d, constants,
                                                    rel_tol, abs_tol)
            all_times.append(t_accum + times[1:])
            all_states.append(states[1:])
            s = states[-1].copy()
            t_accum += times[-1]
        else:
            s = propagate_segment(s, thrust, sign * d, constants, rel_tol, abs_tol)
        remaining -= d
    if dense:
        return s, (t0 + np.concatenate(all_times), np.concatenate(all_states))
    return s


def warm_up():
    """Trigger numba compilation of all kernels (cached on disk afterwards)."""
    s = np.array([0.5, 0.1, 0.0, 0.1, 0.2, 0.0, 500.0])
    propagate_segment(s, np.zeros(3), 0.01)
    propagate_segment_fixed(s, np.zeros(3), 0.01)
    propagate_segment_trace(s, np.zeros(3), 0.01)
