"""L1 Lyapunov orbits by differential correction, and stable-manifold targets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import EARTH_MOON
from .dynamics import eom, propagate_segment, propagate_segment_trace
from .variational import propagate_with_stm


class CorrectionError(RuntimeError):
    pass


def l1_position(mu, tol=1e-14):
    """x-coordinate of the L1 point (between the primaries), by Newton."""
    x = 1.0 - (mu / 3.0) ** (1.0 / 3.0)
    for _ in range(100):
        d1 = x + mu
        d2 = 1.0 - mu - x
        f = x - (1.0 - mu) / d1 ** 2 + mu / d2 ** 2
        fp = 1.0 + 2.0 * (1.0 - mu) / d1 ** 3 + 2.0 * mu / d2 ** 3
        step = f / fp
        x -= step
        if abs(step) < tol:
            return x
    raise CorrectionError("L1 Newton iteration did not converge")


@dataclass(frozen=True)
class PeriodicOrbit:
    """Planar Lyapunov orbit: perpendicular-crossing state and eigenstructure."""

    initial_state: np.ndarray
    period: float
    monodromy: np.ndarray
    stable_value: float
    stable_vector: np.ndarray
    unstable_value: float
    unstable_vector: np.ndarray
    jacobi: float


def _ballistic(state6, dt, constants, rel_tol=1e-12, abs_tol=1e-12):
    s7 = np.concatenate([state6, [1.0]])
    return propagate_segment(s7, np.zeros(3), dt, constants, rel_tol, abs_tol)[:6]


def find_y_crossing(state6, constants=EARTH_MOON, t_max=10.0, rel_tol=1e-12,
                    abs_tol=1e-12, t_min=1e-3):
    """First y = 0 crossing after t_min; returns (t_cross, state at crossing)."""
    s7 = np.concatenate([state6, [1.0]])
    times, states = propagate_segment_trace(s7, np.zeros(3), t_max, constants,
                                            rel_tol=1e-10, abs_tol=1e-10)
    bracket = None
    for i in range(1, len(times)):
        if times[i] <= t_min:
            continue
        if states[i - 1, 1] == 0.0 and times[i - 1] > t_min:
            bracket = (times[i - 1], times[i - 1])
            break
        if states[i - 1, 1] * states[i, 1] < 0.0:
            bracket = (times[i - 1], times[i])
            break
    if bracket is None:
        raise CorrectionError("no y = 0 crossing found within t_max")
    t_lo, t_hi = bracket
    base = _ballistic(state6, t_lo, constants, rel_tol, abs_tol)
    y_lo = base[1]
    lo, hi = 0.0, t_hi - t_lo
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        y_mid = _ballistic(base, mid, constants, rel_tol, abs_tol)[1]
        if abs(y_mid) < 1e-13 or (hi - lo) < 1e-15:
            return t_lo + mid, _ballistic(base, mid, constants, rel_tol, abs_tol)
        if y_lo * y_mid <= 0.0:
            hi = mid
        else:
            lo = mid
            y_lo = y_mid
    raise CorrectionError("crossing refinement failed to converge")


def _linear_guess(mu, ax):
    """Perpendicular-crossing seed from the planar linearization about L1.

    Picks the oscillatory in-plane mode, phases it so y(0) = vx(0) = 0, and
    scales the x-displacement to -ax (toward the larger primary).
    """
    xl = l1_position(mu)
    c1 = 1.0 - mu
    c2 = c1 / abs(xl + mu) ** 3 + mu / abs(xl - 1.0 + mu) ** 3
    a_mat = np.array([
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [1.0 + 2.0 * c2, 0.0, 0.0, 2.0],
        [0.0, 1.0 - c2, -2.0, 0.0],
    ])
    eigvals, eigvecs = np.linalg.eig(a_mat)
    osc = [i for i, v in enumerate(eigvals) if abs(v.real) < 1e-9 and v.imag > 0]
    if not osc:
        raise CorrectionError("no oscillatory in-plane mode at L1")
    nu = eigvals[osc[0]].imag
    u = eigvecs[:, osc[0]]
    # real solution s(0) = p Re(u) - q Im(u); choose (p, q) so y(0) = 0
    p, q = u[1].imag, u[1].real
    s0 = p * u.real - q * u.imag
    if abs(s0[2]) > 1e-9 * np.linalg.norm(s0):
        raise CorrectionError("linear mode lacks a perpendicular crossing")
    s0 = s0 * (-ax / s0[0])
    state = np.array([xl + s0[0], 0.0, 0.0, 0.0, s0[3], 0.0])
    return state, nu


def _correct_once(state, constants, rel_tol, abs_tol, max_dvy=0.01):
    """One perpendicular-crossing correction step; returns (new state, |vx|, t_half).

    The vy0 update is clamped to max_dvy so the Newton step cannot jump onto
    a different perpendicular-crossing family.
    """
    t_half, s_half = find_y_crossing(state, constants, rel_tol=rel_tol, abs_tol=abs_tol)
    _, phi = propagate_with_stm(state, t_half, constants, rel_tol, abs_tol)
    deriv = eom(np.concatenate([s_half, [1.0]]), np.zeros(3), constants)
    vx_f, vy_f, ax_f = s_half[3], s_half[4], deriv[3]
    denom = phi[3, 4] - ax_f * phi[1, 4] / vy_f
    if abs(denom) < 1e-14:
        raise CorrectionError("singular correction denominator")
    dvy = -vx_f / denom
    if abs(dvy) > max_dvy:
        dvy = np.sign(dvy) * max_dvy
    new_state = state.copy()
    new_state[4] += dvy
    return new_state, abs(vx_f), t_half


def lyapunov_orbit(x_amplitude, constants=EARTH_MOON, tol=1e-10, max_iter=50,
                   rel_tol=1e-12, abs_tol=1e-12, continuation_step=0.01):
    """Planar L1 Lyapunov orbit of the given x-amplitude (DU).

    Single-shooting differential correction on the perpendicular-crossing
    symmetry (y = 0, vx = 0 at half period); converged when |vx(T/2)| < tol.
    Amplitudes beyond the linear regime are reached by stepping the amplitude
    and re-correcting.
    """
    mu = constants.mu
    amplitudes = [min(x_amplitude, 1e-3)]
    while amplitudes[-1] < x_amplitude - 1e-12:
        amplitudes.append(min(x_amplitude, amplitudes[-1] + continuation_step))
    xl = l1_position(mu)
    solved = []  # (amplitude, vy0) pairs for the secant predictor
    for ax in amplitudes:
        if len(solved) >= 2:
            (a0, v0), (a1, v1) = solved[-2], solved[-1]
            vy_pred = v1 + (v1 - v0) * (ax - a1) / (a1 - a0)
            state = np.array([xl - ax, 0.0, 0.0, 0.0, vy_pred, 0.0])
        else:
            state, _ = _linear_guess(mu, ax)
        err_prev = np.inf
        for it in range(max_iter):
            state, vx_err, t_half = _correct_once(state, constants, rel_tol, abs_tol)
            if vx_err < tol:
                break
            if vx_err > 10.0 * err_prev:
                raise CorrectionError(f"correction diverging at amplitude {ax}")
            err_prev = min(err_prev, vx_err)
        else:
            raise CorrectionError(f"correction stalled at amplitude {ax}")
        solved.append((ax, state[4]))
    # converged: recompute half period and assemble the orbit
    t_half, _ = find_y_crossing(state, constants, rel_tol=rel_tol, abs_tol=abs_tol)
    period = 2.0 * t_half
    _, monodromy = propagate_with_stm(state, period, constants, rel_tol, abs_tol)
    eigvals, eigvecs = np.linalg.eig(monodromy)
    order = np.argsort(np.abs(eigvals))
    stable_idx, unstable_idx = int(order[0]), int(order[-1])
    lam_s, lam_u = eigvals[stable_idx], eigvals[unstable_idx]
    if (abs(lam_s) > 0.99 or abs(lam_u) < 1.01
            or abs(lam_s.imag) > 1e-3 * abs(lam_s)
            or abs(lam_u.imag) > 1e-3 * abs(lam_u)):
        raise CorrectionError("monodromy lacks a hyperbolic stable/unstable pair")
    sv = eigvecs[:, stable_idx].real
    uv = eigvecs[:, unstable_idx].real
    from .dynamics import jacobi_constant
    return PeriodicOrbit(
        initial_state=state, period=period, monodromy=monodromy,
        stable_value=float(lam_s.real),
        stable_vector=sv / np.linalg.norm(sv),
        unstable_value=float(lam_u.real),
        unstable_vector=uv / np.linalg.norm(uv),
        jacobi=jacobi_constant(np.concatenate([state, [1.0]]), mu))


def orbit_state_at_phase(orbit, phase, constants=EARTH_MOON, rel_tol=1e-12, abs_tol=1e-12):
    """State and transported STM at fractional phase along the orbit."""
    dt = (phase % 1.0) * orbit.period
    return propagate_with_stm(orbit.initial_state, dt, constants, rel_tol, abs_tol)


def stable_manifold_arc(orbit, phase, epsilon, t_backward, constants=EARTH_MOON,
                        rel_tol=1e-12, abs_tol=1e-12, branch=1.0):
    """Terminal boundary state on the stable manifold.

    Perturbs the orbit state at `phase` by epsilon (DU) along the transported
    stable eigenvector and propagates backward for t_backward. branch=+-1
    selects the manifold branch.
    """
    state, phi = orbit_state_at_phase(orbit, phase, constants, rel_tol, abs_tol)
    v = phi @ orbit.stable_vector
    norm = np.linalg.norm(v)
    if norm < 1e-12:
        raise CorrectionError("stable eigenvector vanished under transport")
    v = v / norm
    perturbed = state + branch * epsilon * v
    if t_backward == 0.0:
        return perturbed
    return _ballistic(perturbed, -abs(t_backward), constants, rel_tol, abs_tol)
