"""Forward-backward shooting transcription of the low-thrust transfer.

Decision vector layout (3N + 4): (dt_shooting, dt_coast_initial,
dt_coast_final, m_f, u_1, ..., u_N) with Cartesian throttle 3-vectors
||u_i|| <= 1 and applied thrust alpha * u_i newtons. The forward leg carries
the first N//2 segments from the initial boundary; the backward leg carries
the rest from the target; the defect is the forward-minus-backward midpoint
state with the mass component scaled to balance the nondimensional entries.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .cr3bp import EARTH_MOON, lyapunov_orbit, stable_manifold_arc
from .cr3bp.constants import SystemConstants
from .cr3bp.dynamics import (
    PropagationError,
    propagate_segment,
    propagate_segment_fixed,
    propagate_segment_trace,
)
from .problems import ProblemInstance, ProblemParameter

TIME_BOUNDS = ((0.0, 40.0), (0.0, 15.0), (0.0, 15.0))  # shooting, coast_i, coast_f (TU)
MF_BOUNDS = (350.0, 450.0)  # kg
ALPHA_BOUNDS = (0.1, 1.0)  # newtons
MASS_DEFECT_SCALE = 1e-3


@dataclass(frozen=True)
class ShootingVector:
    """Typed view of one decision vector."""

    dt_shooting: float
    dt_coast_initial: float
    dt_coast_final: float
    m_f: float
    controls: np.ndarray  # (N, 3)

    @property
    def n_segments(self):
        return len(self.controls)

    def time_of_flight(self):
        return self.dt_shooting + self.dt_coast_initial + self.dt_coast_final


@dataclass(frozen=True)
class DefectVector:
    """Midpoint matching residual; zero iff the two legs meet."""

    position: np.ndarray  # (3,) DU
    velocity: np.ndarray  # (3,) DU/TU
    mass: float  # kg * MASS_DEFECT_SCALE

    def as_array(self):
        return np.concatenate([self.position, self.velocity, [self.mass]])

    def norm_inf(self):
        return float(np.max(np.abs(self.as_array())))


def decode_vector(x, n_segments):
    """DecisionVector (3N+4,) -> ShootingVector."""
    x = np.asarray(x, dtype=float)
    expected = 3 * n_segments + 4
    if x.shape != (expected,):
        raise ValueError(f"expected decision vector of length {expected}, got {x.shape}")
    return ShootingVector(
        dt_shooting=float(x[0]), dt_coast_initial=float(x[1]),
        dt_coast_final=float(x[2]), m_f=float(x[3]),
        controls=x[4:].reshape(n_segments, 3).copy())


def encode_vector(sv):
    """ShootingVector -> DecisionVector; inverse of decode_vector."""
    return np.concatenate([[sv.dt_shooting, sv.dt_coast_initial, sv.dt_coast_final, sv.m_f],
                           np.asarray(sv.controls, dtype=float).ravel()])


def clamp_throttle(controls):
    """Scale any row with ||u|| > 1 back onto the unit sphere.

    Returns (clamped controls, number of rows clamped); direction preserved.
    """
    u = np.asarray(controls, dtype=float).copy()
    norms = np.linalg.norm(u, axis=1)
    over = norms > 1.0
    if np.any(over):
        u[over] /= norms[over, None]
    return u, int(np.count_nonzero(over))


@dataclass(frozen=True)
class TransferScenario:
    """Fixed boundary conditions and discretization of the desk transfer."""

    constants: SystemConstants
    initial_state: np.ndarray  # (6,) nondim, end of the LT spiral
    initial_mass: float  # kg at the initial boundary
    target_state: np.ndarray  # (6,) nondim, stable-manifold arc state
    n_segments: int
    planar: bool = True
    time_bounds: tuple = TIME_BOUNDS
    mf_bounds: tuple = MF_BOUNDS
    steps_per_tu: int = 128
    verify_tol: float = 1e-11
    meta: dict = field(default_factory=dict)

    @property
    def n_forward(self):
        return self.n_segments // 2

    def bounds(self):
        rows = [self.time_bounds[0], self.time_bounds[1], self.time_bounds[2], self.mf_bounds]
        u_hi = 1.0
        for _ in range(self.n_segments):
            rows.append((-u_hi, u_hi))
            rows.append((-u_hi, u_hi))
            rows.append((0.0, 0.0) if self.planar else (-u_hi, u_hi))
        return np.array(rows, dtype=float)


def _solve_propagator(scenario):
    def prop(state, thrust, dt):
        return propagate_segment_fixed(state, thrust, dt, scenario.constants,
                                       steps_per_tu=scenario.steps_per_tu)
    return prop


def _verify_propagator(scenario):
    def prop(state, thrust, dt):
        return propagate_segment(state, thrust, dt, scenario.constants,
                                 rel_tol=scenario.verify_tol, abs_tol=scenario.verify_tol)
    return prop


def _burn_forward(prop, state, thrust, dt, constants):
    """Forward burn with fuel cutoff: thrust ends when mass hits dry mass."""
    tmag = float(np.linalg.norm(thrust))
    if tmag <= 0.0 or dt <= 0.0:
        return prop(state, np.zeros(3), dt)
    burn_rate = tmag * constants.mdot_tu  # kg per TU
    t_empty = (state[6] - constants.dry_mass_kg) / burn_rate
    if t_empty >= dt:
        return prop(state, thrust, dt)
    state = prop(state, thrust, max(t_empty, 0.0))
    return prop(state, np.zeros(3), dt - max(t_empty, 0.0))


def forward_leg(sv, alpha, scenario, prop=None):
    """Initial boundary -> midpoint: initial coast, then segments 1..N//2."""
    if prop is None:
        prop = _solve_propagator(scenario)
    c = scenario.constants
    u, _ = clamp_throttle(sv.controls)
    state = np.concatenate([scenario.initial_state, [scenario.initial_mass]])
    if sv.dt_coast_initial > 0:
        state = prop(state, np.zeros(3), sv.dt_coast_initial)
    seg_dt = sv.dt_shooting / sv.n_segments
    if seg_dt > 0:
        for i in range(scenario.n_forward):
            state = _burn_forward(prop, state, alpha * u[i], seg_dt, c)
    return state


def backward_leg(sv, alpha, scenario, prop=None):
    """Target boundary -> midpoint, integrated backward with mass m_f."""
    if prop is None:
        prop = _solve_propagator(scenario)
    u, _ = clamp_throttle(sv.controls)
    state = np.concatenate([scenario.target_state, [sv.m_f]])
    if sv.dt_coast_final > 0:
        state = prop(state, np.zeros(3), -sv.dt_coast_final)
    seg_dt = sv.dt_shooting / sv.n_segments
    if seg_dt > 0:
        for i in range(sv.n_segments - 1, scenario.n_forward - 1, -1):
            state = prop(state, alpha * u[i], -seg_dt)
    return state


def midpoint_defect(sv, alpha, scenario, verify=False):
    """Forward-minus-backward midpoint mismatch (DefectVector).

    verify=True re-evaluates with the adaptive integrator at the scenario's
    verification tolerance instead of the smooth fixed-step solve path.
    """
    prop = _verify_propagator(scenario) if verify else _solve_propagator(scenario)
    fwd = forward_leg(sv, alpha, scenario, prop)
    bwd = backward_leg(sv, alpha, scenario, prop)
    diff = fwd - bwd
    return DefectVector(position=diff[:3], velocity=diff[3:6],
                        mass=diff[6] * MASS_DEFECT_SCALE)


class StagedDefect:
    """Defect evaluator that caches per-segment states for cheap FD columns.

    Perturbing one decision coordinate only invalidates the propagation
    stages it feeds, so a central-difference Jacobian column reuses every
    cached upstream stage of the base point.
    """

    def __init__(self, alpha, scenario):
        self.alpha = float(alpha)
        self.scenario = scenario
        self.prop = _solve_propagator(scenario)
        self.n_seg = scenario.n_segments
        self.n_fwd = scenario.n_forward

    def _fwd_stages(self, dts, dci, u_eff, start=0, cached=None):
        sc = self.scenario
        seg = dts / self.n_seg
        states = list(cached[:start]) if cached else []
        if start == 0:
            s = np.concatenate([sc.initial_state, [sc.initial_mass]])
            s = self.prop(s, np.zeros(3), dci) if dci > 0 else s
            states.append(s)
            start = 1
        s = states[start - 1]
        for i in range(start - 1, self.n_fwd):
            s = _burn_forward(self.prop, s, self.alpha * u_eff[i], seg, sc.constants) \
                if seg > 0 else s
            states.append(s)
        return states

    def _bwd_stages(self, dts, dcf, m_f, u_eff, start=0, cached=None, mass_only=False):
        sc = self.scenario
        seg = dts / self.n_seg
        states = list(cached[:start]) if cached else []
        if start == 0:
            if mass_only and cached:
                # coast position/velocity is mass-independent; swap the mass
                s = cached[0].copy()
                s[6] = m_f
            else:
                s = np.concatenate([sc.target_state, [m_f]])
                s = self.prop(s, np.zeros(3), -dcf) if dcf > 0 else s
            states.append(s)
            start = 1
        s = states[start - 1]
        for k in range(start - 1, self.n_seg - self.n_fwd):
            i = self.n_seg - 1 - k
            s = self.prop(s, self.alpha * u_eff[i], -seg) if seg > 0 else s
            states.append(s)
        return states

    @staticmethod
    def _defect_from(fwd_state, bwd_state):
        diff = fwd_state - bwd_state
        out = diff.copy()
        out[6] *= MASS_DEFECT_SCALE
        return out

    def defect(self, x):
        sv = decode_vector(x, self.n_seg)
        u_eff, _ = clamp_throttle(sv.controls)
        fwd = self._fwd_stages(sv.dt_shooting, sv.dt_coast_initial, u_eff)
        bwd = self._bwd_stages(sv.dt_shooting, sv.dt_coast_final, sv.m_f, u_eff)
        return self._defect_from(fwd[-1], bwd[-1])

    def jacobian(self, x, h):
        """Central-difference Jacobian (7, n) with stage reuse."""
        x = np.asarray(x, dtype=float)
        h = np.broadcast_to(np.asarray(h, dtype=float), x.shape)
        sv = decode_vector(x, self.n_seg)
        u_eff, _ = clamp_throttle(sv.controls)
        fwd = self._fwd_stages(sv.dt_shooting, sv.dt_coast_initial, u_eff)
        bwd = self._bwd_stages(sv.dt_shooting, sv.dt_coast_final, sv.m_f, u_eff)
        cols = []
        for k in range(x.size):
            vals = []
            for sgn in (+1.0, -1.0):
                xp = x.copy()
                xp[k] += sgn * h[k]
                svp = decode_vector(xp, self.n_seg)
                up, _ = clamp_throttle(svp.controls)
                fwd_p, bwd_p = fwd, bwd
                if k == 0:  # dt_shooting feeds every burn on both legs
                    fwd_p = self._fwd_stages(svp.dt_shooting, svp.dt_coast_initial,
                                             up, start=1, cached=fwd)
                    bwd_p = self._bwd_stages(svp.dt_shooting, svp.dt_coast_final,
                                             svp.m_f, up, start=1, cached=bwd)
                elif k == 1:  # initial coast: whole forward leg
                    fwd_p = self._fwd_stages(svp.dt_shooting, svp.dt_coast_initial, up)
                elif k == 2:  # final coast: whole backward leg
                    bwd_p = self._bwd_stages(svp.dt_shooting, svp.dt_coast_final,
                                             svp.m_f, up)
                elif k == 3:  # m_f: backward burns, coast pos/vel reused
                    bwd_p = self._bwd_stages(svp.dt_shooting, svp.dt_coast_final,
                                             svp.m_f, up, mass_only=True, cached=bwd)
                else:
                    seg_idx = (k - 4) // 3
                    if seg_idx < self.n_fwd:
                        fwd_p = self._fwd_stages(svp.dt_shooting, svp.dt_coast_initial,
                                                 up, start=1 + seg_idx, cached=fwd)
                    else:
                        bstage = 1 + (self.n_seg - 1 - seg_idx)
                        bwd_p = self._bwd_stages(svp.dt_shooting, svp.dt_coast_final,
                                                 svp.m_f, up, start=bstage, cached=bwd)
                vals.append(self._defect_from(fwd_p[-1], bwd_p[-1]))
            cols.append((vals[0] - vals[1]) / (2.0 * h[k]))
        return np.column_stack(cols)


def transfer_objective(sv):
    """Maximize final mass, encoded as minimize -m_f."""
    return -sv.m_f


@dataclass
class Trajectory:
    """Dense two-leg trajectory for analysis/plotting."""

    forward_times: np.ndarray
    forward_states: np.ndarray
    backward_times: np.ndarray  # absolute times from departure, decreasing leg reversed
    backward_states: np.ndarray
    segment_marks: list  # (t_start, t_end, kind) with kind in {coast, burn}
    clamped_segments: int


def simulate_trajectory(sv, alpha, scenario, rel_tol=1e-10, abs_tol=1e-10):
    """Time-stamped states for both legs with coast/burn segmentation."""
    c = scenario.constants
    u, n_clamped = clamp_throttle(sv.controls)
    seg_dt = sv.dt_shooting / sv.n_segments
    marks = []
    times_f = [np.array([0.0])]
    states_f = [np.concatenate([scenario.initial_state, [scenario.initial_mass]])[None, :]]
    t = 0.0
    state = states_f[0][0]

    def run(state, thrust, dt, t):
        tt, ss = propagate_segment_trace(state, thrust, dt, c, rel_tol, abs_tol)
        return ss[-1], tt[1:] + t, ss[1:], t + tt[-1]

    if sv.dt_coast_initial > 0:
        state, tt, ss, t = run(state, np.zeros(3), sv.dt_coast_initial, t)
        times_f.append(tt); states_f.append(ss)
        marks.append((0.0, t, "coast"))
    for i in range(scenario.n_forward):
        if seg_dt <= 0:
            break
        t0 = t
        state, tt, ss, t = run(state, alpha * u[i], seg_dt, t)
        times_f.append(tt); states_f.append(ss)
        marks.append((t0, t, "burn"))
    tof = sv.time_of_flight()
    times_b = [np.array([tof])]
    states_b = [np.concatenate([scenario.target_state, [sv.m_f]])[None, :]]
    tb = tof
    state = states_b[0][0]
    if sv.dt_coast_final > 0:
        t0 = tb
        state, tt, ss, tb = run(state, np.zeros(3), -sv.dt_coast_final, tb)
        times_b.append(tt)
        states_b.append(ss)
        marks.append((tb, t0, "coast"))
    for i in range(sv.n_segments - 1, scenario.n_forward - 1, -1):
        if seg_dt <= 0:
            break
        t0 = tb
        state, tt, ss, tb = run(state, alpha * u[i], -seg_dt, tb)
        times_b.append(tt); states_b.append(ss)
        marks.append((tb, t0, "burn"))
    return Trajectory(
        forward_times=np.concatenate(times_f),
        forward_states=np.vstack(states_f),
        backward_times=np.concatenate(times_b),
        backward_states=np.vstack(states_b),
        segment_marks=sorted(marks), clamped_segments=n_clamped)


def sample_transfer_init(scenario, rng):
    """Uniform initialization: times/mass from their boxes, controls as
    (angle in [0, 2pi), magnitude in [0, 1]) converted to Cartesian."""
    tb = scenario.time_bounds
    dts = rng.uniform(*tb[0])
    dci = rng.uniform(*tb[1])
    dcf = rng.uniform(*tb[2])
    m_f = rng.uniform(*scenario.mf_bounds)
    angles = rng.uniform(0.0, 2.0 * np.pi, size=scenario.n_segments)
    mags = rng.uniform(0.0, 1.0, size=scenario.n_segments)
    controls = np.column_stack([mags * np.cos(angles), mags * np.sin(angles),
                                np.zeros(scenario.n_segments)])
    if not scenario.planar:
        zangle = rng.uniform(-np.pi / 2, np.pi / 2, size=scenario.n_segments)
        controls[:, 0] *= np.cos(zangle)
        controls[:, 1] *= np.cos(zangle)
        controls[:, 2] = mags * np.sin(zangle)
    return encode_vector(ShootingVector(dts, dci, dcf, m_f, controls))


def make_transfer_problem(alpha, scenario, eval_seconds=5e-4):
    """ProblemInstance for one max-thrust level alpha (newtons)."""
    alpha = float(alpha)
    n = 3 * scenario.n_segments + 4
    grad = np.zeros(n)
    grad[3] = -1.0
    staged = StagedDefect(alpha, scenario)

    def objective(x):
        return -float(x[3])

    def constraints(x):
        try:
            arr = staged.defect(x)
        except PropagationError:
            return np.full(7, 1e6), np.zeros(0)
        if not np.all(np.isfinite(arr)):
            arr = np.full(7, 1e6)
        return arr, np.zeros(0)

    def jacobian(x, h):
        jac = staged.jacobian(x, h)
        return np.where(np.isfinite(jac), jac, 0.0)

    def verifier(x):
        sv = decode_vector(x, scenario.n_segments)
        return midpoint_defect(sv, alpha, scenario, verify=True).as_array()

    return ProblemInstance(
        name="cr3bp_transfer", n=n, bounds=scenario.bounds(),
        alpha=ProblemParameter.scalar(alpha, *ALPHA_BOUNDS),
        objective=objective, gradient=lambda x: grad.copy(),
        constraints=constraints, eq_constraint_count=7,
        init_sampler=lambda rng: sample_transfer_init(scenario, rng),
        verifier=verifier, eq_jacobian=jacobian, eval_seconds=eval_seconds,
        extras={"scenario": scenario})


def build_desk_scenario(constants=EARTH_MOON, n_segments=6, orbit_amplitude=0.04,
                        manifold_phase=0.25, manifold_epsilon=1e-4,
                        manifold_branch=-1.0, t_backward=5.0,
                        reference_times=(4.0, 1.0, 1.0), reference_mass=430.0,
                        reference_thrust=0.5, steps_per_tu=128):
    """Construct the shipped desk transfer and its exactly feasible reference.

    The target is a stable-manifold arc state of an L1 Lyapunov orbit. The
    initial boundary (standing in for the unpublished LT-spiral endpoint) is
    produced by propagating backward from the target under a prograde
    reference control profile, so the returned ShootingVector has zero defect
    by construction and serves as the curated solver initialization.
    """
    orbit = lyapunov_orbit(orbit_amplitude, constants)
    target = stable_manifold_arc(orbit, manifold_phase, manifold_epsilon,
                                 t_backward, constants, branch=manifold_branch)
    dts, dci, dcf = reference_times
    n_fwd = n_segments // 2
    seg_dt = dts / n_segments

    def prop(state, thrust, dt):
        return propagate_segment_fixed(state, thrust, dt, constants,
                                       steps_per_tu=steps_per_tu)

    # backward construction through every segment records the controls
    state = np.concatenate([target, [reference_mass]])
    state = prop(state, np.zeros(3), -dcf)
    controls = np.zeros((n_segments, 3))
    for i in range(n_segments - 1, -1, -1):
        v = state[3:6]
        vhat = v / np.linalg.norm(v)
        controls[i] = reference_thrust * vhat
        state = prop(state, controls[i], -seg_dt)
    state = prop(state, np.zeros(3), -dci)
    scenario = TransferScenario(
        constants=constants, initial_state=state[:6].copy(),
        initial_mass=float(state[6]), target_state=np.asarray(target, dtype=float),
        n_segments=n_segments, steps_per_tu=steps_per_tu,
        meta={"orbit_amplitude": orbit_amplitude, "manifold_phase": manifold_phase,
              "manifold_epsilon": manifold_epsilon, "manifold_branch": manifold_branch,
              "t_backward": t_backward, "orbit_period": orbit.period,
              "reference_times": list(reference_times),
              "reference_mass": reference_mass,
              "reference_thrust": reference_thrust})
    # reference controls are scaled to throttle for alpha = 1 N
    reference = ShootingVector(dts, dci, dcf, reference_mass, controls)
    return scenario, reference
