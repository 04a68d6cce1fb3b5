"""Local solvers: bounded BFGS and an augmented-Lagrangian wrapper.

Both honor a per-solve cutoff measured on a pluggable clock. The default
"counted" clock charges a fixed number of seconds per function evaluation
(config-calibrated), which makes solve times and cutoff behavior exactly
reproducible; "wall" switches to real elapsed time.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .problems import evaluate_constraints, evaluate_objective

ARMIJO_C = 1e-4


class WorkClock:
    """Evaluation-counting clock with an optional wall-time mode."""

    def __init__(self, eval_seconds=1e-6, mode="counted"):
        if mode not in ("counted", "wall"):
            raise ValueError(f"unknown clock mode {mode!r}")
        self.eval_seconds = eval_seconds
        self.mode = mode
        self.evals = 0
        self._t0 = time.perf_counter()

    def charge(self, n=1):
        self.evals += n

    def elapsed(self):
        if self.mode == "counted":
            return self.evals * self.eval_seconds
        return time.perf_counter() - self._t0

    def wall(self):
        return time.perf_counter() - self._t0


@dataclass
class SolveResult:
    """Outcome of one local solve."""

    x: np.ndarray
    objective: float
    feasibility: float
    iterations: int
    n_evals: int
    solve_time: float
    wall_time: float
    converged: bool
    seed: Optional[int] = None
    message: str = ""
    history: list = field(default_factory=list)


def finite_diff_gradient(f, x, h=1e-6):
    """Central-difference gradient; h may be a scalar or per-coordinate vector."""
    x = np.asarray(x, dtype=float)
    h = np.broadcast_to(np.asarray(h, dtype=float), x.shape)
    if np.any(h <= 0):
        raise ValueError("finite-difference step must be positive")
    g = np.empty_like(x)
    for i in range(x.size):
        xp = x.copy(); xp[i] += h[i]
        xm = x.copy(); xm[i] -= h[i]
        g[i] = (f(xp) - f(xm)) / (2.0 * h[i])
    return g


def finite_diff_jacobian(fvec, x, h=1e-6):
    """Central-difference Jacobian of a vector-valued function, (m, n)."""
    x = np.asarray(x, dtype=float)
    h = np.broadcast_to(np.asarray(h, dtype=float), x.shape)
    cols = []
    for i in range(x.size):
        xp = x.copy(); xp[i] += h[i]
        xm = x.copy(); xm[i] -= h[i]
        cols.append((np.asarray(fvec(xp)) - np.asarray(fvec(xm))) / (2.0 * h[i]))
    return np.column_stack(cols) if cols else np.zeros((0, 0))


def _project(x, bounds):
    return np.clip(x, bounds[:, 0], bounds[:, 1])


def bfgs_minimize(f, grad, x0, bounds, tol_opt=1e-8, max_iter=500,
                  cutoff=None, clock=None, seed=None):
    """Projected-gradient BFGS with Armijo backtracking on a box.

    Convergence: ||x - P(x - g)||_2 < tol_opt. On iteration/cutoff exhaustion
    the best iterate is returned with converged=False. `grad=None` falls back
    to central differences.
    """
    if clock is None:
        clock = WorkClock()
    bounds = np.asarray(bounds, dtype=float)
    x = _project(np.asarray(x0, dtype=float).copy(), bounds)
    n = x.size

    def fval(z):
        clock.charge()
        return f(z)

    if grad is None:
        def gval(z):
            clock.charge(2 * n)
            return finite_diff_gradient(f, z, 1e-6)
    else:
        def gval(z):
            clock.charge()
            return np.asarray(grad(z), dtype=float)

    t_start = clock.elapsed()
    wall_start = clock.wall()
    fx = fval(x)
    g = gval(x)
    hinv = np.eye(n)
    converged = False
    message = "max_iter"
    it = 0
    for it in range(1, max_iter + 1):
        pg = x - _project(x - g, bounds)
        if np.linalg.norm(pg) < tol_opt:
            converged = True
            message = "tol_opt"
            break
        if cutoff is not None and clock.elapsed() - t_start > cutoff:
            message = "cutoff"
            break
        accepted = False
        for attempt in range(2):
            d = -hinv @ g
            # projected direction must descend; else fall back to steepest
            probe = _project(x + d, bounds) - x
            if g @ probe >= 0 and attempt == 0:
                hinv = np.eye(n)
                continue
            step = 1.0
            while step > 1e-14:
                x_new = _project(x + step * d, bounds)
                dx = x_new - x
                f_new = fval(x_new)
                if np.isfinite(f_new) and f_new <= fx + ARMIJO_C * (g @ dx):
                    accepted = True
                    break
                step *= 0.5
            if accepted and step == 1.0:
                # expand while Armijo keeps passing (escapes flat plateaus)
                for _ in range(6):
                    x_try = _project(x + 2.0 * step * d, bounds)
                    dx_try = x_try - x
                    f_try = fval(x_try)
                    if np.isfinite(f_try) and f_try <= fx + ARMIJO_C * (g @ dx_try) \
                            and f_try < f_new:
                        step *= 2.0
                        x_new, dx, f_new = x_try, dx_try, f_try
                    else:
                        break
            if accepted or attempt == 1:
                break
            hinv = np.eye(n)  # line search failed with BFGS direction: retry steepest
        if not accepted:
            pg = x - _project(x - g, bounds)
            converged = bool(np.linalg.norm(pg) < tol_opt)
            message = "line_search_failure"
            break
        g_new = gval(x_new)
        s = x_new - x
        y = g_new - g
        sy = s @ y
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            rho = 1.0 / sy
            v = np.eye(n) - rho * np.outer(s, y)
            hinv = v @ hinv @ v.T + rho * np.outer(s, s)
        x, fx, g = x_new, f_new, g_new
    return SolveResult(
        x=x, objective=fx, feasibility=0.0, iterations=it,
        n_evals=clock.evals, solve_time=clock.elapsed() - t_start,
        wall_time=clock.wall() - wall_start, converged=converged,
        seed=seed, message=message)


@dataclass
class AuglagOptions:
    """Augmented-Lagrangian settings (defaults match the shipped configs)."""

    tol_feas: float = 1e-6
    tol_opt: float = 1e-6
    rho_init: float = 10.0
    rho_factor: float = 10.0
    rho_max: float = 1e8
    max_outer: int = 25
    inner_max_iter: int = 40
    fd_step: float = 1e-6
    cutoff: Optional[float] = None
    clock_mode: str = "counted"
    eval_seconds: float = 1e-6
    objective_scale: Optional[float] = None  # None: 1 / max(1, ||grad_f * span||_inf)


def augmented_lagrangian_solve(problem, x0, opts=None, seed=None, clock=None):
    """Equality-constrained solve: multiplier/penalty outer loop, projected
    Gauss-Newton inner minimization of the augmented Lagrangian.

    L_A(x) = s J(x) + lambda^T c(x) + (rho/2) ||c(x)||^2 on the problem box
    (s an internal objective scale balancing units). Variables are scaled to
    the unit box; each inner iteration finite-differences the constraint
    Jacobian once, assembles the exact L_A gradient from it, and takes a
    damped two-metric projection step (Gauss-Newton on the free coordinates,
    steepest descent on the bound-active ones) with an Armijo line search.
    Multipliers update as lambda += rho c when feasibility is on target; the
    penalty grows by rho_factor (capped at rho_max) when it stalls. Converged
    iff ||c||_inf < tol_feas and the projected-gradient norm of the scaled
    Lagrangian (updated multipliers) < tol_opt. A cutoff ends the solve early
    with the current iterate and converged=False.
    """
    if opts is None:
        opts = AuglagOptions()
    if clock is None:
        clock = WorkClock(eval_seconds=opts.eval_seconds, mode=opts.clock_mode)
    t_start = clock.elapsed()
    wall_start = clock.wall()

    # solve in unit-box variables: z = (x - lo) / span, degenerate spans pinned
    lo = problem.bounds[:, 0]
    span = problem.bounds[:, 1] - lo
    fixed = span <= 0.0
    span_safe = np.where(fixed, 1.0, span)
    hi_z = np.where(fixed, 0.0, 1.0)

    def to_x(z):
        return lo + z * span_safe

    def to_z(x):
        return np.clip(np.where(fixed, 0.0, (x - lo) / span_safe), 0.0, 1.0)

    def project(z):
        return np.clip(z, 0.0, hi_z)

    def eq_residual(z):
        clock.charge()
        return evaluate_constraints(problem, to_x(z))[0]

    def objective(z):
        return evaluate_objective(problem, to_x(z))

    def grad_objective_z(z):
        if problem.gradient is not None:
            gx = np.asarray(problem.gradient(to_x(z)), dtype=float)
        else:
            clock.charge(2 * problem.n)
            x = to_x(z)
            gx = finite_diff_gradient(lambda w: evaluate_objective(problem, w), x,
                                      opts.fd_step * np.maximum(1.0, np.abs(x)))
        return gx * span_safe

    z = to_z(problem.clip_to_bounds(np.asarray(x0, dtype=float)))
    m_eq = problem.eq_constraint_count
    lam = np.zeros(m_eq)
    rho = opts.rho_init
    fscale = opts.objective_scale
    if fscale is None:
        g0 = grad_objective_z(z)
        fscale = 1.0 / max(1.0, float(np.max(np.abs(g0))))

    def l_value(z, c):
        return fscale * objective(z) + lam @ c + 0.5 * rho * (c @ c)

    history = []
    c = eq_residual(z)
    feas = float(np.max(np.abs(c))) if c.size else 0.0
    feas_prev = feas
    stationarity = np.inf
    converged = False
    message = "max_outer"
    omega = max(opts.tol_opt, 1e-2)  # inner stationarity target, tightened per outer
    mu = 1e-2  # Levenberg damping, adapted multiplicatively
    it_total = 0
    jac = None
    for outer in range(1, opts.max_outer + 1):
        if opts.cutoff is not None and clock.elapsed() - t_start > opts.cutoff:
            message = "cutoff"
            break
        hit_cutoff = False
        for _ in range(opts.inner_max_iter):
            if opts.cutoff is not None and clock.elapsed() - t_start > opts.cutoff:
                hit_cutoff = True
                break
            it_total += 1
            if problem.eq_jacobian is not None:
                # structure-aware Jacobian in x units; convert to z space
                clock.charge(2 * problem.n)
                jac_x = problem.eq_jacobian(to_x(z), opts.fd_step * span_safe)
                jac = jac_x * span_safe[None, :]
            else:
                # eq_residual charges the clock per call (2n inside the Jacobian)
                jac = finite_diff_jacobian(eq_residual, z, opts.fd_step)
            c = eq_residual(z)
            grad = fscale * grad_objective_z(z) + jac.T @ (lam + rho * c)
            pg = z - project(z - grad)
            if np.linalg.norm(pg) < max(omega, opts.tol_opt):
                break
            active = fixed | ((z <= 1e-12) & (grad > 0)) | ((z >= hi_z - 1e-12) & (grad < 0))
            free = ~active
            d = -grad.copy()
            if np.any(free):
                jf = jac[:, free]
                h_ff = rho * (jf.T @ jf) + mu * np.eye(int(free.sum()))
                try:
                    d[free] = np.linalg.solve(h_ff, -grad[free])
                except np.linalg.LinAlgError:
                    d[free] = -grad[free]
            l0 = l_value(z, c)
            step, accepted = 1.0, False
            while step > 1e-13:
                z_new = project(z + step * d)
                c_new = eq_residual(z_new)
                l_new = l_value(z_new, c_new)
                descent = grad @ (z_new - z)
                if np.isfinite(l_new) and descent < 0 and l_new <= l0 + ARMIJO_C * descent:
                    accepted = True
                    break
                step *= 0.5
            if not accepted:
                mu = min(mu * 10.0, 1e8)
                if mu >= 1e8:
                    break
                continue
            z, c = z_new, c_new
            mu = max(mu * (0.5 if step == 1.0 else 2.0), 1e-10)
        feas = float(np.max(np.abs(c))) if c.size else 0.0
        # stationarity of the Lagrangian with first-order updated multipliers
        lam_trial = lam + rho * c
        grad_l = fscale * grad_objective_z(z) + (jac.T @ lam_trial if jac is not None else 0.0)
        stationarity = float(np.linalg.norm(z - project(z - grad_l)))
        history.append({"outer": outer, "feasibility": feas, "rho": rho,
                        "stationarity": stationarity})
        if feas < opts.tol_feas and stationarity < opts.tol_opt:
            lam = lam_trial
            converged = True
            message = "kkt"
            break
        if hit_cutoff:
            message = "cutoff"
            break
        if feas <= max(opts.tol_feas, 0.33 * feas_prev) or outer == 1:
            lam = lam_trial
        else:
            rho = min(rho * opts.rho_factor, opts.rho_max)
        omega = max(opts.tol_opt, omega * 0.2)
        feas_prev = min(feas_prev, feas) if outer > 1 else feas
    x = to_x(z)
    obj = objective(z)
    return SolveResult(
        x=x, objective=obj, feasibility=feas, iterations=it_total,
        n_evals=clock.evals, solve_time=clock.elapsed() - t_start,
        wall_time=clock.wall() - wall_start, converged=converged,
        seed=seed, message=message, history=history)


def solve_problem(problem, x0, opts=None, seed=None, cutoff=None,
                  clock_mode="counted", tol_opt=1e-8, max_iter=500):
    """Dispatch: unconstrained problems go to BFGS, equality-constrained to AL."""
    if problem.eq_constraint_count == 0:
        clock = WorkClock(eval_seconds=problem.eval_seconds, mode=clock_mode)
        res = bfgs_minimize(problem.objective if problem.gradient else
                            lambda z: evaluate_objective(problem, z),
                            problem.gradient, x0, problem.bounds,
                            tol_opt=tol_opt, max_iter=max_iter,
                            cutoff=cutoff, clock=clock, seed=seed)
        res.objective = evaluate_objective(problem, res.x)
        return res
    if opts is None:
        opts = AuglagOptions()
    opts.cutoff = cutoff
    opts.clock_mode = clock_mode
    opts.eval_seconds = problem.eval_seconds
    return augmented_lagrangian_solve(problem, x0, opts, seed=seed)


def kkt_residual(problem, x, h=1e-6):
    """Projected KKT residual with least-squares multipliers (FD Jacobian)."""
    x = np.asarray(x, dtype=float)
    if problem.gradient is not None:
        g = np.asarray(problem.gradient(x), dtype=float)
    else:
        g = finite_diff_gradient(lambda z: evaluate_objective(problem, z), x, h)
    if problem.eq_constraint_count:
        jac = np.empty((problem.eq_constraint_count, x.size))
        hv = h * np.maximum(1.0, np.abs(x))
        for i in range(x.size):
            xp = x.copy(); xp[i] += hv[i]
            xm = x.copy(); xm[i] -= hv[i]
            jac[:, i] = (evaluate_constraints(problem, xp)[0]
                         - evaluate_constraints(problem, xm)[0]) / (2.0 * hv[i])
        lam, *_ = np.linalg.lstsq(jac.T, -g, rcond=None)
        r = g + jac.T @ lam
    else:
        r = g
    at_lo = np.isclose(x, problem.bounds[:, 0])
    at_hi = np.isclose(x, problem.bounds[:, 1])
    r = r.copy()
    r[at_lo & (r > 0)] = 0.0
    r[at_hi & (r < 0)] = 0.0
    return float(np.max(np.abs(r))) if r.size else 0.0
