"""Rotated De Jong's 5th benchmark: 8 local minima in 2 clusters.

The base minima matrix is rotated by the problem parameter alpha; the
objective is the inverse-sum form with 6th-power wells. The analytic
gradient and a descent-refined ground-truth minima oracle are provided.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .problems import ProblemInstance, ProblemParameter

# Base minima locations (columns), two clusters of four.
BASE_MINIMA = np.array([
    [-32.0, -32.0, -28.0, -28.0, 12.0, 12.0, 18.0, 18.0],
    [32.0, 28.0, 32.0, 28.0, -12.0, -18.0, -12.0, -18.0],
])
CLUSTER_LABELS = np.array([0, 0, 0, 0, 1, 1, 1, 1])
DOMAIN = np.array([[-50.0, 50.0], [-50.0, 50.0]])
ALPHA_RANGE = (0.0, np.pi / 2.0)


@dataclass(frozen=True)
class MinimaMatrix:
    """Base minima `a` and their rotation `a_bar` for one alpha."""

    alpha: float
    a: np.ndarray
    a_bar: np.ndarray


def rotate_minima(alpha):
    """Rotate the base minima by alpha (radians, clamped to [0, pi/2])."""
    lo, hi = ALPHA_RANGE
    if alpha < lo or alpha > hi:
        warnings.warn(f"alpha={alpha} outside [0, pi/2]; clamping", stacklevel=2)
        alpha = min(max(alpha, lo), hi)
    c, s = np.cos(alpha), np.sin(alpha)
    rot = np.array([[c, -s], [s, c]])
    return MinimaMatrix(alpha=alpha, a=BASE_MINIMA.copy(), a_bar=rot @ BASE_MINIMA)


def dejong5_value(x, minima):
    """(0.002 + sum_i 1 / (1 + (x1-a1i)^6 + (x2-a2i)^6))^-1; strictly positive."""
    x = np.asarray(x, dtype=float)
    d1 = x[0] - minima.a_bar[0]
    d2 = x[1] - minima.a_bar[1]
    return 1.0 / (0.002 + np.sum(1.0 / (1.0 + d1 ** 6 + d2 ** 6)))


def dejong5_gradient(x, minima):
    """Exact gradient of dejong5_value."""
    x = np.asarray(x, dtype=float)
    d1 = x[0] - minima.a_bar[0]
    d2 = x[1] - minima.a_bar[1]
    denom = 1.0 + d1 ** 6 + d2 ** 6
    val = 1.0 / (0.002 + np.sum(1.0 / denom))
    w = 6.0 / (denom * denom)
    return val * val * np.array([np.sum(w * d1 ** 5), np.sum(w * d2 ** 5)])


def _newton_polish(x, minima, tol, max_steps=25):
    """Drive the analytic gradient to zero with Newton steps (FD Hessian).

    BFGS stalls near these minima because the wells are 6th-order flat and
    objective differences fall below double resolution; Newton on the exact
    gradient has no such floor.
    """
    h = 1e-6
    g_norm = np.linalg.norm(dejong5_gradient(x, minima))
    for _ in range(max_steps):
        if g_norm < tol:
            return x
        g = dejong5_gradient(x, minima)
        hess = np.empty((2, 2))
        for i in range(2):
            xp = x.copy(); xp[i] += h
            xm = x.copy(); xm[i] -= h
            hess[:, i] = (dejong5_gradient(xp, minima) - dejong5_gradient(xm, minima)) / (2 * h)
        try:
            step = np.linalg.solve(hess, -g)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(step)) or np.linalg.norm(step) > 0.5:
            break
        # accept only ||g||-reducing steps, damping as needed
        scale = 1.0
        while scale > 1e-4:
            cand = x + scale * step
            cand_norm = np.linalg.norm(dejong5_gradient(cand, minima))
            if cand_norm < g_norm:
                x, g_norm = cand, cand_norm
                break
            scale *= 0.5
        else:
            break
    if g_norm >= tol:
        raise RuntimeError("Newton polish failed to reach gradient tolerance")
    return x


def ground_truth_minima(alpha, tol=1e-10, max_iter=200):
    """Descent-refined minima for one alpha: (8, 2) points + cluster labels.

    Each rotated column seeds a bounded BFGS descent plus a Newton polish;
    the 6th-power cross terms shift the true minima slightly off the rotated
    columns, so refinement makes the oracle exact rather than approximate.
    """
    from .solvers import bfgs_minimize

    m = rotate_minima(alpha)
    points = np.empty((8, 2))
    for j in range(8):
        res = bfgs_minimize(lambda x: dejong5_value(x, m),
                            lambda x: dejong5_gradient(x, m),
                            m.a_bar[:, j], DOMAIN, tol_opt=1e-6, max_iter=max_iter)
        points[j] = _newton_polish(res.x, m, tol)
    return points, CLUSTER_LABELS.copy()


def find_minima_by_grid(alpha, grid_n=100, tol=1e-8, merge_tol=1e-3, max_iter=200):
    """Enumerate minima by descent from a regular grid; duplicates merged.

    Independent of ground_truth_minima (no knowledge of the columns); used as
    a cross-check oracle and as the exhaustive collection recipe.
    """
    from .solvers import bfgs_minimize

    m = rotate_minima(alpha)
    lo, hi = DOMAIN[0]
    pts = np.linspace(lo, hi, grid_n)
    found = []
    for gx in pts:
        for gy in pts:
            res = bfgs_minimize(lambda x: dejong5_value(x, m),
                                lambda x: dejong5_gradient(x, m),
                                np.array([gx, gy]), DOMAIN, tol_opt=tol, max_iter=max_iter)
            if not res.converged:
                continue
            for p in found:
                if np.linalg.norm(p - res.x) < merge_tol:
                    break
            else:
                found.append(res.x)
    return np.array(found)


def make_problem(alpha):
    """ProblemInstance for one rotation alpha (unconstrained, box domain)."""
    m = rotate_minima(alpha)
    return ProblemInstance(
        name="dejong5",
        n=2,
        bounds=DOMAIN.copy(),
        alpha=ProblemParameter.scalar(alpha, *ALPHA_RANGE),
        objective=lambda x: dejong5_value(x, m),
        gradient=lambda x: dejong5_gradient(x, m),
        eval_seconds=2e-6,
        extras={"minima": m},
    )
