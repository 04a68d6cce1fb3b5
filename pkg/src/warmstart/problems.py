"""Parameterized problem family shared by the benchmarks, solvers and search.

A problem instance is min J(x; alpha) subject to eq(x; alpha) = 0,
ineq(x; alpha) <= 0 and box bounds on x. Instances are immutable after
construction and safe to share across concurrent solver workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


class EvaluationError(ValueError):
    """Raised for dimension mismatches or non-finite inputs."""


@dataclass(frozen=True)
class ProblemParameter:
    """Problem parameter alpha with its declared bounds."""

    value: np.ndarray
    lo: np.ndarray
    hi: np.ndarray

    @staticmethod
    def scalar(value, lo, hi):
        p = ProblemParameter(np.atleast_1d(np.asarray(value, dtype=float)),
                             np.atleast_1d(np.asarray(lo, dtype=float)),
                             np.atleast_1d(np.asarray(hi, dtype=float)))
        p.validate()
        return p

    def validate(self):
        if np.any(self.value < self.lo) or np.any(self.value > self.hi):
            raise ValueError(f"alpha {self.value} outside bounds [{self.lo}, {self.hi}]")

    def item(self):
        return float(self.value[0])


@dataclass(frozen=True)
class ProblemInstance:
    """One member of the parameterized family.

    `objective` and `constraints` close over alpha. `gradient` is optional
    (analytic); solvers fall back to finite differences when absent.
    `init_sampler(rng) -> x` overrides plain per-coordinate uniform sampling
    when the family prescribes a structured draw (e.g. control angles).
    """

    name: str
    n: int
    bounds: np.ndarray
    alpha: ProblemParameter
    objective: Callable[[np.ndarray], float]
    constraints: Optional[Callable[[np.ndarray], tuple]] = None
    gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None
    eq_constraint_count: int = 0
    ineq_constraint_count: int = 0
    init_sampler: Optional[Callable[[np.random.Generator], np.ndarray]] = None
    verifier: Optional[Callable[[np.ndarray], np.ndarray]] = None
    eq_jacobian: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    eval_seconds: float = 1e-6
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        b = np.asarray(self.bounds, dtype=float)
        if b.shape != (self.n, 2):
            raise ValueError(f"bounds must be ({self.n}, 2), got {b.shape}")
        if np.any(b[:, 0] > b[:, 1]):
            raise ValueError("lower bound exceeds upper bound")
        object.__setattr__(self, "bounds", b)

    def clip_to_bounds(self, x):
        """Single clamping path shared by every initialization source."""
        return np.clip(np.asarray(x, dtype=float), self.bounds[:, 0], self.bounds[:, 1])


def _check_x(problem, x):
    x = np.asarray(x, dtype=float)
    if x.shape != (problem.n,):
        raise EvaluationError(f"{problem.name}: expected x of shape ({problem.n},), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise EvaluationError(f"{problem.name}: non-finite entries in x")
    return x


def evaluate_objective(problem, x):
    """J(x; alpha). Deterministic; non-finite results signal invalid input."""
    x = _check_x(problem, x)
    val = float(problem.objective(x))
    if not np.isfinite(val):
        raise EvaluationError(f"{problem.name}: objective is non-finite at x={x}")
    return val


def evaluate_constraints(problem, x):
    """(eq, ineq) residual vectors; eq targets 0, ineq feasible iff <= 0."""
    x = _check_x(problem, x)
    if problem.constraints is None:
        eq = np.zeros(0)
        ineq = np.zeros(0)
    else:
        eq, ineq = problem.constraints(x)
        eq = np.atleast_1d(np.asarray(eq, dtype=float))
        ineq = np.atleast_1d(np.asarray(ineq, dtype=float)) if np.size(ineq) else np.zeros(0)
    if eq.shape != (problem.eq_constraint_count,):
        raise EvaluationError(f"{problem.name}: eq constraint count {eq.shape} != "
                              f"{problem.eq_constraint_count}")
    if ineq.shape != (problem.ineq_constraint_count,):
        raise EvaluationError(f"{problem.name}: ineq constraint count mismatch")
    return eq, ineq


def sample_uniform_init(problem, seed):
    """Draw one initialization, i.i.d. uniform per coordinate within bounds.

    Deterministic for a fixed seed. Problems with a structured sampler
    (angle/magnitude control draws) use it; the result still passes through
    the shared bound clamp.
    """
    rng = np.random.default_rng(seed)
    if problem.init_sampler is not None:
        x = problem.init_sampler(rng)
    else:
        lo, hi = problem.bounds[:, 0], problem.bounds[:, 1]
        if not np.all(np.isfinite(lo)) or not np.all(np.isfinite(hi)):
            raise EvaluationError(f"{problem.name}: unbounded coordinate, cannot sample")
        x = rng.uniform(lo, hi)
    return problem.clip_to_bounds(x)
