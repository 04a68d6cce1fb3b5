"""Multistart / basin-hopping global search and solve-time statistics.

The benchmark baseline is the global level of basin hopping: repeatedly draw
an initialization from a fixed distribution and hand it to the local solver.
Warm starting swaps the fixed distribution for a generative model's
predictions. The optional hop loop (local perturbation level) is off by
default.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .problems import sample_uniform_init
from .solvers import AuglagOptions, SolveResult, solve_problem

ROUND_SEED_STRIDE = 7919  # round seeds: master_seed + stride * round_index


@dataclass
class SearchRun:
    """One global-search run: n independent solves from one init source."""

    problem_name: str
    alpha: float
    init_source: str
    n_inits: int
    cutoff: Optional[float]
    seed: int
    results: list = field(default_factory=list)

    def good(self, threshold_mf=None):
        return filter_good(self.results, threshold_mf) if threshold_mf is not None \
            else [r for r in self.results if r.converged]


@dataclass
class SearchStats:
    """Count and solve-time quantiles over good solutions."""

    good_count: int
    threshold: Optional[float]
    mean: Optional[float] = None
    min: Optional[float] = None
    q25: Optional[float] = None
    q50: Optional[float] = None

    @property
    def empty(self):
        return self.good_count == 0

    def as_dict(self):
        return {"good_count": self.good_count, "threshold": self.threshold,
                "mean": self.mean, "min": self.min, "q25": self.q25, "q50": self.q50}


def task_seed(master_seed, index):
    """Per-task RNG stream seed; independent of worker scheduling."""
    return int(np.random.SeedSequence([int(master_seed), int(index)]).generate_state(1)[0])


def _make_init(problem, init_source, index, seed, init_pool=None):
    if init_source == "uniform":
        return sample_uniform_init(problem, task_seed(seed, index))
    if init_source in ("generative-model", "file"):
        if init_pool is None or index >= len(init_pool):
            raise ValueError(f"init source {init_source!r} exhausted at index {index}")
        return problem.clip_to_bounds(init_pool[index])
    raise ValueError(f"unknown init source {init_source!r}")


def multistart(problem, n, cutoff=None, seed=0, init_source="uniform",
               init_pool=None, solver_opts=None, tol_opt=1e-8, max_iter=500,
               clock_mode="counted", recheck=None, n_workers=1):
    """Run n independent local solves and collect every result.

    Each solve is seeded deterministically from (seed, index); the per-solve
    cutoff applies on the solver clock. `init_pool` supplies pre-drawn
    initializations for the generative-model and file sources (must contain
    at least n rows). `recheck` optionally re-verifies converged results with
    an independent evaluator (signature recheck(problem, x) -> bool);
    failures are demoted to converged=False.
    """
    if init_source != "uniform" and (init_pool is None or len(init_pool) < n):
        raise ValueError(f"init source {init_source!r} must supply >= {n} initializations")
    run = SearchRun(problem_name=problem.name, alpha=problem.alpha.item(),
                    init_source=init_source, n_inits=n, cutoff=cutoff, seed=seed)

    def solve_one(index):
        x0 = _make_init(problem, init_source, index, seed, init_pool)
        opts = None
        if solver_opts is not None:
            opts = AuglagOptions(**vars(solver_opts)) if isinstance(solver_opts, AuglagOptions) \
                else AuglagOptions(**solver_opts)
        res = solve_problem(problem, x0, opts=opts, seed=task_seed(seed, index),
                            cutoff=cutoff, clock_mode=clock_mode,
                            tol_opt=tol_opt, max_iter=max_iter)
        if res.converged and recheck is not None and not recheck(problem, res.x):
            res.converged = False
            res.message += "+recheck_failed"
        return index, res

    if n_workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        results = [None] * n
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            for index, res in pool.map(_solve_for_pool,
                                       [(problem, init_source, i, seed, init_pool,
                                         solver_opts, cutoff, clock_mode, tol_opt,
                                         max_iter, recheck) for i in range(n)]):
                results[index] = res
        run.results = results
    else:
        run.results = [solve_one(i)[1] for i in range(n)]
    return run


def _solve_for_pool(args):
    (problem, init_source, index, seed, init_pool, solver_opts, cutoff,
     clock_mode, tol_opt, max_iter, recheck) = args
    x0 = _make_init(problem, init_source, index, seed, init_pool)
    opts = None
    if solver_opts is not None:
        opts = AuglagOptions(**vars(solver_opts)) if isinstance(solver_opts, AuglagOptions) \
            else AuglagOptions(**solver_opts)
    res = solve_problem(problem, x0, opts=opts, seed=task_seed(seed, index),
                        cutoff=cutoff, clock_mode=clock_mode,
                        tol_opt=tol_opt, max_iter=max_iter)
    if res.converged and recheck is not None and not recheck(problem, res.x):
        res.converged = False
        res.message += "+recheck_failed"
    return index, res


def filter_good(results, threshold_mf=415.0):
    """Converged transfer results whose final mass meets the threshold.

    The objective encodes -m_f, so good means objective <= -threshold.
    Non-converged results are excluded regardless of mass.
    """
    return [r for r in results if r.converged and -r.objective >= threshold_mf]


def solve_time_stats(good_results, threshold=None):
    """Count, mean, min and linear-interpolation 25%/50% solve-time quantiles."""
    if not good_results:
        return SearchStats(good_count=0, threshold=threshold)
    times = np.array([r.solve_time for r in good_results], dtype=float)
    return SearchStats(
        good_count=len(times), threshold=threshold,
        mean=float(times.mean()), min=float(times.min()),
        q25=float(np.percentile(times, 25)), q50=float(np.percentile(times, 50)))


def mbh_search(problem, n_hops, perturbation="uniform-resample", scale=0.1,
               cutoff=None, seed=0, solver_opts=None, tol_opt=1e-8,
               max_iter=500, clock_mode="counted"):
    """Optional hop loop over an incumbent; improving hops are accepted.

    perturbation: "uniform-resample" (reduces to multistart), "gaussian"
    (sigma = scale * bound span) or "pareto" (long-tailed, shape = 1/scale,
    clamped back into the box).
    """
    if perturbation not in ("uniform-resample", "gaussian", "pareto"):
        raise ValueError(f"unknown perturbation {perturbation!r}")
    run = SearchRun(problem_name=problem.name, alpha=problem.alpha.item(),
                    init_source=f"mbh-{perturbation}", n_inits=n_hops,
                    cutoff=cutoff, seed=seed)
    span = problem.bounds[:, 1] - problem.bounds[:, 0]
    incumbent = None
    incumbent_obj = np.inf
    for index in range(n_hops):
        rng = np.random.default_rng(task_seed(seed, index))
        if perturbation == "uniform-resample" or incumbent is None:
            x0 = sample_uniform_init(problem, task_seed(seed, index))
        elif perturbation == "gaussian":
            x0 = problem.clip_to_bounds(incumbent + scale * span * rng.standard_normal(problem.n))
        else:
            signs = rng.choice([-1.0, 1.0], size=problem.n)
            jump = rng.pareto(1.0 / scale, size=problem.n) * 0.01 * span
            x0 = problem.clip_to_bounds(incumbent + signs * jump)
        opts = None
        if solver_opts is not None:
            opts = AuglagOptions(**vars(solver_opts)) if isinstance(solver_opts, AuglagOptions) \
                else AuglagOptions(**solver_opts)
        res = solve_problem(problem, x0, opts=opts, seed=task_seed(seed, index),
                            cutoff=cutoff, clock_mode=clock_mode,
                            tol_opt=tol_opt, max_iter=max_iter)
        run.results.append(res)
        if res.converged and res.objective < incumbent_obj:
            incumbent = res.x.copy()
            incumbent_obj = res.objective
    return run
