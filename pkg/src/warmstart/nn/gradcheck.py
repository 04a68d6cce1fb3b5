"""Central finite-difference verification of backpropagated gradients."""

from __future__ import annotations

import numpy as np


def gradient_check(loss_fn, params, eps=1e-6, n_coords=50, seed=0, rel_floor=1e-6):
    """Compare analytic gradients against central differences.

    loss_fn() must rebuild the forward pass from the current parameter data
    and return a scalar Tensor. A random subset of at least `n_coords`
    coordinates is probed across all parameters. Returns the maximum relative
    error max |g_fd - g_an| / max(|g_fd|, |g_an|, rel_floor).
    """
    rng = np.random.default_rng(seed)
    loss = loss_fn()
    for _, p in params:
        p.grad = None
    loss.backward()
    analytic = {i: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
                for i, (_, p) in enumerate(params)}

    flat = [(i, j) for i, (_, p) in enumerate(params) for j in range(p.data.size)]
    if len(flat) > n_coords:
        picks = rng.choice(len(flat), size=n_coords, replace=False)
        probe = [flat[k] for k in picks]
    else:
        probe = flat

    worst = 0.0
    for i, j in probe:
        _, p = params[i]
        orig = p.data.flat[j]
        p.data.flat[j] = orig + eps
        f_plus = loss_fn().item()
        p.data.flat[j] = orig - eps
        f_minus = loss_fn().item()
        p.data.flat[j] = orig
        g_fd = (f_plus - f_minus) / (2.0 * eps)
        g_an = analytic[i].flat[j]
        err = abs(g_fd - g_an) / max(abs(g_fd), abs(g_an), rel_floor)
        worst = max(worst, err)
    return worst
