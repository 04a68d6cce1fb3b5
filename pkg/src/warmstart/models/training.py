"""Mini-batch Adam training for the CVAE and control model, jointly or alone.

One optimizer step consumes elbo + w * control_mse and updates both models
when both are given; either model may also be trained on its own. Everything
is deterministic for a fixed seed (shuffling and reparameterization noise
come from one generator).
"""

from __future__ import annotations

import numpy as np

from .. import nn
from ..nn import tensor as T
from ..nn.tensor import Tensor
from .cvae import elbo_terms
from .control import control_loss

DIVERGENCE_LIMIT = 1e6


def train_models(cvae, x_norm, alphas, control=None, control_inputs=None,
                 control_targets=None, epochs=10, batch_size=256,
                 learning_rate=1e-3, seed=0, control_weight=1.0, verbose=False):
    """Train whichever of (cvae, control) are provided; returns the loss curve.

    x_norm: normalized solutions (n, d); alphas: (n, 1). control_inputs (n, 5)
    and control_targets (n, N, 3) are already normalized. Rows must align
    across all arrays (they come from the same dataset records).
    """
    if cvae is None and control is None:
        raise ValueError("nothing to train")
    n = x_norm.shape[0] if x_norm is not None else control_inputs.shape[0]
    params = []
    if cvae is not None:
        params.extend(cvae.parameters())
    if control is not None:
        params.extend(control.parameters())
    opt = nn.Adam(params, lr=learning_rate)
    rng = np.random.default_rng(seed)
    curve = []
    for epoch in range(epochs):
        order = rng.permutation(n)
        totals = np.zeros(4)
        n_batches = 0
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            terms = []
            recon_v = mix_v = cat_v = ctrl_v = 0.0
            if cvae is not None:
                xb = Tensor(x_norm[idx])
                ab = Tensor(alphas[idx])
                eps = Tensor(rng.standard_normal((len(idx), cvae.latent_dim)))
                recon, mix_kl, cat_kl = elbo_terms(cvae, xb, ab, eps)
                terms.append(T.add(T.add(recon, mix_kl), cat_kl))
                recon_v, mix_v, cat_v = float(recon.data), float(mix_kl.data), float(cat_kl.data)
            if control is not None:
                cb = Tensor(control_inputs[idx])
                tb = Tensor(control_targets[idx])
                closs = control_loss(control(cb), tb)
                terms.append(T.mul(closs, control_weight))
                ctrl_v = float(closs.data)
            loss = terms[0] if len(terms) == 1 else T.add(terms[0], terms[1])
            if not np.isfinite(loss.data) or float(loss.data) > DIVERGENCE_LIMIT:
                raise FloatingPointError(
                    f"training diverged at epoch {epoch}: loss={float(loss.data)}")
            opt.zero_grad()
            loss.backward()
            opt.step()
            totals += (float(loss.data), recon_v, mix_v + cat_v, ctrl_v)
            n_batches += 1
        avg = totals / max(n_batches, 1)
        curve.append({"epoch": epoch, "loss": avg[0], "recon": avg[1],
                      "kl": avg[2], "control": avg[3]})
        if verbose:
            print(f"epoch {epoch}: loss {avg[0]:.5f} recon {avg[1]:.5f} "
                  f"kl {avg[2]:.5f} control {avg[3]:.5f}")
    return curve
