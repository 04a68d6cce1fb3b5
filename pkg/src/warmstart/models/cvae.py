"""Conditional VAE with a Gaussian-mixture latent prior.

The encoder embeds the (normalized) solution x and the problem parameter
alpha separately, concatenates, and maps to a diagonal-Gaussian posterior
over the latent z. The prior over z is a K-component diagonal GMM whose
weights, means and variances are either free constants (parameter-
independent case) or heads of a small network of alpha. Sampling draws
c ~ Cat(pi_alpha), z ~ N(mu_c, sigma_c^2 I), x = decoder(z, alpha).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .. import nn
from ..nn import tensor as T
from ..nn.tensor import Tensor
from ..pipeline.normalize import MinMaxNormalizer

LOG_2PI = float(np.log(2.0 * np.pi))
VAR_FLOOR = 1e-6

ARCHITECTURES = {
    "dejong": {
        "embed_x": [2, 32, 64, 64],
        "embed_alpha": [1, 32, 64, 64],
        "encode": [128, 64, 64],
        "head": [64, 32, 2],
        "embed_z": [2, 32, 64, 64],
        "decode": [128, 64, 64, 2],
        "latent_dim": 2,
        "n_components": 2,
        "alpha_dependent_prior": False,
    },
    "cr3bp": {
        "embed_x": [4, 1024, 1024, 1024, 1024],
        "embed_alpha": [1, 256, 256, 256, 256],
        "encode": [1280, 512, 512, 512, 128],
        "head": [128, 128, 128, 4],
        "embed_z": [4, 1024, 1024, 1024, 1024],
        "decode": [1280, 512, 512, 512, 4],
        "latent_dim": 4,
        "n_components": 20,
        "alpha_dependent_prior": True,
    },
}


class GmmPrior(nn.Module):
    """K-component diagonal-Gaussian latent prior, optionally a function of alpha."""

    def __init__(self, n_components, latent_dim, alpha_dependent=False,
                 hidden=64, rng=None, mean_init_scale=1.0):
        if rng is None:
            rng = np.random.default_rng(0)
        self.n_components = n_components
        self.latent_dim = latent_dim
        self.alpha_dependent = alpha_dependent
        if alpha_dependent:
            self.trunk = nn.MLP([1, hidden, hidden], rng=rng)
            self.head_logits = nn.Dense(hidden, n_components, activation="identity", rng=rng)
            self.head_means = nn.Dense(hidden, n_components * latent_dim,
                                       activation="identity", rng=rng)
            self.head_sigma = nn.Dense(hidden, n_components * latent_dim,
                                       activation="identity", rng=rng)
            # spread initial means so components do not start collapsed
            self.head_means.bias = Tensor(
                rng.normal(scale=mean_init_scale, size=n_components * latent_dim),
                requires_grad=True)
        else:
            self.logits = Tensor(np.zeros(n_components), requires_grad=True)
            self.means = Tensor(rng.normal(scale=mean_init_scale,
                                           size=(n_components, latent_dim)),
                                requires_grad=True)
            self.sigma_raw = Tensor(np.zeros((n_components, latent_dim)),
                                    requires_grad=True)

    def params_for(self, alpha):
        """(log_pi, means, variances) tensors for a batch of alphas.

        Shapes: log_pi (B, K) or (K,); means/variances (B, K, m) or (K, m).
        """
        k, m = self.n_components, self.latent_dim
        if self.alpha_dependent:
            h = self.trunk(alpha)
            logits = self.head_logits(h)
            log_pi = T.sub(logits, T.logsumexp(logits, axis=1, keepdims=True))
            b = alpha.shape[0]
            means = T.reshape(self.head_means(h), (b, k, m))
            var = T.add(T.softplus(T.reshape(self.head_sigma(h), (b, k, m))), VAR_FLOOR)
            return log_pi, means, var
        log_pi = T.sub(self.logits, T.logsumexp(T.reshape(self.logits, (1, k)), axis=1)[0])
        var = T.add(T.softplus(self.sigma_raw), VAR_FLOOR)
        return log_pi, self.means, var

    def numpy_params(self, alpha_value):
        """Prior parameters as arrays for one scalar alpha (sampling path)."""
        alpha_t = Tensor(np.array([[float(alpha_value)]]))
        log_pi, means, var = self.params_for(alpha_t)
        if self.alpha_dependent:
            return (np.exp(log_pi.data[0]), means.data[0], var.data[0])
        return (np.exp(log_pi.data), means.data, var.data)


class CvaeNet(nn.Module):
    """Encoder/decoder stacks sized exactly by the architecture table."""

    def __init__(self, architecture, rng=None, prior_hidden=64, mean_init_scale=1.0):
        if rng is None:
            rng = np.random.default_rng(0)
        arch = dict(architecture)
        self.arch = arch
        self.latent_dim = arch["latent_dim"]
        self.n_out = arch["decode"][-1]
        self.embed_x = nn.MLP(arch["embed_x"], rng=rng)
        self.embed_alpha = nn.MLP(arch["embed_alpha"], rng=rng)
        self.encode_stack = nn.MLP(arch["encode"], rng=rng)
        self.head_mu = nn.MLP(arch["head"], out_activation="identity", rng=rng)
        self.head_logvar = nn.MLP(arch["head"], out_activation="identity", rng=rng)
        self.embed_z = nn.MLP(arch["embed_z"], rng=rng)
        self.decode_stack = nn.MLP(arch["decode"], out_activation="sigmoid", rng=rng)
        self.prior = GmmPrior(arch["n_components"], arch["latent_dim"],
                              alpha_dependent=arch["alpha_dependent_prior"],
                              hidden=prior_hidden, rng=rng,
                              mean_init_scale=mean_init_scale)


def encode(model, x, alpha):
    """Posterior (mu, logvar) for normalized x (B, n) and alpha (B, 1)."""
    ex = model.embed_x(x)
    ea = model.embed_alpha(alpha)
    h = model.encode_stack(T.concat([ex, ea], axis=1))
    return model.head_mu(h), model.head_logvar(h)


def reparameterize(mu, logvar, eps):
    """z = mu + exp(logvar / 2) * eps with externally drawn eps ~ N(0, I)."""
    return T.add(mu, T.mul(T.exp(T.mul(logvar, 0.5)), eps))


def decode(model, z, alpha):
    """Reconstruction in [0, 1]^n from latent z (B, m) and alpha (B, 1)."""
    ez = model.embed_z(z)
    ea = model.embed_alpha(alpha)
    return model.decode_stack(T.concat([ez, ea], axis=1))


def gaussian_mixture_log_density(z, log_pi, means, var):
    """Per-component log(pi_c N(z; mu_c, var_c)): shape (B, K)."""
    b, m = z.shape
    z3 = T.reshape(z, (b, 1, m))
    diff = T.sub(z3, means)  # broadcasts over components (and batch if needed)
    quad = T.tsum(T.add(T.div(T.mul(diff, diff), var), T.add(T.log(var), LOG_2PI)),
                  axis=2)
    return T.sub(T.add(log_pi, T.mul(quad, -0.5)), 0.0)


def responsibilities(z, prior, alpha=None, prior_params=None):
    """Posterior component memberships gamma (B, K); rows sum to one."""
    if prior_params is None:
        if alpha is None:
            raise ValueError("alpha or prior_params required")
        prior_params = prior.params_for(alpha)
    log_pi, means, var = prior_params
    log_joint = gaussian_mixture_log_density(z, log_pi, means, var)
    log_gamma = T.sub(log_joint, T.logsumexp(log_joint, axis=1, keepdims=True))
    return T.exp(log_gamma), log_gamma, prior_params


def elbo_terms(model, x, alpha, eps):
    """Reconstruction, mixture-KL and category-KL terms, batch-averaged."""
    mu, logvar = encode(model, x, alpha)
    z = reparameterize(mu, logvar, eps)
    x_hat = decode(model, z, alpha)
    diff = T.sub(x_hat, x)
    recon = T.tsum(T.mul(diff, diff), axis=1)
    gamma, log_gamma, (log_pi, means, var) = responsibilities(z, model.prior, alpha)
    b, m = mu.shape
    k = model.prior.n_components
    mu3 = T.reshape(mu, (b, 1, m))
    sig2 = T.exp(logvar)
    sig23 = T.reshape(sig2, (b, 1, m))
    logvar3 = T.reshape(logvar, (b, 1, m))
    dmean = T.sub(mu3, means)
    kl_per = T.mul(T.tsum(T.add(T.sub(T.div(T.add(sig23, T.mul(dmean, dmean)), var),
                                      1.0),
                                T.sub(T.log(var), logvar3)), axis=2), 0.5)
    mixture_kl = T.tsum(T.mul(gamma, kl_per), axis=1)
    cat_kl = T.tsum(T.mul(gamma, T.sub(log_gamma, log_pi)), axis=1)
    return T.tmean(recon), T.tmean(mixture_kl), T.tmean(cat_kl)


def elbo_loss(model, x, alpha, seed=0):
    """Scalar training loss (negative ELBO up to constants) and gradients.

    x is the normalized batch (B, n); alpha is (B, 1). The reparameterization
    noise is drawn from `seed`. Returns (loss value, {param name: gradient}).
    """
    x = Tensor(np.atleast_2d(np.asarray(x, dtype=float)))
    alpha = Tensor(np.atleast_2d(np.asarray(alpha, dtype=float)))
    rng = np.random.default_rng(seed)
    eps = Tensor(rng.standard_normal((x.shape[0], model.latent_dim)))
    recon, mix_kl, cat_kl = elbo_terms(model, x, alpha, eps)
    loss = T.add(T.add(recon, mix_kl), cat_kl)
    if not np.isfinite(loss.data):
        raise FloatingPointError("non-finite ELBO loss")
    model.zero_grad()
    loss.backward()
    grads = {name: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
             for name, p in model.parameters()}
    return float(loss.data), grads


def sample_solutions(model, alpha_value, n, seed=0):
    """Draw n decoded samples at one alpha; returns (x in [0,1]^d, categories)."""
    rng = np.random.default_rng(seed)
    pi, means, var = model.prior.numpy_params(alpha_value)
    cats = rng.choice(model.prior.n_components, size=n, p=pi / pi.sum())
    z = means[cats] + np.sqrt(var[cats]) * rng.standard_normal((n, model.latent_dim))
    alpha_col = Tensor(np.full((n, 1), float(alpha_value)))
    x_hat = decode(model, Tensor(z), alpha_col)
    return x_hat.data.copy(), cats


class CvaeSampler(BaseEstimator):
    """sklearn-style estimator: fit on raw solutions, sample at new alphas.

    Parameters mirror the shipped configs; `architecture` selects one of the
    fixed layer tables ("dejong" or "cr3bp"). Normalization is fitted on the
    training data and stored for exact denormalization.
    """

    def __init__(self, architecture="dejong", epochs=60, batch_size=256,
                 learning_rate=1e-3, seed=0, margin=0.01, prior_hidden=64,
                 mean_init_scale=1.0, verbose=False):
        self.architecture = architecture
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.seed = seed
        self.margin = margin
        self.prior_hidden = prior_hidden
        self.mean_init_scale = mean_init_scale
        self.verbose = verbose

    def _build(self, rng):
        return CvaeNet(ARCHITECTURES[self.architecture], rng=rng,
                       prior_hidden=self.prior_hidden,
                       mean_init_scale=self.mean_init_scale)

    def fit(self, X, alpha):
        """Train on solutions X (n_samples, d) with per-row parameters alpha."""
        from .training import train_models

        X = np.asarray(X, dtype=float)
        alpha = np.asarray(alpha, dtype=float).reshape(-1, 1)
        if X.shape[0] != alpha.shape[0]:
            raise ValueError("X and alpha row counts differ")
        self.norm_ = MinMaxNormalizer(margin=self.margin).fit(X)
        rng = np.random.default_rng(self.seed)
        self.net_ = self._build(rng)
        self.loss_curve_ = train_models(
            self.net_, self.norm_.transform(X), alpha,
            epochs=self.epochs, batch_size=self.batch_size,
            learning_rate=self.learning_rate, seed=self.seed,
            verbose=self.verbose)
        return self

    def sample(self, alpha_value, n_samples, seed=0):
        """n denormalized predicted solutions at alpha; also returns categories."""
        x01, cats = sample_solutions(self.net_, alpha_value, n_samples, seed=seed)
        return self.norm_.inverse_transform(x01), cats
