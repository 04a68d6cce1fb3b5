"""Autoencoder-based control-sequence model: (times, mass, alpha) -> u_1..u_N.

A dense encoder embeds the 5 scalars; the embedding is tiled across the N
segments and decoded by a 3-layer bidirectional LSTM with a per-step linear
projection to the 3 throttle components. The map is deterministic: one
control profile per (times, mass, alpha) input.
"""

from __future__ import annotations

import warnings

import numpy as np
from sklearn.base import BaseEstimator

from .. import nn
from ..nn import tensor as T
from ..nn.tensor import Tensor
from ..pipeline.normalize import MinMaxNormalizer

ENCODER_SIZES = [5, 512, 512, 512]
LSTM_HIDDEN = 512
LSTM_LAYERS = 3


class ControlNet(nn.Module):
    """Encoder [5,512,512,512] + 3-layer bidirectional LSTM + 3-unit projection."""

    def __init__(self, n_segments, rng=None, encoder_sizes=None,
                 lstm_hidden=LSTM_HIDDEN, lstm_layers=LSTM_LAYERS):
        if rng is None:
            rng = np.random.default_rng(0)
        self.n_segments = n_segments
        sizes = list(encoder_sizes or ENCODER_SIZES)
        self.encoder = nn.MLP(sizes, rng=rng)
        self.lstm = nn.LSTM(sizes[-1], lstm_hidden, n_layers=lstm_layers,
                            bidirectional=True, rng=rng)
        self.proj = nn.Dense(2 * lstm_hidden, 3, activation="identity", rng=rng)

    def __call__(self, inputs):
        """inputs (B, 5) normalized -> (B, N, 3) normalized control sequence."""
        emb = self.encoder(inputs)
        tiled = T.stack([emb] * self.n_segments, axis=1)
        hidden = self.lstm(tiled)
        return self.proj(hidden)


def control_forward(net, inputs):
    """Forward pass alias matching the module operation naming."""
    return net(inputs)


def control_loss(pred, target):
    """Mean squared error over every (segment, component) entry."""
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    diff = T.sub(pred, target)
    return T.tmean(T.mul(diff, diff))


def clamp_rows_to_unit_ball(u):
    """Scale control rows with norm > 1 onto the unit sphere (direction kept)."""
    u = np.asarray(u, dtype=float).copy()
    norms = np.linalg.norm(u, axis=-1, keepdims=True)
    scale = np.where(norms > 1.0, 1.0 / np.maximum(norms, 1e-300), 1.0)
    return u * scale


class ControlGenerator(BaseEstimator):
    """sklearn-style estimator for the deterministic control-sequence map.

    fit() consumes raw inputs (n, 5) = (dt_shooting, dt_coast_initial,
    dt_coast_final, m_f, alpha) and raw control sequences (n, N, 3); both are
    min-max normalized internally. predict() denormalizes and clamps each
    segment's throttle to the unit ball.
    """

    def __init__(self, n_segments=6, epochs=10, batch_size=32,
                 learning_rate=1e-3, seed=0, margin=0.01, verbose=False):
        self.n_segments = n_segments
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.seed = seed
        self.margin = margin
        self.verbose = verbose

    def fit(self, inputs, controls):
        from .training import train_models

        inputs = np.asarray(inputs, dtype=float)
        controls = np.asarray(controls, dtype=float)
        n = inputs.shape[0]
        if controls.shape != (n, self.n_segments, 3):
            raise ValueError(f"controls must be (n, {self.n_segments}, 3), "
                             f"got {controls.shape}")
        self.input_norm_ = MinMaxNormalizer(margin=self.margin).fit(inputs)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # planar u_z is a degenerate coordinate
            self.output_norm_ = MinMaxNormalizer(margin=self.margin).fit(
                controls.reshape(n, -1))
        rng = np.random.default_rng(self.seed)
        self.net_ = ControlNet(self.n_segments, rng=rng)
        self.loss_curve_ = train_models(
            None, None, None, control=self.net_,
            control_inputs=self.input_norm_.transform(inputs),
            control_targets=self.output_norm_.transform(
                controls.reshape(n, -1)).reshape(n, self.n_segments, 3),
            epochs=self.epochs, batch_size=self.batch_size,
            learning_rate=self.learning_rate, seed=self.seed, verbose=self.verbose)
        return self

    def predict(self, inputs):
        """Raw (n, 5) inputs -> clamped control sequences (n, N, 3)."""
        inputs = np.asarray(inputs, dtype=float)
        xn = Tensor(self.input_norm_.transform(np.atleast_2d(inputs)))
        out = self.net_(xn).data
        flat = out.reshape(out.shape[0], -1)
        raw = self.output_norm_.inverse_transform(flat).reshape(out.shape)
        return clamp_rows_to_unit_ball(raw)
