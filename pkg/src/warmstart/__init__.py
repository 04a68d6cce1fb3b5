"""Warm-started global search over parameterized optimization problems.

Collect locally optimal solutions of a problem family, fit a conditional
generative sampler (CVAE with a Gaussian-mixture latent prior, plus an
LSTM-based control-sequence model), and warm-start multistart search on
unseen parameter values.
"""

__version__ = "0.1.0"
