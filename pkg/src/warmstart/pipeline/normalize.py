"""Min-max normalization to [0, 1] with a safety margin, sklearn-style."""

from __future__ import annotations

import warnings

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin


class MinMaxNormalizer(BaseEstimator, TransformerMixin):
    """Per-coordinate min-max scaling onto ~[margin, 1 - margin].

    The fitted range is widened by `margin` (fraction of the span) on both
    ends so Sigmoid-bounded model outputs can reach every data value.
    Degenerate coordinates (hi == lo) are widened by epsilon with a warning.
    transform/inverse_transform round-trip exactly.
    """

    def __init__(self, margin=0.01, epsilon=1e-9):
        self.margin = margin
        self.epsilon = epsilon

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[0] == 0:
            raise ValueError("expected a nonempty (n_samples, n_features) array")
        lo = X.min(axis=0)
        hi = X.max(axis=0)
        span = hi - lo
        degenerate = span <= 0
        if np.any(degenerate):
            warnings.warn(f"degenerate coordinates {np.where(degenerate)[0].tolist()} "
                          "widened by epsilon", stacklevel=2)
            lo = np.where(degenerate, lo - self.epsilon, lo)
            hi = np.where(degenerate, hi + self.epsilon, hi)
            span = hi - lo
        self.lo_ = lo - self.margin * span
        self.hi_ = hi + self.margin * span
        return self

    def transform(self, X):
        X = np.asarray(X, dtype=float)
        return (X - self.lo_) / (self.hi_ - self.lo_)

    def inverse_transform(self, X):
        X = np.asarray(X, dtype=float)
        return X * (self.hi_ - self.lo_) + self.lo_

    def bounds(self):
        """Fitted (lo, hi) pairs, e.g. for embedding in checkpoints."""
        return np.column_stack([self.lo_, self.hi_])

    @classmethod
    def from_bounds(cls, bounds, margin=0.01):
        bounds = np.asarray(bounds, dtype=float)
        norm = cls(margin=margin)
        norm.lo_ = bounds[:, 0].copy()
        norm.hi_ = bounds[:, 1].copy()
        return norm
