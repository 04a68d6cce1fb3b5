"""Dense stacks and a multi-layer bidirectional LSTM built on the autodiff tensor.

Layer widths are given as explicit size lists (``[in, h1, ..., out]``) so the
architecture tables used by the models can be written down verbatim. Hidden
activations are LeakyReLU(0.01) unless stated otherwise; the output activation
is per-stack ("identity", "sigmoid" or "leaky_relu").
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .tensor import Tensor

LEAKY_SLOPE = 0.01

_ACTIVATIONS = {
    "identity": lambda x: x,
    "sigmoid": T.sigmoid,
    "tanh": T.tanh,
    "leaky_relu": lambda x: T.leaky_relu(x, LEAKY_SLOPE),
    "softplus": T.softplus,
}


def glorot_uniform(rng, fan_in, fan_out, shape=None):
    """Uniform init in +-sqrt(6 / (fan_in + fan_out))."""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    if shape is None:
        shape = (fan_in, fan_out)
    return rng.uniform(-limit, limit, size=shape)


class Module:
    """Minimal parameter container; children are discovered by attribute scan."""

    def parameters(self):
        """Ordered list of (name, Tensor) pairs, recursing into child modules."""
        out = []
        for name, value in vars(self).items():
            if isinstance(value, Tensor) and value.requires_grad:
                out.append((name, value))
            elif isinstance(value, Module):
                out.extend((f"{name}.{sub}", p) for sub, p in value.parameters())
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        out.extend((f"{name}.{i}.{sub}", p) for sub, p in item.parameters())
                    elif isinstance(item, Tensor) and item.requires_grad:
                        out.append((f"{name}.{i}", item))
        return out

    def zero_grad(self):
        for _, p in self.parameters():
            p.grad = None

    def n_parameters(self):
        return sum(p.size for _, p in self.parameters())


class Dense(Module):
    """Affine layer y = x @ W + b with an elementwise activation."""

    def __init__(self, n_in, n_out, activation="leaky_relu", rng=None):
        if rng is None:
            rng = np.random.default_rng(0)
        self.n_in = n_in
        self.n_out = n_out
        self.activation = activation
        self.weight = Tensor(glorot_uniform(rng, n_in, n_out), requires_grad=True)
        self.bias = Tensor(np.zeros(n_out), requires_grad=True)

    def __call__(self, x):
        if x.shape[-1] != self.n_in:
            raise ValueError(f"dense layer expects feature dim {self.n_in}, got {x.shape}")
        out = T.add(T.matmul(x, self.weight), self.bias)
        return _ACTIVATIONS[self.activation](out)


class MLP(Module):
    """Stack of Dense layers; sizes per an architecture table row.

    ``sizes=[2, 32, 64]`` builds 2->32->64 with LeakyReLU on every layer
    except the last, which uses ``out_activation``.
    """

    def __init__(self, sizes, out_activation="leaky_relu", rng=None, hidden_activation="leaky_relu"):
        if rng is None:
            rng = np.random.default_rng(0)
        if len(sizes) < 2:
            raise ValueError("MLP needs at least [n_in, n_out]")
        self.sizes = list(sizes)
        self.layers = []
        for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
            last = i == len(sizes) - 2
            act = out_activation if last else hidden_activation
            self.layers.append(Dense(a, b, activation=act, rng=rng))

    def __call__(self, x):
        flat = None
        if x.ndim == 3:
            # apply the stack per (batch, time) element
            b, t, f = x.shape
            flat = (b, t)
            x = T.reshape(x, (b * t, f))
        for layer in self.layers:
            x = layer(x)
        if flat is not None:
            x = T.reshape(x, (flat[0], flat[1], x.shape[-1]))
        return x


class LstmCell(Module):
    """One LSTM direction: gates i, f, o = sigmoid, g = tanh."""

    def __init__(self, n_in, n_hidden, rng):
        self.n_in = n_in
        self.n_hidden = n_hidden
        self.w_x = Tensor(glorot_uniform(rng, n_in, 4 * n_hidden), requires_grad=True)
        self.w_h = Tensor(glorot_uniform(rng, n_hidden, 4 * n_hidden), requires_grad=True)
        self.bias = Tensor(np.zeros(4 * n_hidden), requires_grad=True)

    def step(self, x_pre, h, c):
        """One cell update from precomputed input projection x_pre = x @ w_x."""
        nh = self.n_hidden
        z = T.add(T.add(x_pre, T.matmul(h, self.w_h)), self.bias)
        i = T.sigmoid(z[:, 0 * nh:1 * nh])
        f = T.sigmoid(z[:, 1 * nh:2 * nh])
        g = T.tanh(z[:, 2 * nh:3 * nh])
        o = T.sigmoid(z[:, 3 * nh:4 * nh])
        c_new = T.add(T.mul(f, c), T.mul(i, g))
        h_new = T.mul(o, T.tanh(c_new))
        return h_new, c_new

    def run(self, x_seq, reverse=False):
        """Full pass over x_seq (batch, T, n_in); returns list of T hidden states."""
        b, t_len, _ = x_seq.shape
        pre = T.reshape(T.matmul(T.reshape(x_seq, (b * t_len, self.n_in)), self.w_x),
                        (b, t_len, 4 * self.n_hidden))
        h = Tensor(np.zeros((b, self.n_hidden)))
        c = Tensor(np.zeros((b, self.n_hidden)))
        order = range(t_len - 1, -1, -1) if reverse else range(t_len)
        outputs = [None] * t_len
        for t_idx in order:
            h, c = self.step(pre[:, t_idx, :], h, c)
            outputs[t_idx] = h
        return outputs


class LSTM(Module):
    """Stacked bidirectional LSTM.

    Input (batch, T, n_in) -> output (batch, T, 2 * n_hidden) with forward and
    backward direction outputs concatenated per step. Forward/backward
    parameters are independent; layers above the first consume the
    concatenated outputs of the layer below.
    """

    def __init__(self, n_in, n_hidden, n_layers=3, bidirectional=True, rng=None):
        if rng is None:
            rng = np.random.default_rng(0)
        self.n_in = n_in
        self.n_hidden = n_hidden
        self.n_layers = n_layers
        self.bidirectional = bidirectional
        self.cells_fw = []
        self.cells_bw = []
        width = n_in
        for _ in range(n_layers):
            self.cells_fw.append(LstmCell(width, n_hidden, rng))
            if bidirectional:
                self.cells_bw.append(LstmCell(width, n_hidden, rng))
            width = n_hidden * (2 if bidirectional else 1)

    def __call__(self, x_seq):
        if x_seq.ndim != 3 or x_seq.shape[-1] != self.n_in:
            raise ValueError(f"LSTM expects (batch, T, {self.n_in}), got {x_seq.shape}")
        current = x_seq
        for layer in range(self.n_layers):
            fw = self.cells_fw[layer].run(current, reverse=False)
            if self.bidirectional:
                bw = self.cells_bw[layer].run(current, reverse=True)
                per_step = [T.concat([f, b], axis=1) for f, b in zip(fw, bw)]
            else:
                per_step = fw
            current = T.stack(per_step, axis=1)
        return current
