"""Reverse-mode automatic differentiation over float64 numpy arrays.

A ``Tensor`` wraps an ndarray (up to 3 axes: batch, time, feature) and
records the operations applied to it; calling :meth:`Tensor.backward` on a
scalar result walks the recorded tape and accumulates exact gradients into
every tensor created with ``requires_grad=True``. Only the ops the models
in this package need are provided; all arithmetic is IEEE double.
"""

from __future__ import annotations

import numpy as np

_DEBUG_NAN_GUARD = False


def set_nan_guard(enabled):
    """Enable per-op finiteness checks (slow; for debugging only)."""
    global _DEBUG_NAN_GUARD
    _DEBUG_NAN_GUARD = bool(enabled)


def _unbroadcast(grad, shape):
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    """A node in the autodiff graph holding float64 data and its gradient."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, _parents=(), _backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        if self.data.ndim > 3:
            raise ValueError(f"tensors support at most 3 axes, got shape {self.data.shape}")
        if _DEBUG_NAN_GUARD and not np.all(np.isfinite(self.data)):
            raise FloatingPointError("non-finite tensor data")
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = _parents
        self._backward = _backward

    # -- construction helpers -------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self):
        return float(self.data)

    def detach(self):
        return Tensor(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def _accumulate(self, grad):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += grad

    # -- graph/backward machinery ----------------------------------------------

    def backward(self, grad=None):
        """Backpropagate from this tensor; seeds with ones unless `grad` given."""
        topo = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in visited:
                    stack.append((p, False))
        if grad is None:
            grad = np.ones_like(self.data)
        self._accumulate(np.asarray(grad, dtype=np.float64))
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def zero_grad(self):
        self.grad = None


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _needs_graph(*tensors):
    return any(t.requires_grad or t._parents for t in tensors)


def _make(data, parents, backward):
    if _needs_graph(*parents):
        out = Tensor(data, requires_grad=True, _parents=tuple(parents), _backward=None)
        out._backward = backward(out)
        return out
    return Tensor(data)


# -- elementwise arithmetic ------------------------------------------------------


def add(a, b):
    a, b = _as_tensor(a), _as_tensor(b)

    def bw(out):
        def run(g):
            a._accumulate(_unbroadcast(g, a.data.shape))
            b._accumulate(_unbroadcast(g, b.data.shape))
        return run

    return _make(a.data + b.data, (a, b), bw)


def mul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)

    def bw(out):
        def run(g):
            a._accumulate(_unbroadcast(g * b.data, a.data.shape))
            b._accumulate(_unbroadcast(g * a.data, b.data.shape))
        return run

    return _make(a.data * b.data, (a, b), bw)


def sub(a, b):
    a, b = _as_tensor(a), _as_tensor(b)

    def bw(out):
        def run(g):
            a._accumulate(_unbroadcast(g, a.data.shape))
            b._accumulate(_unbroadcast(-g, b.data.shape))
        return run

    return _make(a.data - b.data, (a, b), bw)


def div(a, b):
    a, b = _as_tensor(a), _as_tensor(b)

    def bw(out):
        def run(g):
            a._accumulate(_unbroadcast(g / b.data, a.data.shape))
            b._accumulate(_unbroadcast(-g * a.data / (b.data * b.data), b.data.shape))
        return run

    return _make(a.data / b.data, (a, b), bw)


def neg(a):
    a = _as_tensor(a)

    def bw(out):
        def run(g):
            a._accumulate(-g)
        return run

    return _make(-a.data, (a,), bw)


def powi(a, exponent):
    """a ** exponent for a constant scalar exponent."""
    a = _as_tensor(a)
    e = float(exponent)

    def bw(out):
        def run(g):
            a._accumulate(g * e * a.data ** (e - 1.0))
        return run

    return _make(a.data ** e, (a,), bw)


def square(a):
    return powi(a, 2.0)


def exp(a):
    a = _as_tensor(a)
    val = np.exp(a.data)

    def bw(out):
        def run(g):
            a._accumulate(g * out.data)
        return run

    return _make(val, (a,), bw)


def log(a):
    a = _as_tensor(a)

    def bw(out):
        def run(g):
            a._accumulate(g / a.data)
        return run

    return _make(np.log(a.data), (a,), bw)


def tanh(a):
    a = _as_tensor(a)
    val = np.tanh(a.data)

    def bw(out):
        def run(g):
            a._accumulate(g * (1.0 - out.data * out.data))
        return run

    return _make(val, (a,), bw)


def sigmoid(a):
    a = _as_tensor(a)
    val = np.empty_like(a.data)
    pos = a.data >= 0
    val[pos] = 1.0 / (1.0 + np.exp(-a.data[pos]))
    ex = np.exp(a.data[~pos])
    val[~pos] = ex / (1.0 + ex)

    def bw(out):
        def run(g):
            a._accumulate(g * out.data * (1.0 - out.data))
        return run

    return _make(val, (a,), bw)


def leaky_relu(a, slope=0.01):
    a = _as_tensor(a)
    mask = a.data >= 0

    def bw(out):
        def run(g):
            a._accumulate(g * np.where(mask, 1.0, slope))
        return run

    return _make(np.where(mask, a.data, slope * a.data), (a,), bw)


def softplus(a):
    """log(1 + exp(a)), overflow safe."""
    a = _as_tensor(a)
    val = np.logaddexp(0.0, a.data)

    def bw(out):
        def run(g):
            s = np.empty_like(a.data)
            pos = a.data >= 0
            s[pos] = 1.0 / (1.0 + np.exp(-a.data[pos]))
            ex = np.exp(a.data[~pos])
            s[~pos] = ex / (1.0 + ex)
            a._accumulate(g * s)
        return run

    return _make(val, (a,), bw)


def clip(a, lo, hi):
    """Hard clip; gradient is zero outside [lo, hi]."""
    a = _as_tensor(a)
    mask = (a.data >= lo) & (a.data <= hi)

    def bw(out):
        def run(g):
            a._accumulate(g * mask)
        return run

    return _make(np.clip(a.data, lo, hi), (a,), bw)


# -- linear algebra / reduction / shape -------------------------------------------


def matmul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ValueError(f"matmul expects 2-D operands, got {a.data.shape} @ {b.data.shape}")
    if a.data.shape[1] != b.data.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.data.shape} @ {b.data.shape}")

    def bw(out):
        def run(g):
            a._accumulate(g @ b.data.T)
            b._accumulate(a.data.T @ g)
        return run

    return _make(a.data @ b.data, (a, b), bw)


def tsum(a, axis=None, keepdims=False):
    a = _as_tensor(a)

    def bw(out):
        def run(g):
            if axis is None:
                a._accumulate(np.broadcast_to(g, a.data.shape).copy()
                              if np.ndim(g) else np.full_like(a.data, g))
            else:
                gg = g if keepdims else np.expand_dims(g, axis)
                a._accumulate(np.broadcast_to(gg, a.data.shape).copy())
        return run

    return _make(a.data.sum(axis=axis, keepdims=keepdims), (a,), bw)


def tmean(a, axis=None, keepdims=False):
    a = _as_tensor(a)
    if axis is None:
        n = a.data.size
    else:
        n = a.data.shape[axis]
    return mul(tsum(a, axis=axis, keepdims=keepdims), 1.0 / n)


def reshape(a, shape):
    a = _as_tensor(a)
    old = a.data.shape

    def bw(out):
        def run(g):
            a._accumulate(g.reshape(old))
        return run

    return _make(a.data.reshape(shape), (a,), bw)


def concat(tensors, axis=-1):
    tensors = [_as_tensor(t) for t in tensors]
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def bw(out):
        def run(g):
            for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(lo, hi)
                t._accumulate(g[tuple(idx)])
        return run

    return _make(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), bw)


def stack(tensors, axis=0):
    tensors = [_as_tensor(t) for t in tensors]

    def bw(out):
        def run(g):
            for i, t in enumerate(tensors):
                t._accumulate(np.take(g, i, axis=axis))
        return run

    return _make(np.stack([t.data for t in tensors], axis=axis), tuple(tensors), bw)


def index(a, key):
    """Basic (slice/int) indexing with scatter-add backward."""
    a = _as_tensor(a)

    def bw(out):
        def run(g):
            full = np.zeros_like(a.data)
            full[key] = g
            a._accumulate(full)
        return run

    return _make(a.data[key], (a,), bw)


def logsumexp(a, axis, keepdims=False):
    """Numerically stable log-sum-exp along `axis` (max is detached)."""
    a = _as_tensor(a)
    m = np.max(a.data, axis=axis, keepdims=True)
    shifted = sub(a, Tensor(m))
    out = add(log(tsum(exp(shifted), axis=axis, keepdims=True)), Tensor(m))
    if not keepdims:
        out = reshape(out, tuple(s for i, s in enumerate(out.data.shape) if i != (axis % a.data.ndim)))
    return out


# Operator sugar on Tensor

Tensor.__add__ = lambda self, other: add(self, other)
Tensor.__radd__ = lambda self, other: add(other, self)
Tensor.__sub__ = lambda self, other: sub(self, other)
Tensor.__rsub__ = lambda self, other: sub(other, self)
Tensor.__mul__ = lambda self, other: mul(self, other)
Tensor.__rmul__ = lambda self, other: mul(other, self)
Tensor.__truediv__ = lambda self, other: div(self, other)
Tensor.__rtruediv__ = lambda self, other: div(other, self)
Tensor.__neg__ = lambda self: neg(self)
Tensor.__pow__ = lambda self, e: powi(self, e)
Tensor.__matmul__ = lambda self, other: matmul(self, other)
Tensor.__getitem__ = lambda self, key: index(self, key)
Tensor.sum = tsum
Tensor.mean = tmean
Tensor.reshape = lambda self, *shape: reshape(self, shape if len(shape) > 1 else shape[0])
