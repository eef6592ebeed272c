"""Minimal reverse-mode autodiff over float64 numpy arrays.

Each op records its parents and a closure that accumulates gradients
directly into the parents' `.grad` buffers; `backward` walks the recorded
graph once in reverse topological order. Everything is 64-bit so the
finite-difference oracles in the test suite can be tight.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

from ..errors import GraphNotRecorded, ShapeMismatch

_grad_enabled = True


@contextmanager
def no_grad():
    """Disable graph recording (forward-only evaluation)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn",
                 "_recorded", "name")

    def __init__(self, data, requires_grad=False, parents=(), backward_fn=None,
                 name=None, recorded=True):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = parents
        self._backward_fn = backward_fn
        self._recorded = recorded
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        tag = f" name={self.name}" if self.name else ""
        return f"Tensor(shape={self.data.shape}{tag}, requires_grad={self.requires_grad})"

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, g, fresh=False):
        # `fresh` marks arrays the caller just allocated and will not reuse;
        # they are adopted without a defensive copy
        if self.grad is None:
            if fresh and g.dtype == np.float64 and g.shape == self.data.shape:
                self.grad = g
                return
            self.grad = np.array(g, dtype=np.float64)
            if self.grad.shape != self.data.shape:
                self.grad = np.broadcast_to(self.grad, self.data.shape).copy()
        else:
            self.grad += g

    def item(self):
        return float(self.data)

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


class Parameter(Tensor):
    """Trainable leaf tensor."""

    def __init__(self, data, name=None):
        super().__init__(data, requires_grad=True, name=name)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _track(parents):
    return _grad_enabled and any(p.requires_grad for p in parents)


def _unbroadcast(g, shape):
    """Reduce a broadcast gradient back to `shape`."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _node(data, parents, backward_fn):
    if _track(parents):
        return Tensor(data, requires_grad=True, parents=parents, backward_fn=backward_fn)
    return Tensor(data, recorded=_grad_enabled)


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data + b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.data.shape))

    return _node(out_data, (a, b), backward)


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data - b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b._accumulate(-_unbroadcast(g, b.data.shape))

    return _node(out_data, (a, b), backward)


def neg(a):
    a = as_tensor(a)

    def backward(g):
        if a.requires_grad:
            a._accumulate(-g, fresh=True)

    return _node(-a.data, (a,), backward)


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data * b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.data.shape), fresh=True)
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.data.shape), fresh=True)

    return _node(out_data, (a, b), backward)


def matmul(a, b):
    """a: (..., m, k) @ b: (k, n); weight operand is 2-D."""
    a, b = as_tensor(a), as_tensor(b)
    if a.data.shape[-1] != b.data.shape[0] or b.data.ndim != 2:
        raise ShapeMismatch(f"matmul {a.data.shape} @ {b.data.shape}")
    out_data = a.data @ b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(g @ b.data.T, fresh=True)
        if b.requires_grad:
            if a.data.ndim == 2:
                b._accumulate(a.data.T @ g, fresh=True)
            else:
                lead = tuple(range(a.data.ndim - 1))
                b._accumulate(np.tensordot(a.data, g, axes=(lead, lead)), fresh=True)

    return _node(out_data, (a, b), backward)


def relu(a):
    a = as_tensor(a)
    mask = a.data > 0

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * mask, fresh=True)

    return _node(np.maximum(a.data, 0.0), (a,), backward)


def sigmoid(a):
    a = as_tensor(a)
    s = 1.0 / (1.0 + np.exp(-a.data))

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * s * (1.0 - s), fresh=True)

    return _node(s, (a,), backward)


def tanh(a):
    a = as_tensor(a)
    t = np.tanh(a.data)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * (1.0 - t * t), fresh=True)

    return _node(t, (a,), backward)


def log(a):
    a = as_tensor(a)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g / a.data, fresh=True)

    return _node(np.log(a.data), (a,), backward)


def clip(a, lo, hi):
    a = as_tensor(a)
    mask = (a.data >= lo) & (a.data <= hi)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * mask, fresh=True)

    return _node(np.clip(a.data, lo, hi), (a,), backward)


def softmax(a, axis=-1):
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    p = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        if a.requires_grad:
            dot = (g * p).sum(axis=axis, keepdims=True)
            a._accumulate(p * (g - dot), fresh=True)

    return _node(p, (a,), backward)


def sum_(a, axis=None, keepdims=False):
    a = as_tensor(a)
    out_data = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if a.requires_grad:
            gg = g
            if axis is not None and not keepdims:
                gg = np.expand_dims(gg, axis)
            a._accumulate(np.broadcast_to(gg, a.data.shape).copy(), fresh=True)

    return _node(out_data, (a,), backward)


def mean_all(a):
    a = as_tensor(a)
    n = a.data.size

    def backward(g):
        if a.requires_grad:
            a._accumulate(np.full(a.data.shape, float(g) / n), fresh=True)

    return _node(a.data.mean(), (a,), backward)


def reshape(a, shape):
    a = as_tensor(a)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g.reshape(a.data.shape))

    return _node(a.data.reshape(shape), (a,), backward)


def time_index(a, t):
    """a[:, t, :] for a (B, T, C) sequence."""
    a = as_tensor(a)

    def backward(g):
        if a.requires_grad:
            if a.grad is None:
                a.grad = np.zeros_like(a.data)
            a.grad[:, t, :] += g

    return _node(a.data[:, t, :], (a,), backward)


def col_slice(a, lo, hi):
    """a[..., lo:hi]."""
    a = as_tensor(a)

    def backward(g):
        if a.requires_grad:
            if a.grad is None:
                a.grad = np.zeros_like(a.data)
            a.grad[..., lo:hi] += g

    return _node(a.data[..., lo:hi], (a,), backward)


def concat_last(parts):
    """Concatenate along the last axis."""
    parts = [as_tensor(p) for p in parts]
    widths = [p.data.shape[-1] for p in parts]
    out_data = np.concatenate([p.data for p in parts], axis=-1)

    def backward(g):
        lo = 0
        for p, w in zip(parts, widths):
            if p.requires_grad:
                p._accumulate(g[..., lo:lo + w])
            lo += w

    return _node(out_data, tuple(parts), backward)


def backward(loss: Tensor):
    """Reverse-mode gradients of a scalar loss into every reachable leaf.

    A loss with no recorded dependence on gradient-tracked tensors (e.g. a
    constant) is a no-op: every parameter keeps a vacuously zero gradient.
    Raises GraphNotRecorded for results produced under no_grad.
    """
    if loss.data.size != 1:
        raise ShapeMismatch("backward expects a scalar loss")
    if not loss._recorded:
        raise GraphNotRecorded("forward pass ran under no_grad; no graph recorded")
    if not loss.requires_grad:
        return
    topo, done = [], set()
    stack = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if id(node) in done:
            continue
        if expanded:
            done.add(id(node))
            topo.append(node)
            continue
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in done:
                stack.append((p, False))

    loss.grad = np.ones_like(loss.data)
    for node in reversed(topo):
        if node._backward_fn is not None and node.grad is not None:
            node._backward_fn(node.grad)
    # intermediate buffers are dropped with the graph; leaves keep .grad
