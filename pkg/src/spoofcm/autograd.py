"""A small reverse-mode autodiff engine over float64 numpy arrays.

Every op builds a node holding its value and a closure that pushes the
upstream gradient to its parents. ``Tensor.backward`` walks the graph in
reverse topological order, so a node's gradient is complete before it is
propagated further.
"""
from __future__ import annotations

import contextlib

import numpy as np

_kink_log: list | None = None


@contextlib.contextmanager
def record_kinks():
    """Collect the sign pattern of every piecewise-linear activation.

    Used by the finite-difference harness to notice when a perturbation
    moves a pre-activation across a non-differentiable point.
    """
    global _kink_log
    prev, _kink_log = _kink_log, []
    try:
        yield _kink_log
    finally:
        _kink_log = prev


def _unbroadcast(grad, shape):
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad=False, name=None, _parents=(), _backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in _parents)
        self._parents = _parents if self.requires_grad else ()
        self._backward = _backward if self.requires_grad else None
        self.name = name

    def __repr__(self):
        tag = f" {self.name}" if self.name else ""
        return f"Tensor{tag}(shape={self.data.shape})"

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def T(self):
        return transpose(self)

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad = self.grad + g

    def backward(self, grad=None):
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without a gradient needs a scalar output")
            grad = np.ones_like(self.data)
        order, seen = [], set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        grads = {id(self): np.asarray(grad, dtype=np.float64)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node._accumulate(g)
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = grads[key] + pg if key in grads else pg

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(as_tensor(other)))

    def __rsub__(self, other):
        return add(as_tensor(other), neg(self))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(as_tensor(other), self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def reshape(self, *shape):
        return reshape(self, shape[0] if len(shape) == 1 else shape)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def parameter(data, name=None):
    return Tensor(np.array(data, dtype=np.float64), requires_grad=True, name=name)


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = a.data + b.data
    return Tensor(out, _parents=(a, b), _backward=lambda g: (
        _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def neg(a):
    return Tensor(-a.data, _parents=(a,), _backward=lambda g: (-g,))


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return Tensor(a.data * b.data, _parents=(a, b), _backward=lambda g: (
        _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)))


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = a.data / b.data
    return Tensor(out, _parents=(a, b), _backward=lambda g: (
        _unbroadcast(g / b.data, a.shape),
        _unbroadcast(-g * out / b.data, b.shape)))


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        ad, bd = a.data, b.data
        if ad.ndim == 1 and bd.ndim == 1:
            return g * bd, g * ad
        if ad.ndim == 1:
            return bd @ g, np.outer(ad, g)
        if bd.ndim == 1:
            return np.outer(g, bd), ad.T @ g
        return g @ bd.T, ad.T @ g

    return Tensor(a.data @ b.data, _parents=(a, b), _backward=backward)


def transpose(a):
    return Tensor(a.data.T, _parents=(a,), _backward=lambda g: (g.T,))


def reshape(a, shape):
    return Tensor(a.data.reshape(shape), _parents=(a,),
                  _backward=lambda g: (g.reshape(a.shape),))


def getitem(a, idx):
    def backward(g):
        full = np.zeros_like(a.data)
        np.add.at(full, idx, g)
        return (full,)

    return Tensor(a.data[idx], _parents=(a,), _backward=backward)


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    sizes = np.cumsum([t.shape[axis] for t in tensors])[:-1]
    return Tensor(np.concatenate([t.data for t in tensors], axis=axis),
                  _parents=tuple(tensors),
                  _backward=lambda g: tuple(np.split(g, sizes, axis=axis)))


def stack(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    return Tensor(np.stack([t.data for t in tensors], axis=axis),
                  _parents=tuple(tensors),
                  _backward=lambda g: tuple(np.moveaxis(g, axis, 0)))


def tsum(a, axis=None, keepdims=False):
    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return Tensor(a.data.sum(axis=axis, keepdims=keepdims), _parents=(a,), _backward=backward)


def mean(a, axis=None, keepdims=False):
    count = a.data.size if axis is None else a.shape[axis]
    return tsum(a, axis, keepdims) * (1.0 / count)


def exp(a):
    out = np.exp(a.data)
    return Tensor(out, _parents=(a,), _backward=lambda g: (g * out,))


def log(a):
    return Tensor(np.log(a.data), _parents=(a,), _backward=lambda g: (g / a.data,))


def sqrt(a):
    out = np.sqrt(a.data)
    return Tensor(out, _parents=(a,), _backward=lambda g: (g * 0.5 / out,))


def tanh(a):
    out = np.tanh(a.data)
    return Tensor(out, _parents=(a,), _backward=lambda g: (g * (1.0 - out * out),))


def sigmoid(a):
    out = 0.5 * (1.0 + np.tanh(0.5 * a.data))
    return Tensor(out, _parents=(a,), _backward=lambda g: (g * out * (1.0 - out),))


def softplus(a):
    """log(1 + e^a) without overflow."""
    out = np.logaddexp(0.0, a.data)
    sig = 0.5 * (1.0 + np.tanh(0.5 * a.data))
    return Tensor(out, _parents=(a,), _backward=lambda g: (g * sig,))


def leaky_relu(a, slope=0.01):
    positive = a.data > 0
    if _kink_log is not None:
        _kink_log.append(positive)
    scale = np.where(positive, 1.0, slope)
    return Tensor(a.data * scale, _parents=(a,), _backward=lambda g: (g * scale,))


def clip(a, lo, hi):
    inside = (a.data >= lo) & (a.data <= hi)
    return Tensor(np.clip(a.data, lo, hi), _parents=(a,),
                  _backward=lambda g: (g * inside,))


def cos(a):
    return Tensor(np.cos(a.data), _parents=(a,),
                  _backward=lambda g: (-g * np.sin(a.data),))


def arccos(a):
    return Tensor(np.arccos(a.data), _parents=(a,),
                  _backward=lambda g: (-g / np.sqrt(1.0 - a.data ** 2),))


def log_softmax(a, axis=-1):
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    soft = np.exp(out)
    return Tensor(out, _parents=(a,), _backward=lambda g: (
        g - soft * g.sum(axis=axis, keepdims=True),))


def softmax(a, axis=-1):
    return exp(log_softmax(a, axis))


def unfold_time(x, kernel, stride, pad_left, pad_right):
    """Gather strided windows along axis 0 into rows of length kernel*D.

    ``x`` is N x D; the result is M x (kernel*D) with zero padding applied
    outside [0, N). This is the im2col step of a 1-d convolution over time.
    """
    n, d = x.shape
    total = n + pad_left + pad_right
    m = (total - kernel) // stride + 1
    src = np.arange(m)[:, None] * stride + np.arange(kernel)[None, :] - pad_left
    valid = (src >= 0) & (src < n)
    safe = np.where(valid, src, 0)
    cols = x.data[safe] * valid[..., None]

    def backward(g):
        g = g.reshape(m, kernel, d) * valid[..., None]
        full = np.zeros_like(x.data)
        np.add.at(full, safe, g)
        return (full,)

    return Tensor(cols.reshape(m, kernel * d), _parents=(x,), _backward=backward)
