"""Minimal reverse-mode automatic differentiation over numpy arrays.

A :class:`Var` wraps an ndarray and remembers how it was computed. Calling
``backward()`` on a scalar Var accumulates ``grad`` on every Var it depends on
that has ``requires_grad``. Leaves created with ``Var(array)`` require grad;
constants lifted implicitly by an operator do not. The helper functions
(:func:`tanh`, :func:`where`, ...) also accept plain arrays, so numerical code
can be written once and run either way.
"""
from __future__ import annotations

import numpy as np


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    if grad.shape == shape:
        return grad
    ndim_extra = grad.ndim - len(shape)
    if ndim_extra:
        grad = grad.sum(axis=tuple(range(ndim_extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Var:
    # makes numpy defer binary operators to the reflected Var methods
    __array_ufunc__ = None

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, parents=(), backward=None, requires_grad=True):
        self.data = np.asarray(data, dtype=float)
        self.grad = None
        self._parents = parents
        self._backward = backward
        self.requires_grad = requires_grad if not parents else any(p.requires_grad for p in parents)

    def __repr__(self):
        return f"Var(shape={self.data.shape})"

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def __len__(self):
        return len(self.data)

    # -- arithmetic -----------------------------------------------------------
    def __add__(self, other):
        a, b = self, _lift(other)

        def back(g):
            return (_unbroadcast(g, a.shape) if a.requires_grad else None,
                    _unbroadcast(g, b.shape) if b.requires_grad else None)

        return Var(a.data + b.data, (a, b), back)

    __radd__ = __add__

    def __sub__(self, other):
        a, b = self, _lift(other)

        def back(g):
            return (_unbroadcast(g, a.shape) if a.requires_grad else None,
                    -_unbroadcast(g, b.shape) if b.requires_grad else None)

        return Var(a.data - b.data, (a, b), back)

    def __rsub__(self, other):
        return _lift(other) - self

    def __neg__(self):
        return Var(-self.data, (self,), lambda g: (-g,))

    def __mul__(self, other):
        a, b = self, _lift(other)

        def back(g):
            return (_unbroadcast(g * b.data, a.shape) if a.requires_grad else None,
                    _unbroadcast(g * a.data, b.shape) if b.requires_grad else None)

        return Var(a.data * b.data, (a, b), back)

    __rmul__ = __mul__

    def __truediv__(self, other):
        a, b = self, _lift(other)
        out = a.data / b.data

        def back(g):
            ga = g / b.data
            return (_unbroadcast(ga, a.shape) if a.requires_grad else None,
                    _unbroadcast(-ga * out, b.shape) if b.requires_grad else None)

        return Var(out, (a, b), back)

    def __rtruediv__(self, other):
        return _lift(other) / self

    def __pow__(self, p):
        if not np.isscalar(p):
            raise TypeError("only scalar exponents are supported")
        a = self
        return Var(a.data ** p, (a,), lambda g: (g * p * a.data ** (p - 1),))

    def __matmul__(self, other):
        a, b = self, _lift(other)

        def back(g):
            return (g @ b.data.T if a.requires_grad else None,
                    a.data.T @ g if b.requires_grad else None)

        return Var(a.data @ b.data, (a, b), back)

    def __rmatmul__(self, other):
        return _lift(other) @ self

    # -- shape ----------------------------------------------------------------
    def __getitem__(self, idx):
        a = self

        def back(g):
            full = np.zeros_like(a.data)
            np.add.at(full, idx, g)
            return (full,)

        return Var(a.data[idx], (a,), back)

    def reshape(self, *shape):
        a = self
        return Var(a.data.reshape(*shape), (a,), lambda g: (g.reshape(a.shape),))

    def sum(self, axis=None):
        a = self

        def back(g):
            if axis is not None:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, a.shape),)

        return Var(a.data.sum(axis=axis), (a,), back)

    def mean(self, axis=None):
        n = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis) * (1.0 / n)

    # -- backprop -------------------------------------------------------------
    def backward(self):
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar output")
        order = _topological(self)
        for v in order:
            v.grad = None
        self.grad = np.ones_like(self.data)
        for v in reversed(order):
            if v._backward is None or v.grad is None:
                continue
            for parent, g in zip(v._parents, v._backward(v.grad)):
                if g is None or not parent.requires_grad:
                    continue
                parent.grad = g if parent.grad is None else parent.grad + g
            if v._parents:
                v.grad = None  # free interior gradients as we go


def _topological(root: Var) -> list[Var]:
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        v, expanded = stack.pop()
        if expanded:
            order.append(v)
            continue
        if id(v) in seen:
            continue
        seen.add(id(v))
        stack.append((v, True))
        for p in v._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def _lift(x) -> Var:
    return x if isinstance(x, Var) else Var(x, requires_grad=False)


def value(x):
    """Underlying ndarray of a Var, or the argument itself."""
    return x.data if isinstance(x, Var) else x


def is_var(x) -> bool:
    return isinstance(x, Var)


def tanh(x):
    if not isinstance(x, Var):
        return np.tanh(x)
    out = np.tanh(x.data)
    return Var(out, (x,), lambda g: (g * (1.0 - out * out),))


def sigmoid(x):
    if not isinstance(x, Var):
        return _sigmoid(x)
    out = _sigmoid(x.data)
    return Var(out, (x,), lambda g: (g * out * (1.0 - out),))


def _sigmoid(z):
    # split by sign so exp never overflows
    z = np.asarray(z, dtype=float)
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def where(cond, a, b):
    cond = np.asarray(value(cond), dtype=bool)
    if not (isinstance(a, Var) or isinstance(b, Var)):
        return np.where(cond, a, b)
    a, b = _lift(a), _lift(b)

    def back(g):
        return (_unbroadcast(np.where(cond, g, 0.0), a.shape) if a.requires_grad else None,
                _unbroadcast(np.where(cond, 0.0, g), b.shape) if b.requires_grad else None)

    return Var(np.where(cond, a.data, b.data), (a, b), back)


def minimum(a, b):
    return where(value(a) <= value(b), a, b)


def maximum(a, b):
    return where(value(a) >= value(b), a, b)


def column(x: Var, c: int) -> Var:
    """Column ``c`` of a 2-D Var."""

    def back(g):
        full = np.zeros_like(x.data)
        full[:, c] = g
        return (full,)

    return Var(x.data[:, c], (x,), back)


def prepend_column(col, mat):
    """``[col | mat]`` for a length-N vector and an (N, K) matrix."""
    if not (isinstance(col, Var) or isinstance(mat, Var)):
        return np.concatenate([np.reshape(col, (-1, 1)), mat], axis=1)
    col, mat = _lift(col), _lift(mat)

    def back(g):
        return (g[:, 0] if col.requires_grad else None,
                g[:, 1:] if mat.requires_grad else None)

    return Var(np.concatenate([col.data[:, None], mat.data], axis=1), (col, mat), back)


def reshape(x, shape):
    return x.reshape(shape) if isinstance(x, Var) else np.reshape(x, shape)
