"""Minimal reverse-mode automatic differentiation over numpy arrays.

Just enough machinery for two-layer perceptrons and contrastive losses:
values are float64 ndarrays, the graph is built eagerly, and backward() runs
a topological sweep. Broadcasting in elementwise ops is supported by summing
gradients back down to the operand's shape.
"""

from __future__ import annotations

import numpy as np


class Var:
    """A node in the computation graph."""

    __slots__ = ("value", "grad", "parents", "_backward")

    def __init__(self, value, parents=(), backward=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self.parents = parents
        self._backward = backward

    @property
    def shape(self):
        return self.value.shape

    def backward(self):
        """Accumulate gradients of this (scalar) node into the graph."""
        if self.value.ndim != 0 and self.value.size != 1:
            raise ValueError("backward() requires a scalar output")
        order = []
        seen = set()

        def visit(node):
            if id(node) in seen:
                return
            seen.add(id(node))
            for p in node.parents:
                visit(p)
            order.append(node)

        visit(self)
        for node in order:
            node.grad = np.zeros_like(node.value)
        self.grad = np.ones_like(self.value)
        for node in reversed(order):
            if node._backward is not None:
                node._backward(node.grad)

    # operator sugar used sparingly in the model code
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum grad down to `shape` (inverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _as_var(x) -> Var:
    return x if isinstance(x, Var) else Var(x)


def add(a, b) -> Var:
    a, b = _as_var(a), _as_var(b)
    out = Var(a.value + b.value, (a, b))

    def backward(g):
        a.grad += _unbroadcast(g, a.value.shape)
        b.grad += _unbroadcast(g, b.value.shape)

    out._backward = backward
    return out


def sub(a, b) -> Var:
    a, b = _as_var(a), _as_var(b)
    out = Var(a.value - b.value, (a, b))

    def backward(g):
        a.grad += _unbroadcast(g, a.value.shape)
        b.grad -= _unbroadcast(g, b.value.shape)

    out._backward = backward
    return out


def mul(a, b) -> Var:
    a, b = _as_var(a), _as_var(b)
    out = Var(a.value * b.value, (a, b))

    def backward(g):
        a.grad += _unbroadcast(g * b.value, a.value.shape)
        b.grad += _unbroadcast(g * a.value, b.value.shape)

    out._backward = backward
    return out


def matmul(a, b) -> Var:
    a, b = _as_var(a), _as_var(b)
    out = Var(a.value @ b.value, (a, b))

    def backward(g):
        a.grad += g @ b.value.T
        b.grad += a.value.T @ g

    out._backward = backward
    return out


def relu(a) -> Var:
    a = _as_var(a)
    out = Var(np.maximum(a.value, 0.0), (a,))

    def backward(g):
        a.grad += g * (a.value > 0.0)

    out._backward = backward
    return out


def leaky_relu(a, slope: float = 0.01) -> Var:
    a = _as_var(a)
    out = Var(np.where(a.value > 0.0, a.value, slope * a.value), (a,))

    def backward(g):
        a.grad += g * np.where(a.value > 0.0, 1.0, slope)

    out._backward = backward
    return out


def mean(a) -> Var:
    a = _as_var(a)
    out = Var(a.value.mean(), (a,))

    def backward(g):
        a.grad += np.full_like(a.value, g / a.value.size)

    out._backward = backward
    return out


def sum_(a) -> Var:
    a = _as_var(a)
    out = Var(a.value.sum(), (a,))

    def backward(g):
        a.grad += np.full_like(a.value, g)

    out._backward = backward
    return out


def square_sum(a) -> Var:
    """sum(a ** 2), used for L2 penalties."""
    a = _as_var(a)
    out = Var(np.sum(a.value**2), (a,))

    def backward(g):
        a.grad += 2.0 * g * a.value

    out._backward = backward
    return out


def scale(a, c: float) -> Var:
    a = _as_var(a)
    out = Var(a.value * c, (a,))

    def backward(g):
        a.grad += g * c

    out._backward = backward
    return out


def bce_with_logits_mean(logits, targets) -> Var:
    """Mean binary cross-entropy over logits (numerically stable fused op)."""
    z = _as_var(logits)
    y = np.asarray(targets, dtype=np.float64)
    val = np.mean(np.maximum(z.value, 0.0) - z.value * y + np.log1p(np.exp(-np.abs(z.value))))
    out = Var(val, (z,))

    def backward(g):
        p = 1.0 / (1.0 + np.exp(-z.value))
        z.grad += g * (p - y) / z.value.size

    out._backward = backward
    return out


def sigmoid(a) -> Var:
    a = _as_var(a)
    p = 1.0 / (1.0 + np.exp(-a.value))
    out = Var(p, (a,))

    def backward(g):
        a.grad += g * p * (1.0 - p)

    out._backward = backward
    return out


def l2_normalize_rows(a, eps: float = 1e-12) -> Var:
    """Rows scaled to unit L2 norm (zero rows pass through unchanged)."""
    a = _as_var(a)
    norms = np.linalg.norm(a.value, axis=1, keepdims=True)
    safe = np.maximum(norms, eps)
    y = a.value / safe
    out = Var(y, (a,))

    def backward(g):
        dot = np.sum(g * y, axis=1, keepdims=True)
        a.grad += (g - y * dot) / safe

    out._backward = backward
    return out


def gather_rows(a, rows) -> Var:
    a = _as_var(a)
    rows = np.asarray(rows, dtype=np.intp)
    out = Var(a.value[rows], (a,))

    def backward(g):
        np.add.at(a.grad, rows, g)

    out._backward = backward
    return out


def take_pairs(a, rows, cols) -> Var:
    """Vector of matrix elements a[rows[i], cols[i]]."""
    a = _as_var(a)
    rows = np.asarray(rows, dtype=np.intp)
    cols = np.asarray(cols, dtype=np.intp)
    out = Var(a.value[rows, cols], (a,))

    def backward(g):
        np.add.at(a.grad, (rows, cols), g)

    out._backward = backward
    return out


def masked_logsumexp_rows(a, mask) -> Var:
    """Per-row log(sum(exp(a) * mask)); each row's mask must be non-empty."""
    a = _as_var(a)
    m = np.asarray(mask, dtype=bool)
    if not m.any(axis=1).all():
        raise ValueError("each row needs at least one unmasked entry")
    neg = np.where(m, a.value, -np.inf)
    hi = neg.max(axis=1, keepdims=True)
    expd = np.where(m, np.exp(a.value - hi), 0.0)
    total = expd.sum(axis=1, keepdims=True)
    val = (hi + np.log(total)).ravel()
    out = Var(val, (a,))

    def backward(g):
        a.grad += g[:, None] * (expd / total)

    out._backward = backward
    return out


def value_of(x) -> np.ndarray:
    return x.value if isinstance(x, Var) else np.asarray(x, dtype=np.float64)
