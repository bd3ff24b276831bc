"""A small reverse-mode differentiation engine over numpy arrays.

Operations on :class:`Tensor` record a closure that pushes the output
gradient back to the inputs. :func:`backward` walks the recorded graph once
in reverse topological order; the graph is dropped afterwards.
"""
from __future__ import annotations

import numpy as np


class AutodiffError(RuntimeError):
    pass


def _unbroadcast(grad, shape):
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")
    __array_priority__ = 100

    def __init__(self, data, requires_grad=False, _parents=(), _backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def _make(self, data, parents, backward):
        needs = any(p.requires_grad for p in parents)
        if not needs:
            return Tensor(data)
        return Tensor(data, True, parents, backward)

    # arithmetic
    def __add__(self, other):
        other = _as_tensor(other)

        def back(g):
            return _unbroadcast(g, self.shape), _unbroadcast(g, other.shape)
        return self._make(self.data + other.data, (self, other), back)

    __radd__ = __add__

    def __neg__(self):
        return self._make(-self.data, (self,), lambda g: (-g,))

    def __sub__(self, other):
        return self + (-_as_tensor(other))

    def __rsub__(self, other):
        return _as_tensor(other) + (-self)

    def __mul__(self, other):
        other = _as_tensor(other)

        def back(g):
            return (_unbroadcast(g * other.data, self.shape),
                    _unbroadcast(g * self.data, other.shape))
        return self._make(self.data * other.data, (self, other), back)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _as_tensor(other)
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return _as_tensor(other) * self.reciprocal()

    def reciprocal(self):
        out = 1.0 / self.data
        return self._make(out, (self,), lambda g: (-g * out * out,))

    def __matmul__(self, other):
        other = _as_tensor(other)
        a, b = self.data, other.data

        def back(g):
            if b.ndim == 1:
                ga = np.multiply.outer(g, b)
                gb = np.tensordot(a, g, axes=(range(a.ndim - 1), range(g.ndim)))
            else:
                ga = g @ np.swapaxes(b, -1, -2)
                gb = np.swapaxes(a, -1, -2) @ g
                gb = _unbroadcast(gb, b.shape)
            return _unbroadcast(ga, a.shape), gb
        return self._make(a @ b, (self, other), back)

    def __getitem__(self, idx):
        shape = self.shape

        def back(g):
            full = np.zeros(shape)
            np.add.at(full, idx, g)
            return (full,)
        return self._make(self.data[idx], (self,), back)

    def reshape(self, *shape):
        old = self.shape
        return self._make(self.data.reshape(*shape), (self,), lambda g: (g.reshape(old),))

    @property
    def T(self):
        return self._make(self.data.T, (self,), lambda g: (g.T,))

    # reductions
    def sum(self, axis=None, keepdims=False):
        shape = self.shape

        def back(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, shape).copy(),)
        return self._make(self.data.sum(axis=axis, keepdims=keepdims), (self,), back)

    def mean(self, axis=None, keepdims=False):
        count = self.size if axis is None else np.prod([self.shape[a] for a in np.atleast_1d(axis)])
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    # elementwise
    def square(self):
        x = self.data
        return self._make(x * x, (self,), lambda g: (2.0 * x * g,))

    def sqrt(self):
        out = np.sqrt(self.data)
        return self._make(out, (self,), lambda g: (0.5 * g / out,))

    def exp(self):
        out = np.exp(self.data)
        return self._make(out, (self,), lambda g: (g * out,))

    def log(self):
        x = self.data
        return self._make(np.log(x), (self,), lambda g: (g / x,))

    def tanh(self):
        out = np.tanh(self.data)
        return self._make(out, (self,), lambda g: (g * (1.0 - out * out),))

    def relu(self):
        x = self.data
        return self._make(np.maximum(x, 0.0), (self,), lambda g: (g * (x > 0),))

    def sigmoid(self):
        out = _sigmoid(self.data)
        return self._make(out, (self,), lambda g: (g * out * (1.0 - out),))

    def softplus(self):
        x = self.data
        return self._make(np.logaddexp(0.0, x), (self,), lambda g: (g * _sigmoid(x),))

    def silu(self):
        x = self.data
        s = _sigmoid(x)
        return self._make(x * s, (self,), lambda g: (g * (s + x * s * (1.0 - s)),))

    def smooth_norm(self, axis=-1, eps=1e-12):
        """``sqrt(sum(x**2, axis) + eps**2)``."""
        x = self.data
        out = np.sqrt(np.sum(x * x, axis=axis) + eps * eps)

        def back(g):
            return (np.expand_dims(g / out, axis) * x,)
        return self._make(out, (self,), back)


def _sigmoid(x):
    return np.exp(-np.logaddexp(0.0, -x))


def custom_scalar(inputs: Tensor, value: float, grad: np.ndarray) -> Tensor:
    """Scalar node with a precomputed gradient with respect to ``inputs``.

    Lets analytically differentiated losses sit at the root of a graph.
    """
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != inputs.shape:
        raise AutodiffError(f"gradient shape {grad.shape} does not match input {inputs.shape}")
    return inputs._make(np.asarray(value, dtype=np.float64), (inputs,), lambda g: (g * grad,))


def backward(root: Tensor) -> dict:
    """Accumulate d(root)/d(leaf) into ``.grad`` of every leaf that requires it.

    Returns a dict mapping those leaves to their gradients.
    """
    if root.size != 1:
        raise AutodiffError(f"backward needs a scalar root, got shape {root.shape}")
    if not root.requires_grad:
        raise AutodiffError("root was not computed from any tensor that requires grad")

    order, seen = [], set()
    stack = [(root, False)]
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

    grads = {id(root): np.ones(root.shape)}
    leaves = {}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            node.grad = g if node.grad is None else node.grad + g
            leaves[node] = node.grad
            continue
        for p, pg in zip(node._parents, node._backward(g)):
            if not p.requires_grad:
                continue
            if id(p) in grads:
                grads[id(p)] = grads[id(p)] + pg
            else:
                grads[id(p)] = pg
        node._parents = ()
        node._backward = None
    return leaves
