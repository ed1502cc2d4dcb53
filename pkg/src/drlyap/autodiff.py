"""Minimal tape-based reverse-mode automatic differentiation on numpy arrays.

Every operation records its inputs and a vector-Jacobian product; calling
:meth:`Tensor.backward` on a scalar walks the graph in reverse topological
order and accumulates ``.grad`` on every tensor that requires it.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

Vjp = Callable[[np.ndarray], np.ndarray]


class Tensor:
    __slots__ = ("value", "grad", "requires_grad", "_parents")

    def __init__(self, value, requires_grad: bool = False, _parents: Sequence[tuple["Tensor", Vjp]] = ()):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad or any(p.requires_grad for p, _ in _parents)
        self._parents = tuple((p, f) for p, f in _parents if p.requires_grad)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def backward(self, seed: np.ndarray | None = None) -> None:
        if seed is None:
            if self.value.size != 1:
                raise ValueError("backward() without a seed needs a scalar output")
            seed = np.ones_like(self.value)
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent, _ in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))
        grads: dict[int, np.ndarray] = {id(self): np.asarray(seed, dtype=np.float64)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if not node._parents:
                node.grad = g if node.grad is None else node.grad + g
                continue
            for parent, vjp in node._parents:
                contrib = vjp(g)
                key = id(parent)
                grads[key] = grads[key] + contrib if key in grads else contrib

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return getitem(self, idx)

    @property
    def T(self):
        return transpose(self)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, s in enumerate(shape):
        if s == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return Tensor(
        a.value + b.value,
        _parents=[(a, lambda g: _unbroadcast(g, a.shape)), (b, lambda g: _unbroadcast(g, b.shape))],
    )


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return Tensor(
        a.value - b.value,
        _parents=[(a, lambda g: _unbroadcast(g, a.shape)), (b, lambda g: -_unbroadcast(g, b.shape))],
    )


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return Tensor(
        a.value * b.value,
        _parents=[
            (a, lambda g: _unbroadcast(g * b.value, a.shape)),
            (b, lambda g: _unbroadcast(g * a.value, b.shape)),
        ],
    )


def matmul(a, b) -> Tensor:
    """Matrix product for 2-D operands, or batched over a leading axis."""
    a, b = as_tensor(a), as_tensor(b)

    def ga(g):
        r = g @ np.swapaxes(b.value, -1, -2)
        return _unbroadcast(r, a.shape)

    def gb(g):
        r = np.swapaxes(a.value, -1, -2) @ g
        return _unbroadcast(r, b.shape)

    return Tensor(a.value @ b.value, _parents=[(a, ga), (b, gb)])


def transpose(a) -> Tensor:
    a = as_tensor(a)
    return Tensor(a.value.T, _parents=[(a, lambda g: g.T)])


def tanh(a) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.value)
    return Tensor(out, _parents=[(a, lambda g: g * (1.0 - out * out))])


def sin(a) -> Tensor:
    a = as_tensor(a)
    return Tensor(np.sin(a.value), _parents=[(a, lambda g: g * np.cos(a.value))])


def cos(a) -> Tensor:
    a = as_tensor(a)
    return Tensor(np.cos(a.value), _parents=[(a, lambda g: -g * np.sin(a.value))])


def square(a) -> Tensor:
    a = as_tensor(a)
    return Tensor(a.value**2, _parents=[(a, lambda g: 2.0 * g * a.value)])


def sqrt(a) -> Tensor:
    """Square root with derivative 0 at 0."""
    a = as_tensor(a)
    out = np.sqrt(a.value)
    safe = np.where(out > 0, out, 1.0)
    return Tensor(out, _parents=[(a, lambda g: np.where(out > 0, 0.5 * g / safe, 0.0))])


def abs_(a) -> Tensor:
    """Absolute value with subgradient 0 at 0."""
    a = as_tensor(a)
    return Tensor(np.abs(a.value), _parents=[(a, lambda g: g * np.sign(a.value))])


def relu(a) -> Tensor:
    """Hinge (x)_+ with subgradient 0 at 0."""
    a = as_tensor(a)
    return Tensor(np.maximum(a.value, 0.0), _parents=[(a, lambda g: g * (a.value > 0.0))])


def sum_(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return np.broadcast_to(g, a.shape).copy()

    return Tensor(a.value.sum(axis=axis, keepdims=keepdims), _parents=[(a, vjp)])


def mean(a, axis=None) -> Tensor:
    a = as_tensor(a)
    count = a.value.size if axis is None else a.value.shape[axis]
    return mul(sum_(a, axis), 1.0 / count)


def max_(a, axis: int) -> Tensor:
    """Maximum along ``axis``; the gradient goes to the first maximizing index."""
    a = as_tensor(a)
    idx = np.argmax(a.value, axis=axis)
    out = np.take_along_axis(a.value, np.expand_dims(idx, axis), axis=axis).squeeze(axis)

    def vjp(g):
        grad = np.zeros_like(a.value)
        np.put_along_axis(grad, np.expand_dims(idx, axis), np.expand_dims(g, axis), axis=axis)
        return grad

    return Tensor(out, _parents=[(a, vjp)])


def getitem(a, idx) -> Tensor:
    a = as_tensor(a)

    def vjp(g):
        grad = np.zeros_like(a.value)
        np.add.at(grad, idx, g)
        return grad

    return Tensor(a.value[idx], _parents=[(a, vjp)])


def stack(items: Sequence, axis: int = 0) -> Tensor:
    items = [as_tensor(t) for t in items]
    parents = []
    for k, t in enumerate(items):
        parents.append((t, lambda g, k=k: np.take(g, k, axis=axis)))
    return Tensor(np.stack([t.value for t in items], axis=axis), _parents=parents)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    return Tensor(a.value.reshape(shape), _parents=[(a, lambda g: g.reshape(a.shape))])


def where_const(mask: np.ndarray, a, fill: float = 0.0) -> Tensor:
    """``a`` where ``mask`` else the constant ``fill``."""
    a = as_tensor(a)
    return Tensor(np.where(mask, a.value, fill), _parents=[(a, lambda g: np.where(mask, g, 0.0))])


def grad(output: Tensor, inputs: Sequence[Tensor]) -> list[np.ndarray]:
    """Gradients of scalar ``output`` with respect to leaf ``inputs``."""
    for t in inputs:
        t.grad = None
    output.backward()
    return [t.grad if t.grad is not None else np.zeros_like(t.value) for t in inputs]
