"""Dense float64 tensors with a reverse-mode autodiff tape.

Each non-leaf tensor keeps references to its parents and a closure mapping the
upstream gradient to one gradient per parent.  Gradients are accumulated in a
dictionary local to each :func:`backward` call, never on the tensors, so two
graphs that share leaves cannot leak gradients into each other.
"""
from __future__ import annotations

from typing import Callable, Iterable, Optional, Sequence, Tuple

import numpy as np

Array = np.ndarray


class ShapeError(ValueError):
    """Raised when operand extents do not match."""


class ContractError(ValueError):
    """Raised when an operation is used outside its contract."""


def _unbroadcast(grad: Array, shape: Tuple[int, ...]) -> Array:
    # sum out leading axes added by broadcasting, then axes that were size 1
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    """A float64 array with an optional link into the autodiff tape.

    Leaf tensors (those built directly by the user) must be finite.
    """

    __slots__ = ("data", "_parents", "_grad_fn", "name")

    def __init__(self, data, name: Optional[str] = None, _parents: Tuple["Tensor", ...] = (),
                 _grad_fn: Optional[Callable[[Array], Sequence[Optional[Array]]]] = None):
        arr = np.asarray(data, dtype=np.float64)
        if not _parents and not np.all(np.isfinite(arr)):
            raise ValueError("leaf tensor contains NaN or Inf")
        self.data = arr
        self._parents = _parents
        self._grad_fn = _grad_fn
        self.name = name

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def is_leaf(self) -> bool:
        return not self._parents

    def numpy(self) -> Array:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        tag = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag})"

    # -- arithmetic -------------------------------------------------------
    def __add__(self, other) -> "Tensor":
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other) -> "Tensor":
        return add(self, neg(_as_tensor(other)))

    def __rsub__(self, other) -> "Tensor":
        return add(_as_tensor(other), neg(self))

    def __mul__(self, other) -> "Tensor":
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self) -> "Tensor":
        return neg(self)

    def __matmul__(self, other) -> "Tensor":
        return matmul(self, other)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(data: Array, parents: Tuple[Tensor, ...], grad_fn) -> Tensor:
    return Tensor(data, _parents=parents, _grad_fn=grad_fn)


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.data + b.data
    sa, sb = a.shape, b.shape
    return _node(out, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def neg(a: Tensor) -> Tensor:
    return _node(-a.data, (a,), lambda g: (-g,))


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    ad, bd = a.data, b.data
    return _node(ad * bd, (a, b),
                 lambda g: (_unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)))


def square(a: Tensor) -> Tensor:
    ad = a.data
    return _node(ad * ad, (a,), lambda g: (2.0 * ad * g,))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError(f"matmul expects 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul extents differ: {a.shape} @ {b.shape}")
    ad, bd = a.data, b.data
    return _node(ad @ bd, (a, b), lambda g: (g @ bd.T, ad.T @ g))


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)
    return _node(y, (a,), lambda g: (g * (1.0 - y * y),))


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return _node(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,))


def stable_sigmoid(x: Array) -> Array:
    # split by sign so exp never overflows
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def sigmoid(a: Tensor) -> Tensor:
    y = stable_sigmoid(a.data)
    return _node(y, (a,), lambda g: (g * y * (1.0 - y),))


def identity(a: Tensor) -> Tensor:
    return a


def log(a: Tensor) -> Tensor:
    x = a.data
    with np.errstate(divide="ignore"):
        y = np.log(x)
    return _node(y, (a,), lambda g: (g / x,))


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    x = a.data
    inside = (x >= lo) & (x <= hi)
    return _node(np.clip(x, lo, hi), (a,), lambda g: (g * inside,))


def tensor_sum(a: Tensor) -> Tensor:
    shape = a.shape
    return _node(np.asarray(a.data.sum()), (a,), lambda g: (np.broadcast_to(g, shape).copy(),))


def mean(a: Tensor) -> Tensor:
    shape = a.shape
    n = a.data.size
    return _node(np.asarray(a.data.mean()), (a,), lambda g: (np.full(shape, float(g) / n),))


def sum_rows(a: Tensor) -> Tensor:
    """Sum over the last axis, keeping a trailing extent of 1."""
    shape = a.shape
    return _node(a.data.sum(axis=-1, keepdims=True), (a,),
                 lambda g: (np.broadcast_to(g, shape).copy(),))


def take_rows(a: Tensor, idx: np.ndarray) -> Tensor:
    """Rows ``a[idx]``; repeated indices accumulate their gradients."""
    idx = np.asarray(idx, dtype=np.intp)
    shape = a.shape

    def grad_fn(g):
        out = np.zeros(shape)
        np.add.at(out, idx, g)
        return (out,)

    return _node(a.data[idx], (a,), grad_fn)


ACTIVATIONS = {
    "tanh": tanh,
    "relu": relu,
    "sigmoid": sigmoid,
    "identity": identity,
}


def _topological_order(root: Tensor) -> list:
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
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor, leaves: Iterable[Tensor]) -> list:
    """Gradients of a scalar ``loss`` with respect to each tensor in ``leaves``.

    Leaves that the loss does not depend on receive a zero array.
    """
    if loss.data.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    leaves = list(leaves)
    grads = {id(loss): np.ones_like(loss.data)}
    for node in reversed(_topological_order(loss)):
        g = grads.get(id(node))
        if g is None or not node._parents:
            continue
        for parent, pg in zip(node._parents, node._grad_fn(g)):
            if pg is None:
                continue
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg
    return [np.array(grads[id(leaf)], dtype=np.float64).reshape(leaf.shape) if id(leaf) in grads
            else np.zeros_like(leaf.data) for leaf in leaves]
