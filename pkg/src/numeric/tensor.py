"""Dense float64 tensors with reverse-mode differentiation.

A :class:`Tensor` wraps a read-only numpy array. Every op builds a new tensor
holding references to its parents and a closure mapping the output adjoint to
one adjoint per parent. :meth:`Tensor.backward` replays those closures in
reverse topological order (the :class:`ComputationRecord`).
"""

from __future__ import annotations

import logging
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from src.core.exceptions import InvalidInputError, NonFiniteError, ShapeError

logger = logging.getLogger(__name__)

BackwardFn = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]
Operand = Union["Tensor", np.ndarray, float, int]


def _frozen(data) -> np.ndarray:
    arr = np.array(data, dtype=np.float64)
    arr.flags.writeable = False
    return arr


def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    """N-dimensional real array with an optional gradient slot."""

    __slots__ = ("data", "requires_grad", "grad", "name", "_parents", "_backward", "_op")

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        arr = _frozen(data)
        if arr.size and not np.all(np.isfinite(arr)):
            raise NonFiniteError(f"tensor {name or ''} constructed with non-finite values".strip())
        self.data = arr
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self._parents: Tuple[Tensor, ...] = ()
        self._backward: Optional[BackwardFn] = None
        self._op = ""

    # ------------------------------------------------------------------
    # construction helpers
    # ------------------------------------------------------------------
    @classmethod
    def from_op(cls, data: np.ndarray, parents: Sequence["Tensor"], backward: BackwardFn, op: str) -> "Tensor":
        """Result of a differentiable op. Non-finite output is an error."""
        arr = _frozen(data)
        if arr.size and not np.all(np.isfinite(arr)):
            raise NonFiniteError(f"op '{op}' produced a non-finite value")
        out = cls.__new__(cls)
        out.data = arr
        out.grad = None
        out.name = None
        out._op = op
        out.requires_grad = any(p.requires_grad for p in parents)
        if out.requires_grad:
            out._parents = tuple(parents)
            out._backward = backward
        else:
            out._parents = ()
            out._backward = None
        return out

    @staticmethod
    def lift(value: Operand) -> "Tensor":
        return value if isinstance(value, Tensor) else Tensor(value)

    # ------------------------------------------------------------------
    # introspection
    # ------------------------------------------------------------------
    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(()))

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)

    def assign(self, data: np.ndarray) -> None:
        """Replace the value of a leaf tensor (optimizer updates, checkpoint loads)."""
        if self._parents:
            raise InvalidInputError("only leaf tensors can be reassigned")
        arr = _frozen(data)
        if arr.shape != self.data.shape:
            raise ShapeError(f"cannot assign shape {arr.shape} to tensor of shape {self.shape}")
        self.data = arr

    def __repr__(self) -> str:
        label = f" name={self.name}" if self.name else ""
        return f"Tensor(shape={self.shape}{label}, requires_grad={self.requires_grad})"

    # ------------------------------------------------------------------
    # elementwise arithmetic
    # ------------------------------------------------------------------
    def __add__(self, other: Operand) -> "Tensor":
        other = Tensor.lift(other)
        a_shape, b_shape = self.shape, other.shape

        def backward(g):
            return unbroadcast(g, a_shape), unbroadcast(g, b_shape)

        return Tensor.from_op(self.data + other.data, (self, other), backward, "add")

    __radd__ = __add__

    def __neg__(self) -> "Tensor":
        return Tensor.from_op(-self.data, (self,), lambda g: (-g,), "neg")

    def __sub__(self, other: Operand) -> "Tensor":
        return self + (-Tensor.lift(other))

    def __rsub__(self, other: Operand) -> "Tensor":
        return Tensor.lift(other) + (-self)

    def __mul__(self, other: Operand) -> "Tensor":
        other = Tensor.lift(other)
        a, b = self.data, other.data

        def backward(g):
            return unbroadcast(g * b, a.shape), unbroadcast(g * a, b.shape)

        return Tensor.from_op(a * b, (self, other), backward, "mul")

    __rmul__ = __mul__

    def __truediv__(self, other: Operand) -> "Tensor":
        other = Tensor.lift(other)
        if np.any(other.data == 0.0):
            raise NonFiniteError("division by zero")
        a, b = self.data, other.data

        def backward(g):
            return unbroadcast(g / b, a.shape), unbroadcast(-g * a / (b * b), b.shape)

        return Tensor.from_op(a / b, (self, other), backward, "div")

    def __rtruediv__(self, other: Operand) -> "Tensor":
        return Tensor.lift(other) / self

    def __pow__(self, exponent: float) -> "Tensor":
        if isinstance(exponent, Tensor):
            raise InvalidInputError("only constant exponents are supported")
        a = self.data

        def backward(g):
            return (g * exponent * a ** (exponent - 1),)

        return Tensor.from_op(a ** exponent, (self,), backward, "pow")

    def __matmul__(self, other: Operand) -> "Tensor":
        return matmul(self, Tensor.lift(other))

    # ------------------------------------------------------------------
    # unary math
    # ------------------------------------------------------------------
    def exp(self) -> "Tensor":
        out = np.exp(self.data)
        return Tensor.from_op(out, (self,), lambda g: (g * out,), "exp")

    def log(self) -> "Tensor":
        a = self.data
        if np.any(a <= 0.0):
            raise NonFiniteError("log of a non-positive value")
        return Tensor.from_op(np.log(a), (self,), lambda g: (g / a,), "log")

    def sqrt(self) -> "Tensor":
        out = np.sqrt(self.data)
        return Tensor.from_op(out, (self,), lambda g: (g * 0.5 / out,), "sqrt")

    def relu(self) -> "Tensor":
        a = self.data
        return Tensor.from_op(np.maximum(a, 0.0), (self,), lambda g: (g * (a > 0.0),), "relu")

    def clip_min(self, floor: float) -> "Tensor":
        """``max(x, floor)``; the gradient passes where ``x >= floor``."""
        a = self.data
        return Tensor.from_op(np.maximum(a, floor), (self,), lambda g: (g * (a >= floor),), "clip_min")

    # ------------------------------------------------------------------
    # reductions
    # ------------------------------------------------------------------
    def sum(self, axis: Optional[Union[int, Tuple[int, ...]]] = None, keepdims: bool = False) -> "Tensor":
        shape = self.shape

        def backward(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, shape).copy(),)

        return Tensor.from_op(self.data.sum(axis=axis, keepdims=keepdims), (self,), backward, "sum")

    def mean(self, axis: Optional[Union[int, Tuple[int, ...]]] = None, keepdims: bool = False) -> "Tensor":
        if self.size == 0:
            raise ShapeError("mean of an empty tensor")
        count = self.size if axis is None else int(np.prod([self.shape[a] for a in np.atleast_1d(axis)]))
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    # ------------------------------------------------------------------
    # shape manipulation
    # ------------------------------------------------------------------
    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        original = self.shape
        return Tensor.from_op(self.data.reshape(shape), (self,), lambda g: (g.reshape(original),), "reshape")

    def transpose(self, *axes) -> "Tensor":
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        inverse = tuple(np.argsort(axes))
        return Tensor.from_op(self.data.transpose(axes), (self,), lambda g: (g.transpose(inverse),), "transpose")

    def swapaxes(self, a: int, b: int) -> "Tensor":
        return Tensor.from_op(
            np.swapaxes(self.data, a, b), (self,), lambda g: (np.swapaxes(g, a, b),), "swapaxes"
        )

    @property
    def T(self) -> "Tensor":
        return self.swapaxes(-1, -2)

    def __getitem__(self, index) -> "Tensor":
        shape = self.shape
        parts = index if isinstance(index, tuple) else (index,)
        fancy = any(isinstance(p, (np.ndarray, list)) for p in parts)

        def backward(g):
            full = np.zeros(shape)
            if fancy:
                # repeated indices must accumulate
                np.add.at(full, index, g)
            else:
                full[index] = g
            return (full,)

        return Tensor.from_op(self.data[index], (self,), backward, "getitem")

    # ------------------------------------------------------------------
    # differentiation
    # ------------------------------------------------------------------
    def backward(self) -> "ComputationRecord":
        """Accumulate d(self)/d(leaf) into ``.grad`` of every reachable leaf."""
        if self.size != 1:
            raise ShapeError(f"backward needs a scalar loss, got shape {self.shape}")
        record = ComputationRecord.from_root(self)
        if not record.ops:
            raise InvalidInputError("backward on a tensor with an empty computation record")
        record.replay(self)
        return record


class ComputationRecord:
    """Executed ops reachable from a root, in topological order."""

    def __init__(self, ops: List[Tensor], leaves: List[Tensor]):
        self.ops = ops
        self.leaves = leaves

    @classmethod
    def from_root(cls, root: Tensor) -> "ComputationRecord":
        order: List[Tensor] = []
        leaves: List[Tensor] = []
        visited = set()
        # iterative post-order DFS; deep encoders exceed the recursion limit
        stack: List[Tuple[Tensor, bool]] = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                if node._parents:
                    order.append(node)
                elif node.requires_grad:
                    leaves.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in visited:
                    stack.append((parent, False))
        return cls(order, leaves)

    def replay(self, root: Tensor) -> None:
        adjoints: Dict[int, np.ndarray] = {id(root): np.ones_like(root.data)}
        for node in reversed(self.ops):
            g = adjoints.pop(id(node), None)
            if g is None:
                continue
            parent_grads = node._backward(g)
            for parent, pg in zip(node._parents, parent_grads):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in adjoints:
                    adjoints[key] = adjoints[key] + pg
                else:
                    adjoints[key] = pg
        for leaf in self.leaves:
            g = adjoints.get(id(leaf))
            if g is None:
                continue
            if leaf.grad is None:
                leaf.grad = np.array(g, dtype=np.float64)
            else:
                leaf.grad = leaf.grad + g


def backward(loss: Tensor, params: Optional[Mapping[str, Tensor]] = None) -> Dict[str, np.ndarray]:
    """Differentiate ``loss`` and return gradients for ``params``.

    Gradients of ``params`` are reset first; parameters the loss does not reach
    end with a zero gradient.
    """
    params = params or {}
    for p in params.values():
        p.zero_grad()
    loss.backward()
    return {name: p.grad for name, p in params.items()}


# ----------------------------------------------------------------------
# multi-input ops
# ----------------------------------------------------------------------
def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Batched matrix product over the last two axes with broadcasting."""
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs >=2-D operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner dimensions differ: {a.shape} @ {b.shape}")
    x, y = a.data, b.data

    def backward(g):
        ga = g @ np.swapaxes(y, -1, -2)
        gb = np.swapaxes(x, -1, -2) @ g
        return unbroadcast(ga, x.shape), unbroadcast(gb, y.shape)

    return Tensor.from_op(x @ y, (a, b), backward, "matmul")


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [Tensor.lift(t) for t in tensors]
    if not tensors:
        raise ShapeError("concat of an empty list")
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))

    return Tensor.from_op(np.concatenate([t.data for t in tensors], axis=axis), tensors, backward, "concat")


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [Tensor.lift(t) for t in tensors]
    if not tensors:
        raise ShapeError("stack of an empty list")

    def backward(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(tensors)))

    return Tensor.from_op(np.stack([t.data for t in tensors], axis=axis), tensors, backward, "stack")


def where(mask: np.ndarray, x: Tensor, fill: float) -> Tensor:
    """Keep ``x`` where ``mask`` is true, ``fill`` elsewhere."""
    mask = np.broadcast_to(np.asarray(mask, dtype=bool), x.shape)
    return Tensor.from_op(np.where(mask, x.data, fill), (x,), lambda g: (g * mask,), "where")


def dot(a: Tensor, b: Tensor) -> Tensor:
    return (a * b).sum()
