"""Reverse-mode differentiation over numpy arrays.

Each operation records its parents and a closure mapping the output gradient
to parent gradients. ``Tensor.backward`` walks the graph in reverse
topological order. Every op checks its result for NaN/inf and names itself
in the raised ``NonFiniteError``.
"""

from typing import Any, Callable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import special

from ..exceptions import NonFiniteError, ShapeMismatchError

Operand = Union["Tensor", np.ndarray, float, int]
BackwardFn = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]

_GELU_C = float(np.sqrt(2.0 / np.pi))


class Tensor:
    """An array node in a differentiation graph."""

    __slots__ = ("data", "grad", "requires_grad", "op", "name", "_parents", "_backward")

    def __init__(
        self,
        data: np.ndarray,
        requires_grad: bool = False,
        op: str = "const",
        name: Optional[str] = None,
        parents: Tuple["Tensor", ...] = (),
        backward: Optional[BackwardFn] = None,
    ):
        self.data = data
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.op = op
        self.name = name
        self._parents = parents
        self._backward = backward

    # -- construction -----------------------------------------------------

    @classmethod
    def leaf(cls, values: np.ndarray, name: str) -> "Tensor":
        """A trainable input whose gradient is collected by ``backward``."""
        return cls(values, requires_grad=True, op="leaf", name=name)

    @classmethod
    def const(cls, values: Any, dtype: Any = None) -> "Tensor":
        """A non-trainable input."""
        return cls(np.asarray(values, dtype=dtype))

    def _lift(self, other: Operand) -> "Tensor":
        if isinstance(other, Tensor):
            return other
        return Tensor(np.asarray(other, dtype=self.data.dtype))

    # -- properties -------------------------------------------------------

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def __repr__(self) -> str:
        return f"Tensor(op={self.op}, shape={self.shape}, dtype={self.dtype})"

    # -- operators --------------------------------------------------------

    def __add__(self, other: Operand) -> "Tensor":
        return add(self, self._lift(other))

    def __radd__(self, other: Operand) -> "Tensor":
        return add(self._lift(other), self)

    def __sub__(self, other: Operand) -> "Tensor":
        return sub(self, self._lift(other))

    def __rsub__(self, other: Operand) -> "Tensor":
        return sub(self._lift(other), self)

    def __mul__(self, other: Operand) -> "Tensor":
        return mul(self, self._lift(other))

    def __rmul__(self, other: Operand) -> "Tensor":
        return mul(self._lift(other), self)

    def __truediv__(self, other: Operand) -> "Tensor":
        return div(self, self._lift(other))

    def __rtruediv__(self, other: Operand) -> "Tensor":
        return div(self._lift(other), self)

    def __neg__(self) -> "Tensor":
        return mul(self, self._lift(-1.0))

    def __matmul__(self, other: Operand) -> "Tensor":
        return matmul(self, self._lift(other))

    def __getitem__(self, index: Any) -> "Tensor":
        return take(self, index)

    @property
    def T(self) -> "Tensor":
        return transpose(self)

    def sum(self, axis: Optional[int] = None, keepdims: bool = False) -> "Tensor":
        return reduce_sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis: Optional[int] = None, keepdims: bool = False) -> "Tensor":
        return reduce_mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape: int) -> "Tensor":
        return reshape(self, shape)

    # -- backward ---------------------------------------------------------

    def backward(self) -> None:
        """Accumulate d(self)/d(leaf) into ``leaf.grad`` for every leaf."""
        if self.data.size != 1:
            raise ShapeMismatchError(
                f"backward() needs a scalar output, got shape {self.shape}",
                op=self.op,
            )
        order = _topological_order(self)
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is None or node.grad is None:
                continue
            parent_grads = node._backward(node.grad)
            for parent, grad in zip(node._parents, parent_grads):
                if grad is None or not parent.requires_grad:
                    continue
                parent.grad = grad if parent.grad is None else parent.grad + grad


def _topological_order(root: Tensor) -> Sequence[Tensor]:
    order = []
    seen = set()
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
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in seen:
                stack.append((parent, False))
    return order


def _check_finite(data: np.ndarray, op: str) -> None:
    if not np.all(np.isfinite(data)):
        raise NonFiniteError(f"Non-finite value produced by '{op}'", op=op)


def _result(
    data: np.ndarray, op: str, parents: Tuple[Tensor, ...], backward: BackwardFn
) -> Tensor:
    _check_finite(data, op)
    if not any(p.requires_grad for p in parents):
        return Tensor(data, op=op)
    return Tensor(data, requires_grad=True, op=op, parents=parents, backward=backward)


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _check_broadcast(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError as e:
        raise ShapeMismatchError(
            f"'{op}' cannot broadcast {a.shape} with {b.shape}", op=op
        ) from e


# ---------------------------------------------------------------------------
# Elementwise arithmetic


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "add")
    return _result(
        a.data + b.data,
        "add",
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "sub")
    return _result(
        a.data - b.data,
        "sub",
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
    )


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "mul")
    return _result(
        a.data * b.data,
        "mul",
        (a, b),
        lambda g: (
            _unbroadcast(g * b.data, a.shape),
            _unbroadcast(g * a.data, b.shape),
        ),
    )


def div(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "div")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = a.data / b.data
    return _result(
        out,
        "div",
        (a, b),
        lambda g: (
            _unbroadcast(g / b.data, a.shape),
            _unbroadcast(-g * out / b.data, b.shape),
        ),
    )


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeMismatchError(
            f"'matmul' expects (m,k)@(k,n), got {a.shape}@{b.shape}", op="matmul"
        )
    return _result(
        a.data @ b.data,
        "matmul",
        (a, b),
        lambda g: (g @ b.data.T, a.data.T @ g),
    )


# ---------------------------------------------------------------------------
# Shape and reduction


def reduce_sum(a: Tensor, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    def backward(g: np.ndarray) -> Tuple[np.ndarray]:
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _result(
        np.asarray(a.data.sum(axis=axis, keepdims=keepdims)), "sum", (a,), backward
    )


def reduce_mean(
    a: Tensor, axis: Optional[int] = None, keepdims: bool = False
) -> Tensor:
    count = a.data.size if axis is None else a.shape[axis]
    return reduce_sum(a, axis=axis, keepdims=keepdims) * (1.0 / count)


def reshape(a: Tensor, shape: Tuple[int, ...]) -> Tensor:
    return _result(
        a.data.reshape(shape), "reshape", (a,), lambda g: (g.reshape(a.shape),)
    )


def transpose(a: Tensor) -> Tensor:
    return _result(a.data.T, "transpose", (a,), lambda g: (g.T,))


def take(a: Tensor, index: Any) -> Tensor:
    """Fancy or basic indexing; repeated indices accumulate gradient."""

    def backward(g: np.ndarray) -> Tuple[np.ndarray]:
        grad = np.zeros_like(a.data)
        np.add.at(grad, index, g)
        return (grad,)

    return _result(np.asarray(a.data[index]), "take", (a,), backward)


# ---------------------------------------------------------------------------
# Nonlinearities


def exp(a: Tensor) -> Tensor:
    with np.errstate(over="ignore"):
        out = np.exp(a.data)
    return _result(out, "exp", (a,), lambda g: (g * out,))


def log(a: Tensor) -> Tensor:
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(a.data)
    return _result(out, "log", (a,), lambda g: (g / a.data,))


def square(a: Tensor) -> Tensor:
    return _result(a.data * a.data, "square", (a,), lambda g: (2.0 * g * a.data,))


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return _result(
        np.where(mask, a.data, 0).astype(a.dtype), "relu", (a,), lambda g: (g * mask,)
    )


def gelu(a: Tensor) -> Tensor:
    """GELU with the tanh approximation."""
    x = a.data
    inner = _GELU_C * (x + 0.044715 * x**3)
    t = np.tanh(inner)
    out = 0.5 * x * (1.0 + t)

    def backward(g: np.ndarray) -> Tuple[np.ndarray]:
        d_inner = _GELU_C * (1.0 + 3 * 0.044715 * x**2)
        return (g * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * d_inner),)

    return _result(out.astype(x.dtype), "gelu", (a,), backward)


def sigmoid(a: Tensor) -> Tensor:
    out = special.expit(a.data)
    return _result(out, "sigmoid", (a,), lambda g: (g * out * (1.0 - out),))


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    out = special.softmax(a.data, axis=axis)

    def backward(g: np.ndarray) -> Tuple[np.ndarray]:
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return _result(out, "softmax", (a,), backward)


def log_softmax(a: Tensor, axis: int = -1) -> Tensor:
    out = special.log_softmax(a.data, axis=axis)

    def backward(g: np.ndarray) -> Tuple[np.ndarray]:
        return (g - np.exp(out) * g.sum(axis=axis, keepdims=True),)

    return _result(out, "log_softmax", (a,), backward)


def clip(a: Tensor, low: float, high: float) -> Tensor:
    """Clamp; the gradient is zero where the clamp is active."""
    mask = (a.data >= low) & (a.data <= high)
    return _result(
        np.clip(a.data, low, high), "clip", (a,), lambda g: (g * mask,)
    )


def normalize_rows(a: Tensor) -> Tensor:
    """Scale each row to unit Euclidean norm; zero rows stay zero."""
    if a.data.ndim != 2:
        raise ShapeMismatchError(
            f"'normalize_rows' expects a matrix, got {a.shape}", op="normalize_rows"
        )
    norms = np.sqrt((a.data * a.data).sum(axis=1, keepdims=True))
    zero = norms == 0
    safe = np.where(zero, 1.0, norms).astype(a.dtype)
    out = a.data / safe

    def backward(g: np.ndarray) -> Tuple[np.ndarray]:
        proj = (g * out).sum(axis=1, keepdims=True)
        return (np.where(zero, 0.0, (g - out * proj) / safe).astype(a.dtype),)

    return _result(out, "normalize_rows", (a,), backward)
