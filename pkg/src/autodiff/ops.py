"""
Differentiable ops over float64 tensors.
Each op computes its forward value with numpy, checks it is finite, and records a
backward closure on the active Graph when any input is tracked there.
"""
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import NonFiniteError, OpError, ShapeError
from .tensor import Tensor, as_tensor, current_graph

Operand = Union[Tensor, float, int, np.ndarray]


def _emit(op: str, inputs: Sequence[Tensor], value: np.ndarray, backward) -> Tensor:
    if not np.all(np.isfinite(value)):
        raise NonFiniteError(op, f"input shapes {[list(t.shape) for t in inputs]}")
    graph = current_graph()
    if graph is not None and any(t.tracked_in(graph) for t in inputs):
        return graph.record(op, inputs, value, backward)
    return Tensor(value)


def _broadcast(op: str, a: Tensor, b: Tensor) -> Tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(op, [a.shape, b.shape])


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sums a broadcast gradient back down to `shape`."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# --- ELEMENTWISE ---

def add(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast("add", a, b)
    return _emit("add", (a, b), a.data + b.data,
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast("sub", a, b)
    return _emit("sub", (a, b), a.data - b.data,
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast("mul", a, b)
    return _emit("mul", (a, b), a.data * b.data,
                 lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)))


def neg(a: Operand) -> Tensor:
    a = as_tensor(a)
    return _emit("neg", (a,), -a.data, lambda g: (-g,))


def scale(a: Operand, c: float) -> Tensor:
    a = as_tensor(a)
    return _emit("scale", (a,), a.data * c, lambda g: (g * c,))


def square(a: Operand) -> Tensor:
    a = as_tensor(a)
    return _emit("square", (a,), a.data * a.data, lambda g: (2.0 * a.data * g,))


def minimum(a: Operand, b: Operand) -> Tensor:
    """Elementwise min; ties send the gradient to `a`."""
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError("minimum", [a.shape, b.shape])
    pick_a = a.data <= b.data
    return _emit("minimum", (a, b), np.where(pick_a, a.data, b.data),
                 lambda g: (np.where(pick_a, g, 0.0), np.where(pick_a, 0.0, g)))


def sigmoid(a: Operand) -> Tensor:
    a = as_tensor(a)
    x = a.data
    # Split by sign so exp never overflows.
    z = np.exp(-np.abs(x))
    out = np.where(x >= 0, 1.0 / (1.0 + z), z / (1.0 + z))
    return _emit("sigmoid", (a,), out, lambda g: (g * out * (1.0 - out),))


def log(a: Operand) -> Tensor:
    a = as_tensor(a)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(a.data)
    return _emit("log", (a,), out, lambda g: (g / a.data,))


def exp(a: Operand) -> Tensor:
    a = as_tensor(a)
    with np.errstate(over="ignore"):
        out = np.exp(a.data)
    return _emit("exp", (a,), out, lambda g: (g * out,))


def tanh(a: Operand) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.data)
    return _emit("tanh", (a,), out, lambda g: (g * (1.0 - out * out),))


def clip(a: Operand, lo: float, hi: float) -> Tensor:
    """Clamps to [lo, hi]; the subgradient is 1 on the closed interval and 0 outside."""
    if not lo < hi:
        raise OpError("clip", f"requires lo < hi, got lo={lo}, hi={hi}")
    a = as_tensor(a)
    inside = (a.data >= lo) & (a.data <= hi)
    return _emit("clip", (a,), np.clip(a.data, lo, hi), lambda g: (np.where(inside, g, 0.0),))


# --- REDUCTIONS ---

def _expand(g: np.ndarray, shape: Tuple[int, ...], axis: Optional[int]) -> np.ndarray:
    if axis is None:
        return np.broadcast_to(g, shape).copy()
    return np.broadcast_to(np.expand_dims(g, axis), shape).copy()


def sum(a: Operand, axis: Optional[int] = None) -> Tensor:  # noqa: A001
    a = as_tensor(a)
    return _emit("sum", (a,), np.sum(a.data, axis=axis),
                 lambda g: (_expand(g, a.shape, axis),))


def mean(a: Operand, axis: Optional[int] = None) -> Tensor:
    a = as_tensor(a)
    if a.size == 0:
        raise ShapeError("mean", [a.shape], "empty input")
    n = a.size if axis is None else a.shape[axis]
    return _emit("mean", (a,), np.mean(a.data, axis=axis),
                 lambda g: (_expand(g, a.shape, axis) / n,))


def softmax(a: Operand) -> Tensor:
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=-1, keepdims=True)
    return _emit("softmax", (a,), out,
                 lambda g: (out * (g - (g * out).sum(axis=-1, keepdims=True)),))


def log_softmax(a: Operand) -> Tensor:
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    out = shifted - lse
    probs = np.exp(out)
    return _emit("log_softmax", (a,), out,
                 lambda g: (g - probs * g.sum(axis=-1, keepdims=True),))


# --- LINEAR ALGEBRA AND INDEXING ---

def matmul(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError("matmul", [a.shape, b.shape])
    return _emit("matmul", (a, b), a.data @ b.data,
                 lambda g: (g @ b.data.T, a.data.T @ g))


def gather(a: Operand, indices: Sequence[int], axis: int = 0) -> Tensor:
    """
    axis=0 selects rows a[indices] (embedding lookup);
    axis=-1 picks one entry per row, a[i, indices[i]] (log-prob of the realized token).
    """
    a = as_tensor(a)
    idx = np.asarray(indices, dtype=np.int64)
    if axis == 0:
        if a.data.ndim < 1 or (idx.size and (idx.min() < 0 or idx.max() >= a.shape[0])):
            raise ShapeError("gather", [a.shape, idx.shape], "row index out of range")
        out = a.data[idx]

        def backward(g):
            grad = np.zeros_like(a.data)
            np.add.at(grad, idx, g)
            return (grad,)
    elif axis == -1:
        if a.data.ndim != 2 or idx.shape != (a.shape[0],) or (idx.size and (idx.min() < 0 or idx.max() >= a.shape[1])):
            raise ShapeError("gather", [a.shape, idx.shape], "need one in-range index per row")
        rows = np.arange(a.shape[0])
        out = a.data[rows, idx]

        def backward(g):
            grad = np.zeros_like(a.data)
            grad[rows, idx] = g
            return (grad,)
    else:
        raise OpError("gather", f"axis must be 0 or -1, got {axis}")
    return _emit("gather", (a,), out, backward)


def concat(tensors: Sequence[Operand], axis: int = 0) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    if not ts:
        raise ShapeError("concat", [], "no inputs")
    try:
        out = np.concatenate([t.data for t in ts], axis=axis)
    except ValueError:
        raise ShapeError("concat", [t.shape for t in ts])
    bounds = np.cumsum([t.shape[axis] for t in ts])[:-1]
    return _emit("concat", ts, out, lambda g: tuple(np.split(g, bounds, axis=axis)))


def reshape(a: Operand, shape: Tuple[int, ...]) -> Tensor:
    a = as_tensor(a)
    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise ShapeError("reshape", [a.shape, tuple(shape)])
    return _emit("reshape", (a,), out, lambda g: (g.reshape(a.shape),))
