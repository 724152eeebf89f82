"""
Dense float64 tensors and the tape that records ops for reverse-mode differentiation.
"""
import logging
import threading
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import GraphError

logger = logging.getLogger(__name__)

_local = threading.local()

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class Tensor:
    """Immutable float64 array, optionally attached to a node of a recording Graph."""

    __slots__ = ("data", "_graph", "_node")

    def __init__(self, data, graph: Optional["Graph"] = None, node: Optional[int] = None):
        arr = np.array(data, dtype=np.float64)
        arr.setflags(write=False)
        self.data = arr
        self._graph = graph
        self._node = node

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return int(self.data.size)

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def tracked_in(self, graph: Optional["Graph"]) -> bool:
        return graph is not None and self._graph is graph and self._node is not None

    def __repr__(self):
        return f"Tensor(shape={list(self.shape)}, tracked={self._node is not None})"

    # Operator sugar; the op implementations live in ops.py.
    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    def __radd__(self, other):
        from . import ops
        return ops.add(other, self)

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops
        return ops.mul(self, other)

    def __rmul__(self, other):
        from . import ops
        return ops.mul(other, self)

    def __matmul__(self, other):
        from . import ops
        return ops.matmul(self, other)

    def __neg__(self):
        from . import ops
        return ops.neg(self)


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


class _Node:
    __slots__ = ("op", "inputs", "backward")

    def __init__(self, op: str, inputs: Tuple[int, ...], backward: Optional[BackwardFn]):
        self.op = op
        self.inputs = inputs
        self.backward = backward


class Graph:
    """
    Records ops executed inside its `with` block.
    Node ids are assigned in execution order, so every input precedes its consumer.
    """

    def __init__(self):
        self._nodes: List[_Node] = []
        self._leaves: Dict[str, int] = {}
        self._frozen: Dict[str, Tuple[int, ...]] = {}
        self._shapes: Dict[str, Tuple[int, ...]] = {}
        self._consumed = False

    def __enter__(self) -> "Graph":
        stack = getattr(_local, "stack", None)
        if stack is None:
            stack = _local.stack = []
        stack.append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        _local.stack.pop()
        return False

    def __len__(self):
        return len(self._nodes)

    def param(self, name: str, value, trainable: bool = True) -> Tensor:
        """Registers a named leaf. Frozen leaves are constants that still get a zero gradient."""
        if name in self._leaves or name in self._frozen:
            raise GraphError(f"leaf {name!r} registered twice")
        arr = np.asarray(value, dtype=np.float64)
        if not trainable:
            self._frozen[name] = arr.shape
            return Tensor(arr)
        self._leaves[name] = len(self._nodes)
        self._shapes[name] = arr.shape
        self._nodes.append(_Node("leaf", (), None))
        return Tensor(arr, self, self._leaves[name])

    def record(self, op: str, inputs: Sequence[Tensor], value: np.ndarray, backward: BackwardFn) -> Tensor:
        if self._consumed:
            raise GraphError("cannot record onto a graph whose backward pass already ran")
        ids = tuple(t._node if t.tracked_in(self) else -1 for t in inputs)
        self._nodes.append(_Node(op, ids, backward))
        return Tensor(value, self, len(self._nodes) - 1)

    def backward(self, loss: Tensor) -> Dict[str, Tensor]:
        """Returns d(loss)/d(leaf) for every registered leaf; frozen leaves get zeros."""
        if self._consumed:
            raise GraphError("backward already ran on this graph")
        if loss.size != 1:
            raise GraphError(f"backward needs a scalar loss, got shape {list(loss.shape)}")
        self._consumed = True

        grads: List[Optional[np.ndarray]] = [None] * len(self._nodes)
        if loss.tracked_in(self):
            grads[loss._node] = np.ones_like(loss.data)
            for idx in range(loss._node, -1, -1):
                g = grads[idx]
                node = self._nodes[idx]
                if g is None or node.backward is None:
                    continue
                for in_id, in_grad in zip(node.inputs, node.backward(g)):
                    if in_id < 0 or in_grad is None:
                        continue
                    grads[in_id] = in_grad if grads[in_id] is None else grads[in_id] + in_grad
                if node.op != "leaf":
                    grads[idx] = None

        out: Dict[str, Tensor] = {}
        for name, idx in self._leaves.items():
            g = grads[idx]
            # Leaves unreachable from the loss get zeros.
            out[name] = Tensor(g if g is not None else np.zeros(self._shapes[name]))
        for name, shape in self._frozen.items():
            out[name] = Tensor(np.zeros(shape))
        logger.debug(f"Backward visited {len(self._nodes)} nodes, {len(out)} leaves")
        return out


def current_graph() -> Optional[Graph]:
    stack = getattr(_local, "stack", None)
    return stack[-1] if stack else None
