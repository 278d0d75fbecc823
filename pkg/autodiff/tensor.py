"""
Dense tensor with define-by-run reverse-mode differentiation.

Every differentiable operation is a `Function` subclass. Calling
`Function.apply` runs the forward pass on raw numpy arrays and, when any
input requires a gradient, links the output back to the function so that
`backward` can walk the graph in reverse topological order.
"""
import itertools
import logging
from contextlib import contextmanager
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from utils.errors import GraphError

logger = logging.getLogger(__name__)

ArrayLike = Union[np.ndarray, float, int, Sequence[float]]

_node_ids = itertools.count()
_default_dtype = np.float32
_grad_enabled = True


def get_default_dtype() -> type:
    """Floating type given to new leaf tensors."""
    return _default_dtype


@contextmanager
def precision(dtype: type) -> Iterator[None]:
    """Temporarily change the dtype of newly created leaf tensors."""
    global _default_dtype
    previous = _default_dtype
    _default_dtype = np.dtype(dtype).type
    try:
        yield
    finally:
        _default_dtype = previous


@contextmanager
def no_grad() -> Iterator[None]:
    """Run forward passes without recording a graph."""
    global _grad_enabled
    previous = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = previous


def is_grad_enabled() -> bool:
    return _grad_enabled


class Function:
    """
    Base class for differentiable operations.

    `forward` receives the input arrays plus keyword options and returns the
    output array; it may stash whatever `backward` needs on `self.saved`.
    `backward` receives dL/d(output) and returns one array (or None) per input.
    """

    def __init__(self, *tensors: "Tensor"):
        self.tensors: Tuple["Tensor", ...] = tensors
        self.saved: Dict[str, Any] = {}

    def forward(self, *arrays: np.ndarray, **kwargs: Any) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} has no forward pass")

    def backward(self, grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        raise NotImplementedError(f"{type(self).__name__} has no backward pass")

    @classmethod
    def apply(cls, *tensors: "Tensor", **kwargs: Any) -> "Tensor":
        func = cls(*tensors)
        out = func.forward(*(t.data for t in tensors), **kwargs)
        out = np.asarray(out)
        if out.dtype != tensors[0].data.dtype:
            out = out.astype(tensors[0].data.dtype)
        requires_grad = _grad_enabled and any(t.requires_grad for t in tensors)
        return Tensor(out, requires_grad=requires_grad, creator=func if requires_grad else None, _raw=True)

    @staticmethod
    def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
        """Sum `grad` down to `shape`, undoing numpy broadcasting."""
        if grad.shape == shape:
            return grad
        while grad.ndim > len(shape):
            grad = grad.sum(axis=0)
        for axis, extent in enumerate(shape):
            if extent == 1 and grad.shape[axis] != 1:
                grad = grad.sum(axis=axis, keepdims=True)
        return grad


class Tensor:
    """
    N-dimensional real array with an optional gradient slot.

    Leaves are created by user code (images, parameters); interior nodes are
    created by `Function.apply` and carry a reference to their creator.
    """

    def __init__(
        self,
        data: ArrayLike,
        requires_grad: bool = False,
        creator: Optional[Function] = None,
        name: Optional[str] = None,
        dtype: Optional[type] = None,
        _raw: bool = False,
    ):
        if _raw:
            self.data = data
        else:
            self.data = np.array(data, dtype=dtype or _default_dtype)
        self.requires_grad = requires_grad
        self.creator = creator
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self.node_id = next(_node_ids)
        self.is_parameter = False
        self._released = False

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def is_leaf(self) -> bool:
        return self.creator is None

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float("nan")

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False, _raw=True)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        backward(self)

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad}{label})"

    # Operator sugar; the functional module holds the implementations.
    def __add__(self, other: Union["Tensor", float]) -> "Tensor":
        from autodiff import functional as F
        return F.add(self, other)

    def __radd__(self, other: float) -> "Tensor":
        from autodiff import functional as F
        return F.add(self, other)

    def __sub__(self, other: Union["Tensor", float]) -> "Tensor":
        from autodiff import functional as F
        return F.sub(self, other)

    def __rsub__(self, other: float) -> "Tensor":
        from autodiff import functional as F
        return F.add(F.scale(self, -1.0), other)

    def __mul__(self, other: Union["Tensor", float]) -> "Tensor":
        from autodiff import functional as F
        return F.mul(self, other)

    def __rmul__(self, other: float) -> "Tensor":
        from autodiff import functional as F
        return F.mul(self, other)

    def __truediv__(self, other: Union["Tensor", float]) -> "Tensor":
        from autodiff import functional as F
        return F.div(self, other)

    def __neg__(self) -> "Tensor":
        from autodiff import functional as F
        return F.scale(self, -1.0)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        from autodiff import functional as F
        return F.matmul(self, other)

    def __pow__(self, exponent: float) -> "Tensor":
        from autodiff import functional as F
        return F.power(self, exponent)


class Graph:
    """Operations behind one output, in topological order (inputs first)."""

    def __init__(self, nodes: List[Tensor]):
        self.nodes = nodes

    def __len__(self) -> int:
        return len(self.nodes)

    @classmethod
    def trace(cls, root: Tensor) -> "Graph":
        ordered: List[Tensor] = []
        visited = set()
        stack: List[Tuple[Tensor, bool]] = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if node.node_id in visited:
                continue
            if expanded:
                visited.add(node.node_id)
                ordered.append(node)
                continue
            stack.append((node, True))
            if node.creator is not None:
                for parent in node.creator.tensors:
                    if parent is not None and parent.requires_grad and parent.node_id not in visited:
                        stack.append((parent, False))
        return cls(ordered)


def backward(loss: Tensor) -> None:
    """
    Populate `.grad` on every leaf that requires a gradient.

    Interior nodes are released afterwards; differentiating the same graph a
    second time requires a fresh forward pass.
    """
    if loss.size != 1:
        raise GraphError(f"backward needs a scalar loss, got shape {loss.shape}")
    if loss._released:
        raise GraphError("graph was already consumed by backward(); run the forward pass again")
    if not loss.requires_grad:
        raise GraphError("loss does not depend on any tensor that requires a gradient")

    graph = Graph.trace(loss)
    pending: Dict[int, np.ndarray] = {loss.node_id: np.ones_like(loss.data)}

    for node in reversed(graph.nodes):
        grad = pending.pop(node.node_id, None)
        if grad is None:
            continue
        if node.creator is None:
            grad = grad.astype(node.data.dtype, copy=False)
            node.grad = grad.copy() if node.grad is None else node.grad + grad
            continue
        input_grads = node.creator.backward(grad)
        for parent, parent_grad in zip(node.creator.tensors, input_grads):
            if parent is None or parent_grad is None or not parent.requires_grad:
                continue
            if parent.node_id in pending:
                pending[parent.node_id] = pending[parent.node_id] + parent_grad
            else:
                pending[parent.node_id] = parent_grad

    for node in graph.nodes:
        if node.creator is not None:
            node.creator = None
            node._released = True
