"""Dense tensor with reverse-mode automatic differentiation.

Every differentiable operation is a `Function` subclass. `Function.apply` runs the
forward pass on raw numpy arrays and wraps the result in a `Tensor` that remembers
its creator, so `Tensor.backward()` can walk the graph in reverse topological order.
"""
import contextlib
import logging
from typing import Any, Iterator, Sequence, TypeVar

import numpy as np

logger = logging.getLogger(__name__)

_GRAD_ENABLED = True
"""module level switch flipped by `no_grad()`"""


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    """disables graph construction inside the block (inference, detached evaluation)"""
    global _GRAD_ENABLED
    previous = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = previous


def is_grad_enabled() -> bool:
    return _GRAD_ENABLED


class Function:
    """Base class for differentiable operations.

    Subclasses implement `forward` on numpy arrays and `backward`, which receives
    dL/d(output) and returns one gradient (or None) per input tensor.
    """

    def __init__(self, *tensors: "Tensor"):
        self.tensors = tensors
        self.saved: dict[str, Any] = {}
        """arrays the backward pass needs, stored by the forward pass"""

    def forward(self, *arrays: np.ndarray, **kwargs: Any) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} has no forward pass")

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray | None, ...]:
        raise NotImplementedError(f"{type(self).__name__} has no backward pass")

    @classmethod
    def apply(cls, *tensors: "Tensor", **kwargs: Any) -> "Tensor":
        func = cls(*tensors)
        out_data = func.forward(*(t.data for t in tensors), **kwargs)

        requires_grad = _GRAD_ENABLED and any(t.requires_grad for t in tensors)
        if not requires_grad:
            # nothing upstream needs a gradient, so the graph link is dropped
            return Tensor(out_data)
        return Tensor(out_data, creator=func, requires_grad=True)

    @staticmethod
    def unbroadcast(grad: np.ndarray, to_shape: tuple[int, ...]) -> np.ndarray:
        """sums out the axes numpy broadcasting added so the gradient matches `to_shape`"""
        if grad.shape == to_shape:
            return grad
        while grad.ndim > len(to_shape):
            grad = grad.sum(axis=0)
        for axis, extent in enumerate(to_shape):
            if extent == 1 and grad.shape[axis] != 1:
                grad = grad.sum(axis=axis, keepdims=True)
        return grad


class Tensor:
    """A numpy array participating in a differentiation graph.

    Values are stored as given when they are floating point; integer or python input
    is promoted to float64. `grad` is populated on leaf tensors that require it after
    `backward()` is called on a scalar downstream of them.
    """

    def __init__(
            self,
            data: np.ndarray | float | int | Sequence,
            *,
            creator: Function | None = None,
            requires_grad: bool = False,
            name: str | None = None,
    ):
        data = np.asarray(data)
        if not np.issubdtype(data.dtype, np.floating):
            data = data.astype(np.float64)
        self.data: np.ndarray = data
        self.creator = creator
        self.requires_grad = requires_grad
        self.name = name

        self.grad: np.ndarray | None = None
        """accumulated dL/d(self); same shape as `data` once populated"""

    def __repr__(self):
        label = f", name={self.name}" if self.name else ""
        return f"Tensor<shape={self.shape}, dtype={self.dtype}{label}>"

    # ==== array facts ====
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.size != 1:
            raise ValueError(f"Only single element tensors convert to float. Got shape {self.shape}.")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        """same values, no graph link"""
        return Tensor(self.data)

    def astype(self, dtype: np.dtype | str) -> "Tensor":
        return Tensor(self.data.astype(dtype), requires_grad=self.requires_grad, name=self.name)

    def zero_grad(self) -> None:
        self.grad = None

    # ==== differentiation ====
    def backward(self) -> None:
        """runs reverse-mode differentiation from this scalar tensor

        Gradients accumulate into `grad` of every reachable leaf that requires it, so
        calling backward twice without `zero_grad()` adds the two passes.
        """
        if self.size != 1:
            raise ValueError(f"backward() needs a scalar root. Got a tensor of shape {self.shape}.")
        if not self.requires_grad:
            raise ValueError("backward() called on a tensor that does not require grad.")

        order = self._topological_order()
        grads: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}

        for node in reversed(order):
            grad = grads.pop(id(node), None)
            if grad is None:
                continue
            if node.creator is None:
                node.grad = grad.copy() if node.grad is None else node.grad + grad
                continue

            input_grads = node.creator.backward(grad)
            for parent, parent_grad in zip(node.creator.tensors, input_grads):
                if parent_grad is None or not parent.requires_grad:
                    continue
                if parent_grad.shape != parent.shape:
                    raise ValueError(
                        f"{type(node.creator).__name__} returned a gradient of shape {parent_grad.shape} "
                        f"for an input of shape {parent.shape}."
                    )
                key = id(parent)
                grads[key] = parent_grad if key not in grads else grads[key] + parent_grad

    def _topological_order(self) -> list["Tensor"]:
        """iterative depth-first ordering, inputs before outputs"""
        order: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            if node.creator is not None:
                for parent in node.creator.tensors:
                    if parent.requires_grad and id(parent) not in visited:
                        stack.append((parent, False))
        return order

    # ==== arithmetic ====
    def __add__(self, other) -> "Tensor":
        return Add.apply(self, as_tensor(other, self.dtype))

    def __radd__(self, other) -> "Tensor":
        return Add.apply(as_tensor(other, self.dtype), self)

    def __sub__(self, other) -> "Tensor":
        return Add.apply(self, Neg.apply(as_tensor(other, self.dtype)))

    def __rsub__(self, other) -> "Tensor":
        return Add.apply(as_tensor(other, self.dtype), Neg.apply(self))

    def __mul__(self, other) -> "Tensor":
        return Mul.apply(self, as_tensor(other, self.dtype))

    def __rmul__(self, other) -> "Tensor":
        return Mul.apply(as_tensor(other, self.dtype), self)

    def __truediv__(self, other) -> "Tensor":
        if isinstance(other, Tensor):
            return Mul.apply(self, Reciprocal.apply(other))
        return Mul.apply(self, as_tensor(1.0 / np.asarray(other, dtype=self.dtype), self.dtype))

    def __neg__(self) -> "Tensor":
        return Neg.apply(self)

    def sum(self, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> "Tensor":
        return Sum.apply(self, axis=axis, keepdims=keepdims)

    def mean(self, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> "Tensor":
        count = self.size if axis is None else int(np.prod([self.shape[a] for a in np.atleast_1d(axis)]))
        return self.sum(axis=axis, keepdims=keepdims) / float(count)

    def log(self) -> "Tensor":
        return Log.apply(self)

    def clip(self, low: float | None = None, high: float | None = None) -> "Tensor":
        return Clip.apply(self, low=low, high=high)

    def reshape(self, *shape: int) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return Reshape.apply(self, shape=shape)


TensorType = TypeVar('TensorType', bound=Tensor)
"""Object type Tensor"""


def as_tensor(value: Tensor | np.ndarray | float | int, dtype: np.dtype | None = None) -> Tensor:
    """wraps constants so they can sit in a graph without requiring grad"""
    if isinstance(value, Tensor):
        return value
    array = np.asarray(value, dtype=dtype) if dtype is not None else np.asarray(value)
    return Tensor(array)


class Add(Function):
    def forward(self, a, b):
        self.saved["shapes"] = (a.shape, b.shape)
        return a + b

    def backward(self, grad):
        a_shape, b_shape = self.saved["shapes"]
        return self.unbroadcast(grad, a_shape), self.unbroadcast(grad, b_shape)


class Neg(Function):
    def forward(self, a):
        return -a

    def backward(self, grad):
        return (-grad,)


class Mul(Function):
    def forward(self, a, b):
        self.saved["a"], self.saved["b"] = a, b
        return a * b

    def backward(self, grad):
        a, b = self.saved["a"], self.saved["b"]
        return self.unbroadcast(grad * b, a.shape), self.unbroadcast(grad * a, b.shape)


class Reciprocal(Function):
    def forward(self, a):
        out = 1.0 / a
        self.saved["out"] = out
        return out

    def backward(self, grad):
        out = self.saved["out"]
        return (-grad * out * out,)


class Log(Function):
    def forward(self, a):
        self.saved["a"] = a
        return np.log(a)

    def backward(self, grad):
        return (grad / self.saved["a"],)


class Clip(Function):
    """clamps values; the gradient passes only where the input was inside the range"""

    def forward(self, a, *, low=None, high=None):
        mask = np.ones(a.shape, dtype=bool)
        if low is not None:
            mask &= a >= low
        if high is not None:
            mask &= a <= high
        self.saved["mask"] = mask
        return np.clip(a, low, high)

    def backward(self, grad):
        return (grad * self.saved["mask"],)


class Sum(Function):
    def forward(self, a, *, axis=None, keepdims=False):
        self.saved["shape"] = a.shape
        self.saved["axis"] = axis
        self.saved["keepdims"] = keepdims
        return np.asarray(a.sum(axis=axis, keepdims=keepdims))

    def backward(self, grad):
        shape, axis = self.saved["shape"], self.saved["axis"]
        if axis is not None and not self.saved["keepdims"]:
            grad = np.expand_dims(grad, axis=tuple(a % len(shape) for a in np.atleast_1d(axis)))
        return (np.broadcast_to(grad, shape).copy(),)


class Reshape(Function):
    def forward(self, a, *, shape):
        self.saved["shape"] = a.shape
        return a.reshape(shape)

    def backward(self, grad):
        return (grad.reshape(self.saved["shape"]),)
