import logging
from contextlib import contextmanager
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)

DTYPES: Dict[str, type] = {"f32": np.float32, "f64": np.float64}

_grad_enabled = True


def resolve_dtype(dtype: Union[str, np.dtype, type, None]) -> np.dtype:
    """Map 'f32' / 'f64' (or a numpy float dtype) onto a numpy dtype."""
    if dtype is None:
        return np.dtype(np.float32)
    if isinstance(dtype, str) and dtype in DTYPES:
        return np.dtype(DTYPES[dtype])
    resolved = np.dtype(dtype)
    if resolved not in (np.dtype(np.float32), np.dtype(np.float64)):
        raise ValueError(f"Unsupported dtype {dtype}; expected f32 or f64")
    return resolved


def dtype_tag(dtype: np.dtype) -> str:
    return "f64" if np.dtype(dtype) == np.float64 else "f32"


@contextmanager
def no_grad() -> Iterator[None]:
    """Disable tape recording inside the block."""
    global _grad_enabled
    previous = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = previous


def is_grad_enabled() -> bool:
    return _grad_enabled


def check_finite(array: np.ndarray, kernel: str) -> None:
    if not np.all(np.isfinite(array)):
        raise FloatingPointError(f"{kernel}: non-finite value in output of shape {array.shape}")


class Function:
    """
    Base class for differentiable kernels (one tape node per application).

    Subclasses implement ``forward`` over raw numpy arrays and ``backward``,
    which maps the gradient of the loss w.r.t. the kernel output onto one
    gradient (or None) per parent tensor. Anything backward needs is stored on
    ``self.saved`` during forward and released once the node has been visited.
    """

    name = "function"

    def __init__(self, *parents: "Tensor"):
        self.parents: Tuple["Tensor", ...] = parents
        self.saved: Dict[str, Any] = {}
        self.consumed = False

    def forward(self, *arrays: np.ndarray, **kwargs: Any) -> np.ndarray:
        raise NotImplementedError(f"{self.name}: forward not implemented")

    def backward(self, grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        raise NotImplementedError(f"{self.name}: backward not implemented")

    @classmethod
    def apply(cls, *tensors: "Tensor", **kwargs: Any) -> "Tensor":
        fn = cls(*tensors)
        out = fn.forward(*(t.data for t in tensors), **kwargs)
        check_finite(out, cls.name)
        requires_grad = _grad_enabled and any(t.requires_grad for t in tensors)
        if not requires_grad:
            fn.saved.clear()
            fn.parents = ()
            return Tensor(out)
        return Tensor(out, requires_grad=True, _ctx=fn)


class Tensor:
    """
    Dense row-major array plus reverse-mode differentiation metadata.

    ``data`` is a float32 or float64 numpy array; ``grad``, once populated,
    has exactly the shape of ``data``. Tensors produced by a kernel carry the
    tape node that created them in ``_ctx``; leaves have ``_ctx is None``.
    """

    def __init__(
        self,
        data: Any,
        dtype: Union[str, np.dtype, type, None] = None,
        requires_grad: bool = False,
        _ctx: Optional[Function] = None,
    ):
        array = np.asarray(data)
        if dtype is not None:
            array = array.astype(resolve_dtype(dtype), copy=False)
        elif array.dtype not in (np.float32, np.float64):
            array = array.astype(np.float32)
        self.data: np.ndarray = array
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self._ctx = _ctx

    def __repr__(self) -> str:
        return (
            f"Tensor(shape={self.shape}, dtype={dtype_tag(self.dtype)}, "
            f"requires_grad={self.requires_grad})"
        )

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)

    # Operator sugar; kernels live in functional.py.
    def __add__(self, other: Any) -> "Tensor":
        from chunkstack.autodiff import functional as F

        return F.add(self, F.as_tensor(other, self.dtype))

    __radd__ = __add__

    def __sub__(self, other: Any) -> "Tensor":
        from chunkstack.autodiff import functional as F

        return F.sub(self, F.as_tensor(other, self.dtype))

    def __rsub__(self, other: Any) -> "Tensor":
        from chunkstack.autodiff import functional as F

        return F.sub(F.as_tensor(other, self.dtype), self)

    def __mul__(self, other: Any) -> "Tensor":
        from chunkstack.autodiff import functional as F

        return F.mul(self, F.as_tensor(other, self.dtype))

    __rmul__ = __mul__

    def __neg__(self) -> "Tensor":
        return self * -1.0

    def __matmul__(self, other: "Tensor") -> "Tensor":
        from chunkstack.autodiff import functional as F

        return F.matmul(self, other)

    def __getitem__(self, index: Any) -> "Tensor":
        from chunkstack.autodiff import functional as F

        return F.getitem(self, index)

    def reshape(self, *shape: Any) -> "Tensor":
        from chunkstack.autodiff import functional as F

        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return F.reshape(self, shape)

    def transpose(self, *axes: int) -> "Tensor":
        from chunkstack.autodiff import functional as F

        return F.transpose(self, axes if axes else None)

    def backward(self) -> None:
        """
        Populate ``grad`` on every leaf reachable from this scalar.

        Nodes are visited once each in reverse topological order. Gradients of
        leaves accumulate into an existing ``grad`` buffer, so callers reset
        parameters between optimizer steps (``Module.zero_grad``). The graph is
        consumed: a second call on the same graph raises.
        """
        if self.data.size != 1:
            raise ValueError(f"backward needs a scalar loss, got shape {self.shape}")
        if self._ctx is None:
            if not self.requires_grad:
                raise RuntimeError("backward called on a tensor that does not require grad")
            self.grad = np.ones_like(self.data) if self.grad is None else self.grad + 1.0
            return
        if self._ctx.consumed:
            raise RuntimeError(
                "backward called twice on the same graph; run the forward pass again first"
            )

        order = self._topological_order()
        grads: Dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            grad = grads.pop(id(node), None)
            if grad is None:
                continue
            ctx = node._ctx
            if ctx is None:
                if node.grad is None:
                    node.grad = np.zeros_like(node.data)
                node.grad += grad
                continue
            parent_grads = ctx.backward(grad)
            for parent, parent_grad in zip(ctx.parents, parent_grads):
                if parent_grad is None or not parent.requires_grad:
                    continue
                if parent_grad.shape != parent.shape:
                    raise RuntimeError(
                        f"{ctx.name}: backward produced gradient of shape {parent_grad.shape} "
                        f"for input of shape {parent.shape}"
                    )
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + parent_grad
                else:
                    grads[key] = parent_grad.astype(parent.dtype, copy=True)
            ctx.saved.clear()
            ctx.consumed = True

    def _topological_order(self) -> List["Tensor"]:
        order: List[Tensor] = []
        visited = set()
        stack: List[Tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            if node._ctx is not None:
                for parent in reversed(node._ctx.parents):
                    if parent.requires_grad and id(parent) not in visited:
                        stack.append((parent, False))
        return order
