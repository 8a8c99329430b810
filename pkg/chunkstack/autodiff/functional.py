"""
Dense kernels with hand-written backward passes.

Every differentiable computation in chunkstack is a composition of the kernels
below. Masks are plain numpy 0/1 arrays passed as keyword arguments: they are
never differentiated.

Mask convention for the masked reductions: a mask has the leading shape of the
input up to and including the reduced axis (e.g. ``[N, L]`` for ``x`` of shape
``[N, L, H]`` reduced over ``axis=1``) and is broadcast over trailing axes.
"""

import math
from typing import Any, List, Optional, Sequence, Tuple, Union

import numpy as np

from chunkstack.autodiff.tensor import Function, Tensor, resolve_dtype

GELU_COEFF = math.sqrt(2.0 / math.pi)
LAYER_NORM_EPS = 1e-12


def as_tensor(value: Any, dtype: Optional[np.dtype] = None) -> Tensor:
    """Wrap a constant (scalar, list, ndarray) as a non-differentiable tensor."""
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=resolve_dtype(dtype)))


def _broadcast_shape(kernel: str, a: Tuple[int, ...], b: Tuple[int, ...]) -> Tuple[int, ...]:
    try:
        return np.broadcast_shapes(a, b)
    except ValueError:
        raise ValueError(f"{kernel}: incompatible shapes {a} and {b}") from None


def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum out the axes numpy broadcasting added so ``grad`` matches ``shape``."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _expand_mask(mask: np.ndarray, x: np.ndarray, axis: int, kernel: str) -> np.ndarray:
    mask = np.asarray(mask)
    if mask.shape != x.shape[: axis + 1]:
        raise ValueError(
            f"{kernel}: mask shape {mask.shape} does not match input shape {x.shape} "
            f"up to axis {axis}"
        )
    if not np.all((mask == 0) | (mask == 1)):
        raise ValueError(f"{kernel}: mask values must be 0 or 1")
    return mask.reshape(mask.shape + (1,) * (x.ndim - mask.ndim)).astype(x.dtype)


def _normalize_axis(axis: int, ndim: int) -> int:
    return axis + ndim if axis < 0 else axis


# ---------------------------------------------------------------------------
# Elementwise arithmetic
# ---------------------------------------------------------------------------


class Add(Function):
    name = "add"

    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        _broadcast_shape(self.name, a.shape, b.shape)
        self.saved["shapes"] = (a.shape, b.shape)
        return a + b

    def backward(self, grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        a_shape, b_shape = self.saved["shapes"]
        return unbroadcast(grad, a_shape), unbroadcast(grad, b_shape)


class Sub(Function):
    name = "sub"

    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        _broadcast_shape(self.name, a.shape, b.shape)
        self.saved["shapes"] = (a.shape, b.shape)
        return a - b

    def backward(self, grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        a_shape, b_shape = self.saved["shapes"]
        return unbroadcast(grad, a_shape), unbroadcast(-grad, b_shape)


class Mul(Function):
    name = "mul"

    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        _broadcast_shape(self.name, a.shape, b.shape)
        self.saved["a"], self.saved["b"] = a, b
        return a * b

    def backward(self, grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        a, b = self.saved["a"], self.saved["b"]
        return unbroadcast(grad * b, a.shape), unbroadcast(grad * a, b.shape)


class MatMul(Function):
    """Batched matrix product over the last two axes, numpy broadcasting on the rest."""

    name = "matmul"

    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
            raise ValueError(f"{self.name}: incompatible shapes {a.shape} and {b.shape}")
        _broadcast_shape(self.name, a.shape[:-2], b.shape[:-2])
        self.saved["a"], self.saved["b"] = a, b
        return np.matmul(a, b)

    def backward(self, grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        a, b = self.saved["a"], self.saved["b"]
        grad_a = np.matmul(grad, np.swapaxes(b, -1, -2))
        grad_b = np.matmul(np.swapaxes(a, -1, -2), grad)
        return unbroadcast(grad_a, a.shape), unbroadcast(grad_b, b.shape)


# ---------------------------------------------------------------------------
# Activations
# ---------------------------------------------------------------------------


class Gelu(Function):
    """gelu(x) = 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3)))"""

    name = "gelu"

    def forward(self, x: np.ndarray) -> np.ndarray:
        inner = GELU_COEFF * (x + 0.044715 * x**3)
        t = np.tanh(inner)
        self.saved["x"], self.saved["t"] = x, t
        return 0.5 * x * (1.0 + t)

    def backward(self, grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        x, t = self.saved["x"], self.saved["t"]
        d_inner = GELU_COEFF * (1.0 + 3 * 0.044715 * x**2)
        local = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t**2) * d_inner
        return (grad * local,)


class Relu(Function):
    name = "relu"

    def forward(self, x: np.ndarray) -> np.ndarray:
        self.saved["positive"] = x > 0
        return np.where(x > 0, x, 0).astype(x.dtype)

    def backward(self, grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        return (grad * self.saved["positive"],)


class Sigmoid(Function):
    name = "sigmoid"

    def forward(self, x: np.ndarray) -> np.ndarray:
        # Split by sign so exp never overflows.
        out = np.empty_like(x)
        pos = x >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        out[~pos] = ex / (1.0 + ex)
        self.saved["out"] = out
        return out

    def backward(self, grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        out = self.saved["out"]
        return (grad * out * (1.0 - out),)


class Tanh(Function):
    name = "tanh"

    def forward(self, x: np.ndarray) -> np.ndarray:
        out = np.tanh(x)
        self.saved["out"] = out
        return out

    def backward(self, grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        out = self.saved["out"]
        return (grad * (1.0 - out**2),)


class Softmax(Function):
    """
    Stable softmax over the last axis.

    With ``mask`` (broadcastable to the input), masked entries get probability
    exactly 0 and take no part in the row max: the additive -inf masking of
    attention, without ever materializing an infinity.
    """

    name = "softmax"

    def forward(self, x: np.ndarray, mask: Optional[np.ndarray] = None) -> np.ndarray:
        if mask is None:
            shifted = x - x.max(axis=-1, keepdims=True)
            e = np.exp(shifted)
        else:
            keep = np.broadcast_to(np.asarray(mask) != 0, x.shape)
            if not np.all(keep.any(axis=-1)):
                raise ValueError(f"{self.name}: a row has no unmasked entries")
            row_max = np.where(keep, x, -np.inf).max(axis=-1, keepdims=True)
            e = np.where(keep, np.exp(np.where(keep, x - row_max, 0.0)), 0.0).astype(x.dtype)
        out = e / e.sum(axis=-1, keepdims=True)
        self.saved["out"] = out
        return out

    def backward(self, grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        out = self.saved["out"]
        inner = (grad * out).sum(axis=-1, keepdims=True)
        return (out * (grad - inner),)


class LayerNorm(Function):
    """
    Layer normalization over the last axis.

    Uses the population (biased) variance and eps inside the square root:
    y = (x - mean) / sqrt(var + eps) * gain + bias.
    """

    name = "layer_norm"

    def forward(
        self, x: np.ndarray, gain: np.ndarray, bias: np.ndarray, eps: float = LAYER_NORM_EPS
    ) -> np.ndarray:
        if gain.shape != x.shape[-1:] or bias.shape != x.shape[-1:]:
            raise ValueError(
                f"{self.name}: incompatible shapes {x.shape} and {gain.shape}/{bias.shape}"
            )
        mean = x.mean(axis=-1, keepdims=True)
        centered = x - mean
        var = (centered**2).mean(axis=-1, keepdims=True)
        inv_std = 1.0 / np.sqrt(var + eps)
        xhat = centered * inv_std
        self.saved.update(xhat=xhat, inv_std=inv_std, gain=gain)
        return xhat * gain + bias

    def backward(self, grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        xhat, inv_std, gain = self.saved["xhat"], self.saved["inv_std"], self.saved["gain"]
        n = xhat.shape[-1]
        reduce_axes = tuple(range(grad.ndim - 1))
        grad_gain = (grad * xhat).sum(axis=reduce_axes)
        grad_bias = grad.sum(axis=reduce_axes)
        dxhat = grad * gain
        grad_x = (
            inv_std
            / n
            * (
                n * dxhat
                - dxhat.sum(axis=-1, keepdims=True)
                - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True)
            )
        )
        return grad_x, grad_gain, grad_bias


class Dropout(Function):
    name = "dropout"

    def forward(self, x: np.ndarray, rate: float, rng: np.random.Generator) -> np.ndarray:
        keep = (rng.random(x.shape) >= rate).astype(x.dtype) / (1.0 - rate)
        self.saved["keep"] = keep
        return x * keep

    def backward(self, grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        return (grad * self.saved["keep"],)


# ---------------------------------------------------------------------------
# Lookup, convolution, reductions
# ---------------------------------------------------------------------------


class Embedding(Function):
    name = "embedding"

    def forward(self, weight: np.ndarray, ids: np.ndarray) -> np.ndarray:
        ids = np.asarray(ids)
        if ids.size and (ids.min() < 0 or ids.max() >= weight.shape[0]):
            raise ValueError(
                f"{self.name}: ids outside [0, {weight.shape[0]}) for table {weight.shape}"
            )
        self.saved["ids"], self.saved["shape"] = ids, weight.shape
        return weight[ids]

    def backward(self, grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        table = np.zeros(self.saved["shape"], dtype=grad.dtype)
        np.add.at(table, self.saved["ids"], grad)
        return (table,)


class Conv1d(Function):
    """
    1-D convolution along axis 1 of ``x`` [B, T, C_in] with zero same-padding.

    ``weight`` is [K, C_in, C_out] with odd K, ``bias`` is [C_out]; output is
    [B, T, C_out] with out[t] = bias + sum_k x[t + k - K//2] @ weight[k].
    """

    name = "conv1d"

    def forward(self, x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
        if x.ndim != 3 or weight.ndim != 3 or weight.shape[1] != x.shape[2]:
            raise ValueError(f"{self.name}: incompatible shapes {x.shape} and {weight.shape}")
        if weight.shape[0] % 2 != 1 or bias.shape != weight.shape[2:]:
            raise ValueError(
                f"{self.name}: needs odd kernel and matching bias, got {weight.shape} "
                f"and {bias.shape}"
            )
        k, c_in, c_out = weight.shape
        pad = k // 2
        steps = x.shape[1]
        padded = np.pad(x, ((0, 0), (pad, pad), (0, 0)))
        cols = np.stack([padded[:, j : j + steps, :] for j in range(k)], axis=2)
        cols = cols.reshape(x.shape[0], steps, k * c_in)
        self.saved.update(cols=cols, weight=weight, x_shape=x.shape)
        return np.matmul(cols, weight.reshape(k * c_in, c_out)) + bias

    def backward(self, grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        cols, weight, x_shape = self.saved["cols"], self.saved["weight"], self.saved["x_shape"]
        k, c_in, c_out = weight.shape
        batch, steps, _ = x_shape
        pad = k // 2
        grad_w = np.matmul(
            cols.reshape(-1, k * c_in).T, grad.reshape(-1, c_out)
        ).reshape(weight.shape)
        grad_b = grad.sum(axis=(0, 1))
        grad_cols = np.matmul(grad, weight.reshape(k * c_in, c_out).T)
        grad_cols = grad_cols.reshape(batch, steps, k, c_in)
        grad_padded = np.zeros((batch, steps + 2 * pad, c_in), dtype=grad.dtype)
        for j in range(k):
            grad_padded[:, j : j + steps, :] += grad_cols[:, :, j, :]
        return grad_padded[:, pad : pad + steps, :], grad_w, grad_b


class MaskedMean(Function):
    name = "masked_mean"

    def forward(self, x: np.ndarray, mask: np.ndarray, axis: int) -> np.ndarray:
        axis = _normalize_axis(axis, x.ndim)
        m = _expand_mask(mask, x, axis, self.name)
        count = m.sum(axis=axis, keepdims=True)
        if np.any(count == 0):
            raise ValueError(f"{self.name}: mask selects no entries along axis {axis}")
        self.saved.update(m=m, count=count, axis=axis)
        return (x * m).sum(axis=axis) / np.squeeze(count, axis=axis)

    def backward(self, grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        m, count, axis = self.saved["m"], self.saved["count"], self.saved["axis"]
        return (np.expand_dims(grad, axis) * m / count,)


class MaskedMax(Function):
    """Max along ``axis`` restricted to mask-1 entries; ties go to the first index."""

    name = "masked_max"

    def forward(self, x: np.ndarray, mask: np.ndarray, axis: int) -> np.ndarray:
        axis = _normalize_axis(axis, x.ndim)
        m = _expand_mask(mask, x, axis, self.name)
        keep = np.broadcast_to(m != 0, x.shape)
        if not np.all(keep.any(axis=axis)):
            raise ValueError(f"{self.name}: mask selects no entries along axis {axis}")
        candidates = np.where(keep, x, -np.inf)
        index = np.argmax(candidates, axis=axis)
        self.saved.update(index=np.expand_dims(index, axis), axis=axis, shape=x.shape)
        return np.take_along_axis(x, self.saved["index"], axis=axis).squeeze(axis)

    def backward(self, grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        index, axis = self.saved["index"], self.saved["axis"]
        out = np.zeros(self.saved["shape"], dtype=grad.dtype)
        np.put_along_axis(out, index, np.expand_dims(grad, axis), axis=axis)
        return (out,)


class Sum(Function):
    name = "sum"

    def forward(
        self, x: np.ndarray, axis: Optional[int] = None, keepdims: bool = False
    ) -> np.ndarray:
        self.saved.update(shape=x.shape, axis=axis, keepdims=keepdims)
        return np.asarray(x.sum(axis=axis, keepdims=keepdims))

    def backward(self, grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        shape, axis, keepdims = self.saved["shape"], self.saved["axis"], self.saved["keepdims"]
        if axis is not None and not keepdims:
            grad = np.expand_dims(grad, axis)
        return (np.broadcast_to(grad, shape).copy(),)


# ---------------------------------------------------------------------------
# Shape plumbing
# ---------------------------------------------------------------------------


class Concat(Function):
    name = "concat"

    def forward(self, *arrays: np.ndarray, axis: int = 0) -> np.ndarray:
        ref = arrays[0]
        axis = _normalize_axis(axis, ref.ndim)
        for other in arrays[1:]:
            if other.ndim != ref.ndim or any(
                other.shape[d] != ref.shape[d] for d in range(ref.ndim) if d != axis
            ):
                raise ValueError(f"{self.name}: incompatible shapes {ref.shape} and {other.shape}")
        self.saved["splits"] = np.cumsum([a.shape[axis] for a in arrays])[:-1]
        self.saved["axis"] = axis
        return np.concatenate(arrays, axis=axis)

    def backward(self, grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        return tuple(np.split(grad, self.saved["splits"], axis=self.saved["axis"]))


class GetItem(Function):
    name = "slice"

    def forward(self, x: np.ndarray, index: Any) -> np.ndarray:
        self.saved.update(shape=x.shape, index=index)
        return np.array(x[index])

    def backward(self, grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        out = np.zeros(self.saved["shape"], dtype=grad.dtype)
        np.add.at(out, self.saved["index"], grad)
        return (out,)


class Reshape(Function):
    name = "reshape"

    def forward(self, x: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
        self.saved["shape"] = x.shape
        try:
            return x.reshape(shape)
        except ValueError:
            raise ValueError(f"{self.name}: cannot reshape {x.shape} into {shape}") from None

    def backward(self, grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        return (grad.reshape(self.saved["shape"]),)


class Transpose(Function):
    name = "transpose"

    def forward(self, x: np.ndarray, axes: Optional[Tuple[int, ...]] = None) -> np.ndarray:
        if axes is None:
            axes = tuple(reversed(range(x.ndim)))
        if sorted(_normalize_axis(a, x.ndim) for a in axes) != list(range(x.ndim)):
            raise ValueError(f"{self.name}: axes {axes} invalid for shape {x.shape}")
        self.saved["axes"] = tuple(_normalize_axis(a, x.ndim) for a in axes)
        return np.transpose(x, self.saved["axes"])

    def backward(self, grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        return (np.transpose(grad, np.argsort(self.saved["axes"])),)


# ---------------------------------------------------------------------------
# Objective
# ---------------------------------------------------------------------------


class CrossEntropy(Function):
    """Mean of -log softmax(logits)[target] over the rows of ``logits`` [B, C]."""

    name = "cross_entropy"

    def forward(self, logits: np.ndarray, targets: np.ndarray) -> np.ndarray:
        targets = np.asarray(targets, dtype=np.int64)
        n_class = logits.shape[-1]
        if n_class < 2:
            raise ValueError(f"{self.name}: need at least 2 classes, got {n_class}")
        if targets.shape != logits.shape[:-1]:
            raise ValueError(
                f"{self.name}: incompatible shapes {logits.shape} and {targets.shape}"
            )
        if targets.size and (targets.min() < 0 or targets.max() >= n_class):
            raise ValueError(f"{self.name}: target out of range [0, {n_class})")
        shifted = logits - logits.max(axis=-1, keepdims=True)
        log_norm = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
        log_probs = shifted - log_norm
        picked = np.take_along_axis(log_probs, targets[..., None], axis=-1)[..., 0]
        self.saved.update(log_probs=log_probs, targets=targets)
        return np.asarray(-picked.mean(), dtype=logits.dtype)

    def backward(self, grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        log_probs, targets = self.saved["log_probs"], self.saved["targets"]
        probs = np.exp(log_probs)
        np.put_along_axis(
            probs, targets[..., None], np.take_along_axis(probs, targets[..., None], -1) - 1.0, -1
        )
        return (grad * probs / max(targets.size, 1),)


# ---------------------------------------------------------------------------
# Functional wrappers
# ---------------------------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    return Add.apply(a, b)


def sub(a: Tensor, b: Tensor) -> Tensor:
    return Sub.apply(a, b)


def mul(a: Tensor, b: Tensor) -> Tensor:
    return Mul.apply(a, b)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim == 1:
        return reshape(MatMul.apply(reshape(a, (1, a.shape[0])), b), b.shape[:-2] + b.shape[-1:])
    return MatMul.apply(a, b)


def bias_add(x: Tensor, bias: Tensor) -> Tensor:
    if bias.shape != x.shape[-1:]:
        raise ValueError(f"bias_add: incompatible shapes {x.shape} and {bias.shape}")
    return Add.apply(x, bias)


def gelu(x: Tensor) -> Tensor:
    return Gelu.apply(x)


def relu(x: Tensor) -> Tensor:
    return Relu.apply(x)


def sigmoid(x: Tensor) -> Tensor:
    return Sigmoid.apply(x)


def tanh(x: Tensor) -> Tensor:
    return Tanh.apply(x)


def softmax(x: Tensor, mask: Optional[np.ndarray] = None) -> Tensor:
    return Softmax.apply(x, mask=mask)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = LAYER_NORM_EPS) -> Tensor:
    return LayerNorm.apply(x, gain, bias, eps=eps)


def dropout(x: Tensor, rate: float, rng: Optional[np.random.Generator]) -> Tensor:
    if rate <= 0.0 or rng is None:
        return x
    if rate >= 1.0:
        raise ValueError(f"dropout: rate must be < 1, got {rate}")
    return Dropout.apply(x, rate=rate, rng=rng)


def embedding(weight: Tensor, ids: np.ndarray) -> Tensor:
    return Embedding.apply(weight, ids=ids)


def conv1d(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    return Conv1d.apply(x, weight, bias)


def masked_mean(x: Tensor, mask: np.ndarray, axis: int) -> Tensor:
    return MaskedMean.apply(x, mask=mask, axis=axis)


def masked_max(x: Tensor, mask: np.ndarray, axis: int) -> Tensor:
    return MaskedMax.apply(x, mask=mask, axis=axis)


def reduce_sum(x: Tensor, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    return Sum.apply(x, axis=axis, keepdims=keepdims)


def mean(x: Tensor, axis: Optional[int] = None) -> Tensor:
    count = x.size if axis is None else x.shape[axis]
    return mul(Sum.apply(x, axis=axis), as_tensor(1.0 / count, x.dtype))


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not tensors:
        raise ValueError("concat: needs at least one tensor")
    return Concat.apply(*tensors, axis=axis)


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    expanded: List[Tensor] = []
    for t in tensors:
        ax = axis if axis >= 0 else t.ndim + 1 + axis
        expanded.append(reshape(t, t.shape[:ax] + (1,) + t.shape[ax:]))
    return concat(expanded, axis=axis)


def getitem(x: Tensor, index: Any) -> Tensor:
    return GetItem.apply(x, index=index)


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    return Reshape.apply(x, shape=tuple(shape))


def transpose(x: Tensor, axes: Optional[Sequence[int]] = None) -> Tensor:
    return Transpose.apply(x, axes=None if axes is None else tuple(axes))


def cross_entropy(logits: Tensor, target: Union[int, Sequence[int], np.ndarray]) -> Tensor:
    """
    Mean cross-entropy. A 1-D ``logits`` takes a single class index; a 2-D
    ``logits`` [B, C] takes B indices.
    """
    targets = np.asarray(target, dtype=np.int64)
    if logits.ndim == 1:
        if targets.ndim != 0:
            raise ValueError(
                f"cross_entropy: incompatible shapes {logits.shape} and {targets.shape}"
            )
        return CrossEntropy.apply(reshape(logits, (1, logits.shape[0])), targets=targets[None])
    return CrossEntropy.apply(logits, targets=targets)
