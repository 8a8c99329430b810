"""
Transformer building blocks shared by the word encoder and the chunk aggregator.

Weights are initialised normal(0, init_std), biases zero and layer-norm gains one.
Every layer consumes its draws from the generator it is handed, in construction
order, so a fixed seed gives a fixed parameter set.
"""

import math
from typing import List, Optional

import numpy as np

from chunkstack.autodiff import functional as F
from chunkstack.autodiff.tensor import Tensor
from chunkstack.nn.module import Module, normal_init, ones_init, zeros_init


class Linear(Module):
    """y = x @ W + b with W stored as [in_dim, out_dim]."""

    def __init__(
        self,
        in_dim: int,
        out_dim: int,
        rng: np.random.Generator,
        init_std: float,
        dtype,
        bias: bool = True,
    ):
        self.weight = normal_init(rng, (in_dim, out_dim), init_std, dtype)
        self.bias = zeros_init((out_dim,), dtype) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        y = F.matmul(x, self.weight)
        return y if self.bias is None else F.bias_add(y, self.bias)


class LayerNorm(Module):
    def __init__(self, dim: int, dtype):
        self.gain = ones_init((dim,), dtype)
        self.bias = zeros_init((dim,), dtype)

    def __call__(self, x: Tensor) -> Tensor:
        return F.layer_norm(x, self.gain, self.bias)


class Embedding(Module):
    def __init__(
        self, n_rows: int, dim: int, rng: np.random.Generator, init_std: float, dtype
    ):
        self.weight = normal_init(rng, (n_rows, dim), init_std, dtype)

    def __call__(self, ids: np.ndarray) -> Tensor:
        return F.embedding(self.weight, ids)


class MultiHeadSelfAttention(Module):
    """
    Scaled dot-product self-attention with a key mask.

    Mathematical Background:
    ----------------------
    For each head h:
        A_h = softmax(Q_h K_h^T / sqrt(key_dim))   with mask-0 keys given probability 0
        O_h = A_h V_h
    The heads are concatenated ([.., n_heads * head_dim]) and projected back to hidden.
    Query and key projections use key_dim per head; values use head_dim.
    """

    def __init__(
        self,
        hidden: int,
        n_heads: int,
        key_dim: int,
        head_dim: int,
        rng: np.random.Generator,
        init_std: float,
        dtype,
    ):
        self.n_heads = n_heads
        self.key_dim = key_dim
        self.head_dim = head_dim
        self.query = Linear(hidden, n_heads * key_dim, rng, init_std, dtype)
        # No key bias: it shifts every score in a row equally and cancels in the softmax.
        self.key = Linear(hidden, n_heads * key_dim, rng, init_std, dtype, bias=False)
        self.value = Linear(hidden, n_heads * head_dim, rng, init_std, dtype)
        self.output = Linear(n_heads * head_dim, hidden, rng, init_std, dtype)

    def _split_heads(self, x: Tensor, size: int) -> Tensor:
        batch, length, _ = x.shape
        return F.transpose(F.reshape(x, (batch, length, self.n_heads, size)), (0, 2, 1, 3))

    def __call__(self, x: Tensor, key_mask: np.ndarray) -> Tensor:
        """
        Args:
            x: [B, L, hidden]
            key_mask: [B, L] 0/1; every row needs at least one 1

        Returns:
            [B, L, hidden]
        """
        batch, length, _ = x.shape
        q = self._split_heads(self.query(x), self.key_dim)
        k = self._split_heads(self.key(x), self.key_dim)
        v = self._split_heads(self.value(x), self.head_dim)
        scale = F.as_tensor(1.0 / math.sqrt(self.key_dim), x.dtype)
        scores = F.mul(F.matmul(q, F.transpose(k, (0, 1, 3, 2))), scale)
        probs = F.softmax(scores, mask=np.asarray(key_mask)[:, None, None, :])
        context = F.transpose(F.matmul(probs, v), (0, 2, 1, 3))
        context = F.reshape(context, (batch, length, self.n_heads * self.head_dim))
        return self.output(context)


class TransformerLayer(Module):
    """Post-LN block: attention, residual, norm, gelu feed-forward, residual, norm."""

    def __init__(
        self,
        hidden: int,
        ff_inner: int,
        n_heads: int,
        key_dim: int,
        head_dim: int,
        rng: np.random.Generator,
        init_std: float,
        dtype,
        dropout: float = 0.0,
    ):
        self.dropout = dropout
        self.attention = MultiHeadSelfAttention(
            hidden, n_heads, key_dim, head_dim, rng, init_std, dtype
        )
        self.attention_norm = LayerNorm(hidden, dtype)
        self.ff_in = Linear(hidden, ff_inner, rng, init_std, dtype)
        self.ff_out = Linear(ff_inner, hidden, rng, init_std, dtype)
        self.ff_norm = LayerNorm(hidden, dtype)

    def __call__(
        self,
        x: Tensor,
        key_mask: np.ndarray,
        dropout_rng: Optional[np.random.Generator] = None,
    ) -> Tensor:
        rng = dropout_rng if self.training else None
        attended = F.dropout(self.attention(x, key_mask), self.dropout, rng)
        x = self.attention_norm(F.add(x, attended))
        fed = F.dropout(self.ff_out(F.gelu(self.ff_in(x))), self.dropout, rng)
        return self.ff_norm(F.add(x, fed))


class TransformerEncoder(Module):
    def __init__(
        self,
        n_layers: int,
        hidden: int,
        ff_inner: int,
        n_heads: int,
        key_dim: int,
        head_dim: int,
        rng: np.random.Generator,
        init_std: float,
        dtype,
        dropout: float = 0.0,
    ):
        if n_layers < 1:
            raise ValueError(f"Transformer needs at least one layer, got {n_layers}")
        self.layers = [
            TransformerLayer(
                hidden, ff_inner, n_heads, key_dim, head_dim, rng, init_std, dtype, dropout
            )
            for _ in range(n_layers)
        ]

    def __call__(
        self,
        x: Tensor,
        key_mask: np.ndarray,
        dropout_rng: Optional[np.random.Generator] = None,
    ) -> List[Tensor]:
        """Run every layer and return each layer's output, first layer first."""
        outputs: List[Tensor] = []
        for layer in self.layers:
            x = layer(x, key_mask, dropout_rng)
            outputs.append(x)
        return outputs
