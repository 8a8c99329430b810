"""
Chunk-level encoders: map chunk vectors [B, T, H] plus a chunk mask [B, T] to
one document vector [B, H].
"""

import logging
from abc import ABC, abstractmethod
from typing import List, Optional

import numpy as np

from chunkstack.autodiff import functional as F
from chunkstack.autodiff.tensor import Tensor
from chunkstack.model.config import AggregatorKind, ModelConfig
from chunkstack.nn.layers import Embedding, Linear, TransformerEncoder
from chunkstack.nn.module import Module, normal_init, zeros_init

logger = logging.getLogger(__name__)


class ChunkAggregator(Module, ABC):
    """Base class for chunk-level aggregation strategies."""

    kind: AggregatorKind

    def validate_input(self, chunk_vecs: Tensor, chunk_mask: np.ndarray) -> np.ndarray:
        """
        Check shapes and that every document keeps at least one real chunk.

        Raises:
            ValueError: If shapes disagree, the mask is not 0/1, or a row is fully masked
        """
        mask = np.asarray(chunk_mask)
        if chunk_vecs.ndim != 3 or mask.shape != chunk_vecs.shape[:2]:
            raise ValueError(
                f"{self.kind.value} aggregator: incompatible shapes {chunk_vecs.shape} "
                f"and {mask.shape}"
            )
        if not np.all((mask == 0) | (mask == 1)):
            raise ValueError(f"{self.kind.value} aggregator: chunk mask values must be 0 or 1")
        if not np.all(mask.any(axis=1)):
            raise ValueError(f"{self.kind.value} aggregator: all chunks masked in some document")
        return mask

    @abstractmethod
    def aggregate(
        self,
        chunk_vecs: Tensor,
        chunk_mask: np.ndarray,
        dropout_rng: Optional[np.random.Generator] = None,
    ) -> Tensor:
        pass

    def __call__(
        self,
        chunk_vecs: Tensor,
        chunk_mask: np.ndarray,
        dropout_rng: Optional[np.random.Generator] = None,
    ) -> Tensor:
        mask = self.validate_input(chunk_vecs, chunk_mask)
        return self.aggregate(chunk_vecs, mask, dropout_rng)


class TransformerAggregator(ChunkAggregator):
    """
    Small transformer over [doc token, chunk_1, ..., chunk_T]; returns the doc token output.

    The document token is a learned vector playing the role of an empty first
    chunk. With positions enabled, row p of a learned table of size
    max_chunks + 1 is added at sequence position p (0 = doc token). Without
    positions, the output is invariant to permutations of the real chunks.
    """

    def __init__(self, config: ModelConfig, rng: np.random.Generator, use_positions: bool):
        ac = config.aggregator
        self.kind = AggregatorKind.TRANSFORMER_POS if use_positions else AggregatorKind.TRANSFORMER
        self.max_chunks = config.max_chunks
        self.doc_token = normal_init(rng, (ac.hidden,), config.init_std, config.dtype)
        self.position_embedding = (
            Embedding(config.max_chunks + 1, ac.hidden, rng, config.init_std, config.dtype)
            if use_positions
            else None
        )
        self.encoder = TransformerEncoder(
            ac.n_layers,
            ac.hidden,
            ac.ff_inner,
            ac.n_heads,
            ac.effective_key_dim,
            ac.head_dim,
            rng,
            config.init_std,
            config.dtype,
            config.dropout,
        )

    def aggregate(
        self,
        chunk_vecs: Tensor,
        chunk_mask: np.ndarray,
        dropout_rng: Optional[np.random.Generator] = None,
    ) -> Tensor:
        batch, steps, hidden = chunk_vecs.shape
        doc = F.add(
            F.as_tensor(np.zeros((batch, 1, hidden)), chunk_vecs.dtype),
            F.reshape(self.doc_token, (1, 1, hidden)),
        )
        seq = F.concat([doc, chunk_vecs], axis=1)
        if self.position_embedding is not None:
            if steps > self.max_chunks:
                raise ValueError(
                    f"{self.kind.value} aggregator: {steps} chunks exceed the position "
                    f"table for max_chunks={self.max_chunks}"
                )
            seq = F.add(seq, self.position_embedding(np.arange(steps + 1)))
        mask = np.concatenate([np.ones((batch, 1), dtype=chunk_mask.dtype), chunk_mask], axis=1)
        final = self.encoder(seq, mask, dropout_rng)[-1]
        return F.getitem(final, (slice(None), 0))


class LstmAggregator(ChunkAggregator):
    """
    Unidirectional single-layer LSTM; returns the hidden state at the last real chunk.

    Mathematical Background:
    ----------------------
    z_t = x_t W_x + h_{t-1} W_h + b        gates split as [i | f | g | o]
    i, f, o = sigmoid(.), g = tanh(.)
    c_t = f * c_{t-1} + i * g
    h_t = o * tanh(c_t)                    h_0 = c_0 = 0
    """

    kind = AggregatorKind.LSTM

    def __init__(self, config: ModelConfig, rng: np.random.Generator):
        hidden = config.aggregator.hidden
        self.hidden = hidden
        self.input_weight = normal_init(rng, (hidden, 4 * hidden), config.init_std, config.dtype)
        self.hidden_weight = normal_init(rng, (hidden, 4 * hidden), config.init_std, config.dtype)
        self.bias = zeros_init((4 * hidden,), config.dtype)

    def aggregate(
        self,
        chunk_vecs: Tensor,
        chunk_mask: np.ndarray,
        dropout_rng: Optional[np.random.Generator] = None,
    ) -> Tensor:
        batch, steps, _ = chunk_vecs.shape
        n = self.hidden
        h = F.as_tensor(np.zeros((batch, n)), chunk_vecs.dtype)
        c = F.as_tensor(np.zeros((batch, n)), chunk_vecs.dtype)
        states: List[Tensor] = []
        for t in range(steps):
            x_t = F.getitem(chunk_vecs, (slice(None), t))
            z = F.bias_add(
                F.add(F.matmul(x_t, self.input_weight), F.matmul(h, self.hidden_weight)),
                self.bias,
            )
            i = F.sigmoid(F.getitem(z, (slice(None), slice(0, n))))
            f = F.sigmoid(F.getitem(z, (slice(None), slice(n, 2 * n))))
            g = F.tanh(F.getitem(z, (slice(None), slice(2 * n, 3 * n))))
            o = F.sigmoid(F.getitem(z, (slice(None), slice(3 * n, 4 * n))))
            c = F.add(F.mul(f, c), F.mul(i, g))
            h = F.mul(o, F.tanh(c))
            states.append(h)
        # One-hot selector on the last mask-1 index of every row.
        last = steps - 1 - np.argmax(chunk_mask[:, ::-1], axis=1)
        selector = np.zeros_like(chunk_mask)
        selector[np.arange(batch), last] = 1
        return F.masked_mean(F.stack(states, axis=1), selector, axis=1)


class CnnAggregator(ChunkAggregator):
    """Zero masked chunks, conv1d (same padding), relu, max over real chunks."""

    kind = AggregatorKind.CNN

    def __init__(self, config: ModelConfig, rng: np.random.Generator):
        ac = config.aggregator
        self.weight = normal_init(
            rng, (ac.kernel_size, ac.hidden, ac.hidden), config.init_std, config.dtype
        )
        self.bias = zeros_init((ac.hidden,), config.dtype)

    def aggregate(
        self,
        chunk_vecs: Tensor,
        chunk_mask: np.ndarray,
        dropout_rng: Optional[np.random.Generator] = None,
    ) -> Tensor:
        keep = F.as_tensor(chunk_mask[:, :, None], chunk_vecs.dtype)
        features = F.relu(F.conv1d(F.mul(chunk_vecs, keep), self.weight, self.bias))
        return F.masked_max(features, chunk_mask, axis=1)


class MeanAggregator(ChunkAggregator):
    kind = AggregatorKind.MEAN

    def aggregate(
        self,
        chunk_vecs: Tensor,
        chunk_mask: np.ndarray,
        dropout_rng: Optional[np.random.Generator] = None,
    ) -> Tensor:
        return F.masked_mean(chunk_vecs, chunk_mask, axis=1)


class ClassifierHead(Module):
    """Affine map from the document vector to class logits; no activation."""

    def __init__(self, config: ModelConfig, rng: np.random.Generator):
        self.projection = Linear(config.hidden, config.n_class, rng, config.init_std, config.dtype)

    def __call__(self, doc_vec: Tensor) -> Tensor:
        return self.projection(doc_vec)


def build_aggregator(config: ModelConfig, rng: np.random.Generator) -> ChunkAggregator:
    kind = config.aggregator.kind
    if kind == AggregatorKind.TRANSFORMER:
        return TransformerAggregator(config, rng, use_positions=False)
    if kind == AggregatorKind.TRANSFORMER_POS:
        return TransformerAggregator(config, rng, use_positions=True)
    if kind == AggregatorKind.LSTM:
        return LstmAggregator(config, rng)
    if kind == AggregatorKind.CNN:
        return CnnAggregator(config, rng)
    if kind == AggregatorKind.MEAN:
        return MeanAggregator()
    raise ValueError(f"Unknown aggregator kind: {kind}")
