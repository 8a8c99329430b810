import logging
from typing import List, Optional

import numpy as np

from chunkstack.autodiff import functional as F
from chunkstack.autodiff.tensor import Tensor
from chunkstack.model.config import ModelConfig
from chunkstack.nn.layers import Embedding, TransformerEncoder
from chunkstack.nn.module import Module, Parameter

logger = logging.getLogger(__name__)


class WordEncoder(Module):
    """
    Token-level transformer run independently over every chunk row.

    Mathematical Background:
    ----------------------
    x_0 = E_tok[ids] + E_pos[0..L-1]
    x_i = TransformerLayer_i(x_{i-1}, mask)      i = 1..n_layers
    Mask-0 keys get attention probability exactly 0, so outputs at mask-1
    positions do not depend on what sits at mask-0 positions.
    """

    def __init__(self, config: ModelConfig, rng: np.random.Generator):
        wc = config.word_encoder
        self.max_positions = wc.max_positions
        self.token_embedding = Embedding(wc.vocab_size, wc.hidden, rng, config.init_std, config.dtype)
        self.position_embedding = Embedding(
            wc.max_positions, wc.hidden, rng, config.init_std, config.dtype
        )
        self.encoder = TransformerEncoder(
            wc.n_layers,
            wc.hidden,
            wc.ff_inner,
            wc.n_heads,
            wc.effective_key_dim,
            wc.head_dim,
            rng,
            config.init_std,
            config.dtype,
            config.dropout,
        )

    def encode_chunk(
        self,
        ids: np.ndarray,
        mask: np.ndarray,
        dropout_rng: Optional[np.random.Generator] = None,
    ) -> List[Tensor]:
        """
        Encode chunk rows.

        Args:
            ids: [N, L] token ids, position 0 being [CLS]
            mask: [N, L] 0/1 attention mask
            dropout_rng: Generator for dropout masks (training only)

        Returns:
            One [N, L, hidden] tensor per layer, first layer first

        Raises:
            ValueError: If L exceeds max_positions
        """
        ids = np.asarray(ids)
        if ids.ndim == 1:
            ids, mask = ids[None, :], np.asarray(mask)[None, :]
        length = ids.shape[1]
        if length > self.max_positions:
            raise ValueError(
                f"Chunk row length {length} exceeds max_positions {self.max_positions}"
            )
        x = F.add(self.token_embedding(ids), self.position_embedding(np.arange(length)))
        return self.encoder(x, np.asarray(mask), dropout_rng)


class LayerWeights(Module):
    """Trainable scalars w_1..w_n, one per encoder layer; starts as a plain layer average."""

    def __init__(self, n_layers: int, dtype):
        self.w = Parameter(np.full((n_layers,), 1.0 / n_layers), dtype=dtype)


def cls_pool(final_layer: Tensor) -> Tensor:
    """Row 0 ([CLS]) of the last layer: [N, L, H] -> [N, H]."""
    return F.getitem(final_layer, (slice(None), 0))


def layer_means(layers: List[Tensor], mask: np.ndarray) -> Tensor:
    """Masked token mean of every layer, CLS included: -> [n_layers, N, H]."""
    if len(layers) < 1:
        raise ValueError("layer_means needs at least one layer")
    mask = np.asarray(mask)
    if mask.ndim == 1:
        mask = mask[None, :]
    return F.stack([F.masked_mean(h, mask, axis=1) for h in layers], axis=0)


def combine_layers(means: Tensor, weights: LayerWeights) -> Tensor:
    """sum_i w_i * h_i over the leading layer axis: [n_layers, N, H] -> [N, H]."""
    n_layers = means.shape[0]
    if weights.w.shape != (n_layers,):
        raise ValueError(
            f"weighted_sum_pool: {weights.w.shape[0]} layer weights for {n_layers} layers"
        )
    w = F.reshape(weights.w, (n_layers, 1, 1))
    return F.reduce_sum(F.mul(means, w), axis=0)


def weighted_sum_pool(layers: List[Tensor], mask: np.ndarray, weights: LayerWeights) -> Tensor:
    """
    R = sum_i w_i * h_i, with h_i the mean of layer i over mask-1 tokens.

    Raises:
        ValueError: If a row's mask is all zero
    """
    return combine_layers(layer_means(layers, mask), weights)
