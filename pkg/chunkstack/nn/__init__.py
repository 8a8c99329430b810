from chunkstack.nn.layers import (
    Embedding,
    LayerNorm,
    Linear,
    MultiHeadSelfAttention,
    TransformerEncoder,
    TransformerLayer,
)
from chunkstack.nn.module import Module, Parameter

__all__ = [
    "Embedding",
    "LayerNorm",
    "Linear",
    "Module",
    "MultiHeadSelfAttention",
    "Parameter",
    "TransformerEncoder",
    "TransformerLayer",
]
