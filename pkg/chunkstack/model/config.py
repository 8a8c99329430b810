from enum import Enum
from typing import Any, Dict, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from chunkstack.text.chunker import TruncateSide


class WordPool(str, Enum):
    CLS = "cls"
    WSUM = "wsum"


class AggregatorKind(str, Enum):
    TRANSFORMER = "transformer"
    TRANSFORMER_POS = "transformer-pos"
    LSTM = "lstm"
    CNN = "cnn"
    MEAN = "mean"


class TransformerGeometry(BaseModel):
    """Shape of one transformer stack; key_dim defaults to head_dim."""

    model_config = ConfigDict(frozen=True)

    n_layers: int = Field(2, ge=1)
    hidden: int = Field(64, ge=1)
    ff_inner: int = Field(128, ge=1)
    n_heads: int = Field(4, ge=1)
    head_dim: int = Field(16, ge=1)
    key_dim: Optional[int] = Field(None, ge=1)

    @model_validator(mode="after")
    def check_heads(self) -> "TransformerGeometry":
        if self.n_heads * self.head_dim != self.hidden:
            raise ValueError(
                f"n_heads * head_dim must equal hidden: {self.n_heads} * {self.head_dim} "
                f"!= {self.hidden}"
            )
        return self

    @property
    def effective_key_dim(self) -> int:
        return self.head_dim if self.key_dim is None else self.key_dim


class WordEncoderConfig(TransformerGeometry):
    vocab_size: int = Field(..., ge=4)
    max_positions: int = Field(512, ge=2)


class AggregatorConfig(TransformerGeometry):
    """Chunk-level encoder. LSTM and CNN use ``hidden`` as their state/channel width."""

    kind: AggregatorKind = AggregatorKind.TRANSFORMER
    kernel_size: int = Field(3, ge=1)

    @model_validator(mode="after")
    def check_kernel(self) -> "AggregatorConfig":
        if self.kernel_size % 2 != 1:
            raise ValueError(f"kernel_size must be odd, got {self.kernel_size}")
        return self


class ModelConfig(BaseModel):
    """
    Everything needed to rebuild a HierarchicalModel from its parameters.

    The word encoder and the aggregator share ``hidden``; the chunk geometry
    (content_len, max_chunks, ...) lives here so a checkpoint fully determines
    how raw text is turned into model input.
    """

    model_config = ConfigDict(frozen=True)

    word_encoder: WordEncoderConfig
    aggregator: AggregatorConfig
    word_pool: WordPool = WordPool.CLS
    n_class: int = Field(2, ge=2)
    content_len: int = Field(202, ge=1)
    max_chunks: int = Field(32, ge=1)
    cls_in_content_len: bool = False
    truncate_side: TruncateSide = TruncateSide.HEAD
    init_std: float = Field(0.02, gt=0)
    dropout: float = Field(0.0, ge=0, lt=1)
    dtype: str = Field("f32", pattern="^(f32|f64)$")

    @model_validator(mode="after")
    def check_geometry(self) -> "ModelConfig":
        if self.word_encoder.hidden != self.aggregator.hidden:
            raise ValueError(
                f"Word encoder hidden {self.word_encoder.hidden} must equal aggregator "
                f"hidden {self.aggregator.hidden}"
            )
        if self.word_encoder.max_positions < self.row_len:
            raise ValueError(
                f"max_positions {self.word_encoder.max_positions} is shorter than the chunk "
                f"row length {self.row_len}"
            )
        if self.cls_in_content_len and self.content_len < 2:
            raise ValueError("content_len must be >= 2 when it includes [CLS]")
        return self

    @property
    def row_len(self) -> int:
        return self.content_len if self.cls_in_content_len else self.content_len + 1

    @property
    def hidden(self) -> int:
        return self.word_encoder.hidden


class ModelProfile(str, Enum):
    TINY = "tiny"
    DESK = "desk"
    FULL = "full"


# (word encoder, chunk transformer) geometry per profile.
GEOMETRIES: Dict[ModelProfile, Tuple[Dict[str, int], Dict[str, int]]] = {
    ModelProfile.TINY: (
        dict(n_layers=2, hidden=8, ff_inner=16, n_heads=2, head_dim=4),
        dict(n_layers=2, hidden=8, ff_inner=16, n_heads=2, head_dim=4),
    ),
    ModelProfile.DESK: (
        dict(n_layers=2, hidden=64, ff_inner=128, n_heads=4, head_dim=16),
        dict(n_layers=2, hidden=64, ff_inner=128, n_heads=4, head_dim=16),
    ),
    ModelProfile.FULL: (
        dict(n_layers=6, hidden=768, ff_inner=3072, n_heads=12, head_dim=64),
        dict(n_layers=2, hidden=768, ff_inner=2048, n_heads=8, head_dim=96),
    ),
}

TINY_DEFAULTS: Dict[str, Any] = dict(content_len=6, max_chunks=3, init_std=0.3, dtype="f64")


def build_model_config(
    profile: ModelProfile,
    vocab_size: int,
    n_class: int = 2,
    aggregator: AggregatorKind = AggregatorKind.TRANSFORMER,
    word_pool: WordPool = WordPool.CLS,
    key_dim: Optional[int] = None,
    **settings: Any,
) -> ModelConfig:
    """
    Assemble a ModelConfig from a named geometry.

    ``settings`` are ModelConfig fields (content_len, max_chunks, dtype, ...).
    The tiny profile defaults to 3 chunks of 6 content tokens in f64.
    max_positions is sized to the chunk row: exactly for the tiny profile,
    at least 512 otherwise.
    """
    profile = ModelProfile(profile)
    if profile == ModelProfile.TINY:
        settings = {**TINY_DEFAULTS, **settings}
    encoder_geometry, aggregator_geometry = GEOMETRIES[profile]
    content_len = settings.get("content_len", ModelConfig.model_fields["content_len"].default)
    cls_inside = settings.get("cls_in_content_len", False)
    row_len = content_len if cls_inside else content_len + 1
    max_positions = row_len if profile == ModelProfile.TINY else max(512, row_len)
    return ModelConfig(
        word_encoder=WordEncoderConfig(
            vocab_size=vocab_size, max_positions=max_positions, key_dim=key_dim, **encoder_geometry
        ),
        aggregator=AggregatorConfig(kind=aggregator, key_dim=key_dim, **aggregator_geometry),
        word_pool=word_pool,
        n_class=n_class,
        **settings,
    )


def desk_config(vocab_size: int, n_class: int = 2, **kwargs: Any) -> ModelConfig:
    """Desk-scale defaults: 2 layers, hidden 64, ff 128, 4 heads of 16, chunk transformer alike."""
    return build_model_config(ModelProfile.DESK, vocab_size, n_class, **kwargs)


def full_config(vocab_size: int, n_class: int = 2, **kwargs: Any) -> ModelConfig:
    """DistilBERT-sized word encoder (6/768/3072/12) under a 2-layer, 8-head chunk transformer."""
    return build_model_config(ModelProfile.FULL, vocab_size, n_class, **kwargs)


def tiny_config(vocab_size: int, n_class: int = 2, **kwargs: Any) -> ModelConfig:
    """Gradient-check geometry: hidden 8, 2 + 2 layers, 3 chunks of 6 content tokens, f64."""
    return build_model_config(ModelProfile.TINY, vocab_size, n_class, **kwargs)
