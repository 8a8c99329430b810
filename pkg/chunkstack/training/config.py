from enum import Enum
from typing import Any, Dict, Optional

from pydantic import BaseModel, ConfigDict, Field

from chunkstack.model.config import (
    AggregatorKind,
    ModelConfig,
    ModelProfile,
    WordPool,
    build_model_config,
)
from chunkstack.text.chunker import TruncateSide


class TrainMode(str, Enum):
    FINETUNE = "finetune"
    FEATURE_EXTRACT = "frozen"


class Schedule(str, Enum):
    CONSTANT = "constant"
    LINEAR = "linear"


PRESETS: Dict[str, Dict[str, Any]] = {
    # End-to-end fine-tuning regime.
    "finetune": dict(
        lr=3e-5,
        batch_size=16,
        grad_accum_steps=2,
        epochs=40,
        warmup_steps=150,
        mode=TrainMode.FINETUNE,
        word_pool=WordPool.CLS,
    ),
    # Frozen word encoder used as a feature extractor.
    "frozen": dict(
        lr=3e-5,
        batch_size=32,
        grad_accum_steps=1,
        epochs=20,
        warmup_steps=40,
        mode=TrainMode.FEATURE_EXTRACT,
        word_pool=WordPool.WSUM,
    ),
}


class TrainConfig(BaseModel):
    """
    Optimisation settings plus the model choices a training run makes.

    Field names match the CLI flags one-to-one (``grad_accum_steps`` is
    ``--grad-accum-steps``).
    """

    model_config = ConfigDict(frozen=True, use_enum_values=False)

    lr: float = Field(3e-5, gt=0)
    batch_size: int = Field(16, ge=1)
    grad_accum_steps: int = Field(1, ge=1)
    epochs: int = Field(1, ge=1)
    warmup_steps: int = Field(1, ge=1)
    max_steps: Optional[int] = Field(None, ge=1)
    schedule: Schedule = Schedule.CONSTANT
    mode: TrainMode = TrainMode.FINETUNE
    seed: int = Field(0, ge=0, lt=2**64)
    dtype: str = Field("f32", pattern="^(f32|f64)$")
    word_pool: WordPool = WordPool.CLS
    aggregator: AggregatorKind = AggregatorKind.TRANSFORMER
    balance: bool = False
    dropout: float = Field(0.0, ge=0, lt=1)
    cache_features: bool = True
    profile: ModelProfile = ModelProfile.DESK
    content_len: int = Field(202, ge=1)
    max_chunks: int = Field(32, ge=1)
    cls_in_content_len: bool = False
    truncate_side: TruncateSide = TruncateSide.HEAD
    init_std: Optional[float] = Field(None, gt=0)
    key_dim: Optional[int] = Field(None, ge=1)

    @classmethod
    def preset(cls, name: str, **overrides: Any) -> "TrainConfig":
        if name not in PRESETS:
            raise ValueError(f"Unknown preset {name!r}; expected one of {sorted(PRESETS)}")
        settings = dict(PRESETS[name])
        settings.update(overrides)
        return cls(**settings)

    @property
    def frozen(self) -> bool:
        return self.mode == TrainMode.FEATURE_EXTRACT

    def to_model_config(self, vocab_size: int, n_class: int) -> ModelConfig:
        """Model geometry for this run: the profile's transformer shape plus the chunk settings."""
        settings: Dict[str, Any] = dict(
            content_len=self.content_len,
            max_chunks=self.max_chunks,
            cls_in_content_len=self.cls_in_content_len,
            truncate_side=self.truncate_side,
            dropout=self.dropout,
            dtype=self.dtype,
        )
        if self.init_std is not None:
            settings["init_std"] = self.init_std
        return build_model_config(
            self.profile,
            vocab_size,
            n_class,
            aggregator=self.aggregator,
            word_pool=self.word_pool,
            key_dim=self.key_dim,
            **settings,
        )
