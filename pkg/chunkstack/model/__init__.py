from chunkstack.model.aggregators import (
    ChunkAggregator,
    ClassifierHead,
    CnnAggregator,
    LstmAggregator,
    MeanAggregator,
    TransformerAggregator,
    build_aggregator,
)
from chunkstack.model.config import (
    AggregatorConfig,
    AggregatorKind,
    ModelConfig,
    WordEncoderConfig,
    WordPool,
    desk_config,
    full_config,
    tiny_config,
)
from chunkstack.model.hierarchical import (
    HierarchicalClassifier,
    HierarchicalModel,
    prepare_documents,
)
from chunkstack.model.word_encoder import (
    LayerWeights,
    WordEncoder,
    cls_pool,
    weighted_sum_pool,
)

__all__ = [
    "AggregatorConfig",
    "AggregatorKind",
    "ChunkAggregator",
    "ClassifierHead",
    "CnnAggregator",
    "HierarchicalClassifier",
    "HierarchicalModel",
    "LayerWeights",
    "LstmAggregator",
    "MeanAggregator",
    "ModelConfig",
    "TransformerAggregator",
    "WordEncoder",
    "WordEncoderConfig",
    "WordPool",
    "build_aggregator",
    "cls_pool",
    "desk_config",
    "full_config",
    "prepare_documents",
    "tiny_config",
    "weighted_sum_pool",
]
