import logging
from typing import Optional, Sequence

from chunkstack.data.corpus import Record, label_count
from chunkstack.evaluation.report import EvalReport, evaluate
from chunkstack.model.hierarchical import HierarchicalClassifier
from chunkstack.text.tokenizer import Vocabulary
from chunkstack.training.config import TrainConfig
from chunkstack.training.trainer import train

logger = logging.getLogger(__name__)


def truncation_config(cfg: TrainConfig) -> TrainConfig:
    """The same run restricted to the first chunk."""
    return TrainConfig(**{**cfg.model_dump(), "max_chunks": 1})


def fit_truncation(
    train_records: Sequence[Record],
    vocab: Vocabulary,
    cfg: TrainConfig,
    n_class: Optional[int] = None,
) -> HierarchicalClassifier:
    """Train the hierarchical model on the first chunk of every document only."""
    n_class = label_count(train_records) if n_class is None else n_class
    cfg = truncation_config(cfg)
    result = train(train_records, vocab, cfg.to_model_config(len(vocab), n_class), cfg)
    logger.info(f"Truncation baseline trained: final loss {result.final_loss:.6f}")
    return HierarchicalClassifier(result.model, vocab)


def truncation_baseline(
    train_records: Sequence[Record],
    test_records: Sequence[Record],
    vocab: Vocabulary,
    cfg: TrainConfig,
    n_class: Optional[int] = None,
) -> EvalReport:
    """Train with max_chunks forced to 1 and evaluate on ``test_records``."""
    return evaluate(fit_truncation(train_records, vocab, cfg, n_class), test_records)
