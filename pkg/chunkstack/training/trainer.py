import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from pydantic import BaseModel

from chunkstack.autodiff import functional as F
from chunkstack.data.corpus import Record
from chunkstack.model.config import ModelConfig
from chunkstack.model.hierarchical import HierarchicalModel, prepare_documents
from chunkstack.text.chunker import ChunkedDocument, collate
from chunkstack.text.tokenizer import Vocabulary
from chunkstack.training.config import TrainConfig
from chunkstack.training.optimizer import Adam
from chunkstack.training.sampling import downsample_balance
from chunkstack.training.schedule import lr_schedule
from chunkstack.utils.rng import Stream, make_rng

logger = logging.getLogger(__name__)


class StepLog(BaseModel):
    step: int
    epoch: int
    lr: float
    loss: float


@dataclass
class TrainResult:
    model: HierarchicalModel
    logs: List[StepLog] = field(default_factory=list)

    @property
    def final_loss(self) -> float:
        return self.logs[-1].loss if self.logs else float("nan")


class Trainer:
    """
    Mini-batch training loop with gradient accumulation.

    Every epoch the examples are shuffled on the SHUFFLE stream and cut into
    micro-batches of ``batch_size``; ``grad_accum_steps`` consecutive
    micro-batches form one optimizer step. Each micro-batch loss is weighted by
    its share of the step's examples, so the accumulated gradient is the
    gradient of the mean cross-entropy over all of them.

    In frozen mode the word encoder is excluded from the optimizer and records
    no tape; with ``cache_features`` its pooled outputs are computed once per
    document up front.
    """

    def __init__(self, model: HierarchicalModel, cfg: TrainConfig):
        if cfg.dtype != model.config.dtype:
            raise ValueError(
                f"Training dtype {cfg.dtype!r} does not match model dtype {model.config.dtype!r}"
            )
        self.model = model
        self.cfg = cfg
        self.model.set_frozen(cfg.frozen)
        self.optimizer = Adam(self.model.trainable_parameters())
        self.shuffle_rng = make_rng(cfg.seed, Stream.SHUFFLE)
        self.dropout_rng = make_rng(cfg.seed, Stream.DROPOUT) if model.config.dropout > 0 else None
        self.step = 0

    def steps_per_epoch(self, n_examples: int) -> int:
        micro = math.ceil(n_examples / self.cfg.batch_size)
        return math.ceil(micro / self.cfg.grad_accum_steps)

    def fit(self, docs: Sequence[ChunkedDocument], labels: Sequence[int]) -> List[StepLog]:
        """
        Train on pre-chunked documents.

        Raises:
            ValueError: If there are no examples or a label is out of range
            RuntimeError: If a loss or gradient becomes non-finite (names the step)
        """
        if len(docs) == 0:
            raise ValueError("Cannot train on an empty corpus")
        if len(docs) != len(labels):
            raise ValueError(f"{len(docs)} documents but {len(labels)} labels")
        targets = np.asarray(labels, dtype=np.int64)
        n_class = self.model.config.n_class
        if targets.min() < 0 or targets.max() >= n_class:
            raise ValueError(f"Labels must lie in [0, {n_class}), got max {targets.max()}")

        features = None
        if self.cfg.frozen and self.cfg.cache_features:
            features = [self.model.encoder_features(d) for d in docs]
            logger.info(f"Cached frozen encoder features for {len(docs)} documents")

        total_steps = self.cfg.epochs * self.steps_per_epoch(len(docs))
        if self.cfg.max_steps is not None:
            total_steps = min(total_steps, self.cfg.max_steps)
        logger.info(
            f"Training {self.model.parameter_count()} parameters "
            f"({sum(p.size for _, p in self.optimizer.named_params)} trainable) on "
            f"{len(docs)} documents for {total_steps} steps"
        )

        logs: List[StepLog] = []
        self.model.train()
        try:
            for epoch in range(1, self.cfg.epochs + 1):
                order = self.shuffle_rng.permutation(len(docs))
                micro = [
                    order[i : i + self.cfg.batch_size]
                    for i in range(0, len(order), self.cfg.batch_size)
                ]
                for g in range(0, len(micro), self.cfg.grad_accum_steps):
                    if self.step >= total_steps:
                        break
                    group = micro[g : g + self.cfg.grad_accum_steps]
                    logs.append(self._optimizer_step(epoch, group, docs, targets, features, total_steps))
                if self.step >= total_steps:
                    break
                logger.info(f"Epoch {epoch} done: last loss {logs[-1].loss:.6f}")
        finally:
            self.model.eval()
        return logs

    def _optimizer_step(
        self,
        epoch: int,
        group: List[np.ndarray],
        docs: Sequence[ChunkedDocument],
        targets: np.ndarray,
        features: Optional[List[np.ndarray]],
        total_steps: int,
    ) -> StepLog:
        self.step += 1
        lr = lr_schedule(self.step, self.cfg, total_steps)
        n_group = sum(len(idx) for idx in group)
        self.optimizer.zero_grad()
        step_loss = 0.0
        try:
            for idx in group:
                batch = collate([docs[i] for i in idx])
                cached = None
                if features is not None:
                    cached = self.model.collate_features(
                        [features[i] for i in idx], batch.chunk_mask.shape[1]
                    )
                logger.debug(f"Step {self.step}: micro-batch ids {batch.ids.shape}")
                logits = self.model.forward(batch, self.dropout_rng, features=cached)
                loss = F.cross_entropy(logits, targets[idx])
                weight = len(idx) / n_group
                F.mul(loss, F.as_tensor(weight, loss.dtype)).backward()
                step_loss += weight * loss.item()
            if not math.isfinite(step_loss):
                raise FloatingPointError(f"loss is {step_loss}")
            self.optimizer.step(lr)
        except FloatingPointError as exc:
            raise RuntimeError(f"Non-finite loss at step {self.step}: {exc}") from exc
        logger.info(f"step={self.step} lr={lr:.6e} loss={step_loss:.6f}")
        return StepLog(step=self.step, epoch=epoch, lr=lr, loss=step_loss)


def train(
    records: Sequence[Record],
    vocab: Vocabulary,
    model_config: ModelConfig,
    cfg: TrainConfig,
) -> TrainResult:
    """
    Build a model from ``model_config`` (initialised from ``cfg.seed``) and train it.

    Args:
        records: Labeled training documents
        vocab: Vocabulary used to tokenize ``records``
        model_config: Architecture and chunk geometry
        cfg: Optimisation settings

    Returns:
        TrainResult with the trained model and one StepLog per optimizer step
    """
    if not records:
        raise ValueError("Cannot train on an empty corpus")
    if model_config.word_encoder.vocab_size != len(vocab):
        raise ValueError(
            f"Model vocab_size {model_config.word_encoder.vocab_size} does not match "
            f"vocabulary of {len(vocab)} tokens"
        )
    if cfg.balance:
        records = downsample_balance(records, cfg.seed, model_config.n_class)
    model = HierarchicalModel(model_config, seed=cfg.seed)
    docs = prepare_documents([r.text for r in records], vocab, model_config)
    logs = Trainer(model, cfg).fit(docs, [r.label for r in records])
    return TrainResult(model=model, logs=logs)
