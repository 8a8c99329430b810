import logging
from typing import Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field

from chunkstack.autodiff import functional as F
from chunkstack.autodiff.tensor import Tensor, no_grad
from chunkstack.data.corpus import Record, label_count
from chunkstack.evaluation.report import EvalReport, evaluate
from chunkstack.nn.module import Module, zeros_init
from chunkstack.text.tokenizer import Vocabulary, encode
from chunkstack.training.optimizer import Adam
from chunkstack.utils.rng import Stream, make_rng

logger = logging.getLogger(__name__)


class BowConfig(BaseModel):
    lr: float = Field(0.05, gt=0)
    l2: float = Field(1e-3, ge=0)
    steps: int = Field(300, ge=1)
    batch_size: Optional[int] = Field(None, ge=1)
    seed: int = Field(0, ge=0)
    dtype: str = Field("f64", pattern="^(f32|f64)$")


def count_vectors(texts: Sequence[str], vocab: Vocabulary) -> np.ndarray:
    """Term-count matrix [N, len(vocab)] over the vocabulary ids of each text."""
    out = np.zeros((len(texts), len(vocab)), dtype=np.float64)
    for row, text in enumerate(texts):
        ids = encode(text, vocab)
        if ids:
            out[row] = np.bincount(ids, minlength=len(vocab))
    return out


class BowClassifier(Module):
    """
    L2-regularised multinomial logistic model over term counts.

    Mathematical Background:
    ----------------------
    p(y | x) = softmax(x W + b)
    loss = mean_i -log p(y_i | x_i) + (l2 / 2) ||W||^2
    Trained with the same Adam update as the hierarchical model.
    """

    def __init__(self, vocab: Vocabulary, n_class: int, cfg: BowConfig):
        self.vocab = vocab
        self.n_class = n_class
        self.cfg = cfg
        self.weight = zeros_init((len(vocab), n_class), cfg.dtype)
        self.bias = zeros_init((n_class,), cfg.dtype)

    def logits(self, features: np.ndarray) -> Tensor:
        return F.bias_add(F.matmul(F.as_tensor(features, self.weight.dtype), self.weight), self.bias)

    def fit(self, records: Sequence[Record]) -> "BowClassifier":
        if not records:
            raise ValueError("Cannot train the bag-of-words baseline on an empty corpus")
        features = count_vectors([r.text for r in records], self.vocab)
        labels = np.array([r.label for r in records], dtype=np.int64)
        optimizer = Adam(self.named_parameters())
        rng = make_rng(self.cfg.seed, Stream.SHUFFLE)
        batch = self.cfg.batch_size or len(records)
        half_l2 = F.as_tensor(self.cfg.l2 / 2.0, self.weight.dtype)
        for step in range(1, self.cfg.steps + 1):
            idx = rng.permutation(len(records))[:batch] if batch < len(records) else np.arange(len(records))
            optimizer.zero_grad()
            loss = F.add(
                F.cross_entropy(self.logits(features[idx]), labels[idx]),
                F.mul(F.reduce_sum(F.mul(self.weight, self.weight)), half_l2),
            )
            loss.backward()
            optimizer.step(self.cfg.lr)
            if step == 1 or step % 50 == 0 or step == self.cfg.steps:
                logger.debug(f"bow step={step} loss={loss.item():.6f}")
        logger.info(f"Bag-of-words baseline trained for {self.cfg.steps} steps: loss {loss.item():.6f}")
        return self

    def predict_proba(self, texts: Sequence[str]) -> np.ndarray:
        with no_grad():
            return F.softmax(self.logits(count_vectors(texts, self.vocab))).data.copy()


def bow_baseline(
    train_records: Sequence[Record],
    test_records: Sequence[Record],
    vocab: Vocabulary,
    cfg: Optional[BowConfig] = None,
    n_class: Optional[int] = None,
) -> EvalReport:
    """Fit the bag-of-words model on ``train_records`` and evaluate on ``test_records``."""
    n_class = label_count(train_records) if n_class is None else n_class
    model = BowClassifier(vocab, n_class, cfg or BowConfig()).fit(train_records)
    return evaluate(model, test_records)
