import logging
from typing import Sequence

import numpy as np

from chunkstack.autodiff import functional as F
from chunkstack.autodiff.gradcheck import GradCheckReport, grad_check
from chunkstack.model.config import AggregatorKind, WordPool, tiny_config
from chunkstack.model.hierarchical import HierarchicalModel
from chunkstack.text.chunker import chunk, collate
from chunkstack.text.tokenizer import RESERVED
from chunkstack.utils.rng import Stream, make_rng

logger = logging.getLogger(__name__)

# Three full-ish chunks, a single partial chunk, and two chunks: every mask pattern shows up.
DOC_LENGTHS = (14, 5, 9)


def model_grad_check(
    seed: int = 0,
    aggregator: AggregatorKind = AggregatorKind.TRANSFORMER,
    word_pool: WordPool = WordPool.CLS,
    vocab_size: int = 12,
    doc_lengths: Sequence[int] = DOC_LENGTHS,
    dtype: str = "f64",
    h: float = 1e-5,
    tol: float = 1e-4,
) -> GradCheckReport:
    """
    Central-difference check of every parameter of a tiny hierarchical model.

    The model is hidden 8 with 2 encoder and 2 aggregator layers over 3 chunks
    of 6 content tokens. Documents are random non-reserved ids drawn from the
    gradient-check stream; labels alternate.
    """
    if dtype != "f64":
        raise ValueError(f"Gradient checks need f64 arithmetic, got dtype={dtype!r}")
    config = tiny_config(vocab_size, n_class=2, aggregator=aggregator, word_pool=word_pool)
    model = HierarchicalModel(config, seed=seed)
    rng = make_rng(seed, Stream.GRADCHECK)
    docs = [
        chunk(
            rng.integers(len(RESERVED), vocab_size, size=n).tolist(),
            content_len=config.content_len,
            max_chunks=config.max_chunks,
        )
        for n in doc_lengths
    ]
    batch = collate(docs)
    labels = np.arange(len(docs)) % config.n_class

    def loss():
        return F.cross_entropy(model(batch), labels)

    report = grad_check(loss, dict(model.named_parameters()), h=h, tol=tol)
    logger.info(
        f"Gradient check over {report.n_scalars} scalars "
        f"({aggregator.value}/{word_pool.value}): max relative error {report.max_rel_err:.3e}"
    )
    return report
