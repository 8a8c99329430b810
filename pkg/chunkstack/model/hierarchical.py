import logging
from typing import List, Optional, Sequence

import numpy as np

from chunkstack.autodiff import functional as F
from chunkstack.autodiff.tensor import Tensor, no_grad
from chunkstack.model.aggregators import ChunkAggregator, ClassifierHead, build_aggregator
from chunkstack.model.config import ModelConfig, WordPool
from chunkstack.model.word_encoder import (
    LayerWeights,
    WordEncoder,
    cls_pool,
    combine_layers,
    layer_means,
)
from chunkstack.nn.module import Module
from chunkstack.text.chunker import Batch, ChunkedDocument, chunk, collate
from chunkstack.text.tokenizer import Vocabulary, encode
from chunkstack.utils.rng import Stream, make_rng

logger = logging.getLogger(__name__)


def prepare_documents(
    texts: Sequence[str], vocab: Vocabulary, config: ModelConfig
) -> List[ChunkedDocument]:
    """Tokenize and chunk raw texts with the chunk geometry stored in ``config``."""
    return [
        chunk(
            encode(text, vocab),
            content_len=config.content_len,
            max_chunks=config.max_chunks,
            cls_in_content_len=config.cls_in_content_len,
            truncate_side=config.truncate_side,
        )
        for text in texts
    ]


class HierarchicalModel(Module):
    """
    Word encoder + word pooling + chunk aggregator + classifier head.

    Every chunk row is encoded independently by the word encoder, pooled into
    one vector per chunk ([CLS] row of the last layer, or a learned weighted
    sum of per-layer token means), aggregated over chunks into a document
    vector and mapped to class logits.

    ``set_frozen(True)`` turns the word encoder (token and position embeddings
    plus its transformer) into a fixed feature extractor: its parameters stop
    requiring gradients, so no tape is recorded for them and the optimizer
    never sees them. The layer weights of weighted-sum pooling stay trainable.
    """

    def __init__(self, config: ModelConfig, seed: int = 0):
        self.config = config
        rng = make_rng(seed, Stream.INIT)
        self.word_encoder = WordEncoder(config, rng)
        self.layer_weights = (
            LayerWeights(config.word_encoder.n_layers, config.dtype)
            if config.word_pool == WordPool.WSUM
            else None
        )
        self.aggregator: ChunkAggregator = build_aggregator(config, rng)
        self.head = ClassifierHead(config, rng)
        self.frozen = False

    def set_frozen(self, frozen: bool) -> None:
        self.frozen = frozen
        for p in self.word_encoder.parameters():
            p.requires_grad = not frozen
            p.grad = None
        logger.debug(f"Word encoder {'frozen' if frozen else 'trainable'}")

    def trainable_parameters(self) -> List[tuple]:
        return [(name, p) for name, p in self.named_parameters() if p.requires_grad]

    # -- word level ---------------------------------------------------------

    def chunk_vectors(
        self, batch: Batch, dropout_rng: Optional[np.random.Generator] = None
    ) -> Tensor:
        """Encode and pool every chunk row: -> [B, T, H]."""
        b, t, length = batch.ids.shape
        ids = batch.ids.reshape(b * t, length)
        mask = batch.token_mask.reshape(b * t, length)
        layers = self.word_encoder.encode_chunk(ids, mask, None if self.frozen else dropout_rng)
        if self.layer_weights is None:
            pooled = cls_pool(layers[-1])
        else:
            pooled = combine_layers(layer_means(layers, mask), self.layer_weights)
        return F.reshape(pooled, (b, t, self.config.hidden))

    def encoder_features(self, doc: ChunkedDocument) -> np.ndarray:
        """
        Word-encoder output of one document that pooling still needs.

        [n_chunks, H] final-layer [CLS] rows for CLS pooling, or
        [n_layers, n_chunks, H] per-layer token means for weighted-sum pooling.
        Computed without a tape.
        """
        with no_grad():
            layers = self.word_encoder.encode_chunk(doc.ids, doc.mask)
            if self.layer_weights is None:
                return cls_pool(layers[-1]).data.copy()
            return layer_means(layers, doc.mask).data.copy()

    def collate_features(self, features: Sequence[np.ndarray], width: int) -> np.ndarray:
        """Pad cached per-document features along the chunk axis to ``width``."""
        chunk_axis = 0 if self.layer_weights is None else 1
        padded = []
        for f in features:
            pad = [(0, 0)] * f.ndim
            pad[chunk_axis] = (0, width - f.shape[chunk_axis])
            padded.append(np.pad(f, pad))
        return np.stack(padded, axis=chunk_axis)

    def _vectors_from_features(self, features: np.ndarray) -> Tensor:
        cached = F.as_tensor(features, self.head.projection.weight.dtype)
        if self.layer_weights is None:
            return cached
        n_layers, b, t, h = cached.shape
        combined = combine_layers(F.reshape(cached, (n_layers, b * t, h)), self.layer_weights)
        return F.reshape(combined, (b, t, h))

    # -- document level -----------------------------------------------------

    def forward(
        self,
        batch: Batch,
        dropout_rng: Optional[np.random.Generator] = None,
        features: Optional[np.ndarray] = None,
    ) -> Tensor:
        """
        Logits [B, n_class] for a collated batch.

        Args:
            batch: Collated chunked documents
            dropout_rng: Generator for dropout masks; None disables dropout
            features: Cached word-encoder features (frozen mode); skips the encoder
        """
        if features is not None:
            if not self.frozen:
                raise ValueError("Cached encoder features are only valid with a frozen encoder")
            vectors = self._vectors_from_features(features)
        else:
            vectors = self.chunk_vectors(batch, dropout_rng)
        doc_vecs = self.aggregator(vectors, batch.chunk_mask, dropout_rng)
        return self.head(doc_vecs)

    __call__ = forward

    def predict_proba(self, docs: Sequence[ChunkedDocument], batch_size: int = 32) -> np.ndarray:
        """Class probabilities [N, n_class] in inference mode."""
        was_training = self.training
        self.eval()
        out = []
        try:
            with no_grad():
                for start in range(0, len(docs), batch_size):
                    batch = collate(docs[start : start + batch_size])
                    out.append(F.softmax(self.forward(batch)).data)
        finally:
            self.train(was_training)
        if not out:
            return np.zeros((0, self.config.n_class))
        return np.concatenate(out, axis=0)

    def parameter_count(self) -> int:
        return int(sum(p.size for p in self.parameters()))


class HierarchicalClassifier:
    """Raw-text front end: tokenizes and chunks with the model's geometry, then predicts."""

    def __init__(self, model: HierarchicalModel, vocab: Vocabulary, batch_size: int = 32):
        if model.config.word_encoder.vocab_size != len(vocab):
            raise ValueError(
                f"Model expects {model.config.word_encoder.vocab_size} tokens, "
                f"vocabulary has {len(vocab)}"
            )
        self.model = model
        self.vocab = vocab
        self.batch_size = batch_size

    @property
    def n_class(self) -> int:
        return self.model.config.n_class

    def predict_proba(self, texts: Sequence[str]) -> np.ndarray:
        docs = prepare_documents(texts, self.vocab, self.model.config)
        return self.model.predict_proba(docs, self.batch_size)
