from chunkstack.text.chunker import Batch, ChunkedDocument, TruncateSide, chunk, collate
from chunkstack.text.tokenizer import (
    CLS_ID,
    PAD_ID,
    UNK_ID,
    Vocabulary,
    build_vocab,
    encode,
    normalize,
    wordpiece,
)

__all__ = [
    "Batch",
    "CLS_ID",
    "ChunkedDocument",
    "PAD_ID",
    "TruncateSide",
    "UNK_ID",
    "Vocabulary",
    "build_vocab",
    "chunk",
    "collate",
    "encode",
    "normalize",
    "wordpiece",
]
