from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence

import numpy as np

from chunkstack.text.tokenizer import CLS_ID, PAD_ID


class TruncateSide(str, Enum):
    HEAD = "head"  # keep the beginning, drop the tail
    TAIL = "tail"


@dataclass(frozen=True)
class ChunkedDocument:
    """
    Token ids of one document cut into equal rows, each starting with [CLS].

    ``ids`` and ``mask`` are [n_chunks, row_len]; mask is 1 on a prefix of every
    row and PAD sits exactly where mask is 0.
    """

    ids: np.ndarray
    mask: np.ndarray
    n_real_chunks: int

    @property
    def row_len(self) -> int:
        return int(self.ids.shape[1])

    def content_ids(self) -> List[int]:
        """Mask-1 content positions (CLS excluded) concatenated across chunks."""
        return [int(t) for row, m in zip(self.ids, self.mask) for t in row[1:][m[1:] == 1]]


@dataclass(frozen=True)
class Batch:
    """Chunked documents padded to a common chunk count: ids [B, T, L], masks [B, T, L] and [B, T]."""

    ids: np.ndarray
    token_mask: np.ndarray
    chunk_mask: np.ndarray

    @property
    def size(self) -> int:
        return int(self.ids.shape[0])


def chunk(
    ids: Sequence[int],
    content_len: int = 202,
    max_chunks: int = 32,
    cls_in_content_len: bool = False,
    truncate_side: TruncateSide = TruncateSide.HEAD,
) -> ChunkedDocument:
    """
    Split a token-id sequence into chunks of ``content_len`` ids with [CLS] prepended.

    Args:
        ids: Token ids, without special tokens
        content_len: Content ids per chunk (rows are content_len + 1 long), or the
            full row length when ``cls_in_content_len`` is set
        max_chunks: Upper bound on the number of chunks; longer documents are cut
        cls_in_content_len: Count [CLS] inside ``content_len``
        truncate_side: Which end of an over-long document to keep

    Returns:
        ChunkedDocument with 1 <= n_chunks <= max_chunks

    Raises:
        ValueError: If content_len or max_chunks is out of range
    """
    if max_chunks < 1:
        raise ValueError(f"max_chunks must be >= 1, got {max_chunks}")
    per_chunk = content_len - 1 if cls_in_content_len else content_len
    if per_chunk < 1:
        raise ValueError(
            f"content_len must leave at least one content slot, got {content_len} "
            f"(cls_in_content_len={cls_in_content_len})"
        )
    row_len = per_chunk + 1
    capacity = per_chunk * max_chunks
    ids = list(ids)
    if len(ids) > capacity:
        ids = ids[:capacity] if TruncateSide(truncate_side) == TruncateSide.HEAD else ids[-capacity:]

    n_chunks = max(1, -(-len(ids) // per_chunk))
    out_ids = np.full((n_chunks, row_len), PAD_ID, dtype=np.int64)
    out_mask = np.zeros((n_chunks, row_len), dtype=np.int64)
    out_ids[:, 0] = CLS_ID
    out_mask[:, 0] = 1
    for c in range(n_chunks):
        piece = ids[c * per_chunk : (c + 1) * per_chunk]
        out_ids[c, 1 : 1 + len(piece)] = piece
        out_mask[c, 1 : 1 + len(piece)] = 1
    return ChunkedDocument(ids=out_ids, mask=out_mask, n_real_chunks=n_chunks)


def collate(docs: Sequence[ChunkedDocument], n_chunks: Optional[int] = None) -> Batch:
    """
    Stack documents into one batch, padding with masked chunks.

    Padding chunks hold [CLS] followed by PAD, token mask [1, 0, ...] and chunk
    mask 0, so the word encoder stays well defined on them while every
    aggregator ignores them.
    """
    if not docs:
        raise ValueError("collate needs at least one document")
    row_len = docs[0].row_len
    if any(d.row_len != row_len for d in docs):
        raise ValueError(f"collate: documents have different row lengths {[d.row_len for d in docs]}")
    width = max(d.ids.shape[0] for d in docs) if n_chunks is None else n_chunks
    if width < max(d.ids.shape[0] for d in docs):
        raise ValueError(f"collate: n_chunks={width} is smaller than the longest document")

    ids = np.full((len(docs), width, row_len), PAD_ID, dtype=np.int64)
    token_mask = np.zeros((len(docs), width, row_len), dtype=np.int64)
    chunk_mask = np.zeros((len(docs), width), dtype=np.int64)
    ids[:, :, 0] = CLS_ID
    token_mask[:, :, 0] = 1
    for b, doc in enumerate(docs):
        n = doc.ids.shape[0]
        ids[b, :n] = doc.ids
        token_mask[b, :n] = doc.mask
        chunk_mask[b, :n] = 1
    return Batch(ids=ids, token_mask=token_mask, chunk_mask=chunk_mask)
