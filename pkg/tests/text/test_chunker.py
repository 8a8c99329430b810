import numpy as np
import pytest
from hypothesis import given, strategies as st

from chunkstack.text.chunker import TruncateSide, chunk, collate
from chunkstack.text.tokenizer import CLS_ID, PAD_ID


def ids_from(start: int, n: int):
    return list(range(start, start + n))


class TestChunk:
    """Fixed-length chunking with [CLS] rows"""

    def test_rows_start_with_cls_and_pad_where_masked(self):
        doc = chunk(ids_from(3, 13), content_len=5, max_chunks=4)
        assert doc.ids.shape == (3, 6)
        assert doc.n_real_chunks == 3
        assert np.all(doc.ids[:, 0] == CLS_ID)
        np.testing.assert_array_equal(doc.mask[2], [1, 1, 1, 1, 0, 0])
        np.testing.assert_array_equal(doc.ids == PAD_ID, doc.mask == 0)
        assert doc.ids.dtype == np.int64

    def test_cls_counted_inside_content_len(self):
        doc = chunk(ids_from(3, 8), content_len=5, cls_in_content_len=True)
        assert doc.row_len == 5
        assert doc.ids.shape == (2, 5)

    def test_head_and_tail_truncation(self):
        ids = ids_from(3, 20)
        head = chunk(ids, content_len=4, max_chunks=2, truncate_side=TruncateSide.HEAD)
        tail = chunk(ids, content_len=4, max_chunks=2, truncate_side="tail")
        assert head.content_ids() == ids[:8]
        assert tail.content_ids() == ids[-8:]

    def test_empty_document_gets_one_cls_chunk(self):
        doc = chunk([], content_len=4)
        assert doc.ids.shape == (1, 5)
        np.testing.assert_array_equal(doc.mask[0], [1, 0, 0, 0, 0])
        assert doc.content_ids() == []

    def test_invalid_geometry(self):
        with pytest.raises(ValueError):
            chunk([3, 4], content_len=4, max_chunks=0)
        with pytest.raises(ValueError):
            chunk([3, 4], content_len=1, cls_in_content_len=True)

    @given(
        st.lists(st.integers(3, 60), max_size=40),
        st.integers(1, 8),
        st.booleans(),
    )
    def test_content_reconstructs_input(self, ids, content_len, cls_inside):
        """Concatenating mask-1 content positions gives back the ids"""
        if cls_inside and content_len < 2:
            content_len = 2
        doc = chunk(ids, content_len=content_len, max_chunks=40, cls_in_content_len=cls_inside)
        assert doc.content_ids() == ids
        assert np.all(doc.mask[:, 0] == 1)


class TestCollate:
    """Batching documents with masked padding chunks"""

    def test_padding_chunks_are_masked_cls_rows(self):
        short = chunk(ids_from(3, 2), content_len=3)
        long = chunk(ids_from(3, 8), content_len=3)
        batch = collate([short, long])
        assert batch.ids.shape == (2, 3, 4)
        assert batch.size == 2
        np.testing.assert_array_equal(batch.chunk_mask, [[1, 0, 0], [1, 1, 1]])
        np.testing.assert_array_equal(batch.ids[0, 1], [CLS_ID, PAD_ID, PAD_ID, PAD_ID])
        np.testing.assert_array_equal(batch.token_mask[0, 2], [1, 0, 0, 0])
        np.testing.assert_array_equal(batch.ids[1], long.ids)

    def test_explicit_width(self):
        batch = collate([chunk([3], content_len=3)], n_chunks=4)
        assert batch.chunk_mask.tolist() == [[1, 0, 0, 0]]
        with pytest.raises(ValueError):
            collate([chunk(ids_from(3, 9), content_len=3)], n_chunks=2)

    def test_rejects_mixed_row_lengths_and_empty_batches(self):
        with pytest.raises(ValueError):
            collate([chunk([3], content_len=3), chunk([3], content_len=4)])
        with pytest.raises(ValueError):
            collate([])
