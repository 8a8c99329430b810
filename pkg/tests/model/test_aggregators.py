import numpy as np
import pytest
from pydantic import ValidationError

from chunkstack.autodiff.tensor import Tensor
from chunkstack.model.aggregators import (
    ClassifierHead,
    CnnAggregator,
    LstmAggregator,
    MeanAggregator,
    TransformerAggregator,
    build_aggregator,
)
from chunkstack.model.config import AggregatorConfig, AggregatorKind, tiny_config
from chunkstack.utils.rng import Stream, make_rng

ALL_KINDS = list(AggregatorKind)


def make_aggregator(kind, max_chunks=5):
    config = tiny_config(14, aggregator=kind, max_chunks=max_chunks)
    return build_aggregator(config, make_rng(0, Stream.INIT))


def vectors(rng, batch, steps):
    return rng.normal(size=(batch, steps, 8))


class TestAggregatorContracts:
    """Shape checks and mask invariants shared by every strategy"""

    @pytest.mark.parametrize(
        "kind, cls",
        [
            (AggregatorKind.TRANSFORMER, TransformerAggregator),
            (AggregatorKind.TRANSFORMER_POS, TransformerAggregator),
            (AggregatorKind.LSTM, LstmAggregator),
            (AggregatorKind.CNN, CnnAggregator),
            (AggregatorKind.MEAN, MeanAggregator),
        ],
    )
    def test_build_aggregator(self, kind, cls):
        aggregator = make_aggregator(kind)
        assert isinstance(aggregator, cls)
        assert aggregator.kind == kind

    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_output_shape(self, kind, rng):
        out = make_aggregator(kind)(Tensor(vectors(rng, 2, 3), dtype="f64"), np.array([[1, 1, 0], [1, 1, 1]]))
        assert out.shape == (2, 8)

    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_appended_masked_chunks_change_nothing(self, kind, rng):
        aggregator = make_aggregator(kind)
        x = vectors(rng, 2, 3)
        mask = np.array([[1, 1, 0], [1, 1, 1]])
        padded = np.concatenate([x, rng.normal(size=(2, 2, 8)) * 5], axis=1)
        padded_mask = np.concatenate([mask, np.zeros((2, 2), dtype=mask.dtype)], axis=1)
        a = aggregator(Tensor(x, dtype="f64"), mask).data
        b = aggregator(Tensor(padded, dtype="f64"), padded_mask).data
        np.testing.assert_allclose(a, b, rtol=0, atol=1e-8)

    @pytest.mark.parametrize("kind", [AggregatorKind.MEAN, AggregatorKind.TRANSFORMER])
    def test_position_free_aggregators_ignore_chunk_order(self, kind, rng):
        aggregator = make_aggregator(kind)
        x = vectors(rng, 1, 4)
        mask = np.ones((1, 4), dtype=np.int64)
        permuted = x[:, [2, 0, 3, 1]]
        a = aggregator(Tensor(x, dtype="f64"), mask).data
        b = aggregator(Tensor(permuted, dtype="f64"), mask).data
        np.testing.assert_allclose(a, b, rtol=0, atol=1e-8)

    def test_positions_make_order_matter(self, rng):
        aggregator = make_aggregator(AggregatorKind.TRANSFORMER_POS)
        x = vectors(rng, 1, 3)
        mask = np.ones((1, 3), dtype=np.int64)
        a = aggregator(Tensor(x, dtype="f64"), mask).data
        b = aggregator(Tensor(x[:, ::-1].copy(), dtype="f64"), mask).data
        assert not np.allclose(a, b)

    def test_position_table_bounds_chunk_count(self, rng):
        aggregator = make_aggregator(AggregatorKind.TRANSFORMER_POS, max_chunks=3)
        with pytest.raises(ValueError, match="exceed"):
            aggregator(Tensor(vectors(rng, 1, 4), dtype="f64"), np.ones((1, 4)))

    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_fully_masked_document_raises(self, kind, rng):
        with pytest.raises(ValueError, match="all chunks masked"):
            make_aggregator(kind)(Tensor(vectors(rng, 2, 2), dtype="f64"), np.array([[1, 0], [0, 0]]))

    def test_mask_shape_mismatch(self, rng):
        with pytest.raises(ValueError, match="incompatible shapes"):
            make_aggregator(AggregatorKind.MEAN)(Tensor(vectors(rng, 2, 2), dtype="f64"), np.ones((2, 3)))


class TestStrategies:
    """Strategy-specific behavior"""

    def test_mean_is_masked_average(self, rng):
        x = vectors(rng, 1, 3)
        out = make_aggregator(AggregatorKind.MEAN)(Tensor(x, dtype="f64"), np.array([[1, 0, 1]])).data
        np.testing.assert_allclose(out[0], (x[0, 0] + x[0, 2]) / 2, rtol=1e-12)

    def test_lstm_reads_up_to_last_real_chunk(self, rng):
        aggregator = make_aggregator(AggregatorKind.LSTM)
        x = vectors(rng, 1, 4)
        full = aggregator(Tensor(x[:, :2].copy(), dtype="f64"), np.ones((1, 2), dtype=np.int64)).data
        masked = aggregator(Tensor(x, dtype="f64"), np.array([[1, 1, 0, 0]])).data
        np.testing.assert_allclose(full, masked, rtol=0, atol=1e-12)

    def test_cnn_output_is_non_negative(self, rng):
        out = make_aggregator(AggregatorKind.CNN)(Tensor(vectors(rng, 2, 3), dtype="f64"), np.ones((2, 3), dtype=np.int64)).data
        assert np.all(out >= 0)

    def test_even_kernel_rejected(self):
        with pytest.raises(ValidationError):
            AggregatorConfig(kind=AggregatorKind.CNN, hidden=8, ff_inner=16, n_heads=2, head_dim=4, kernel_size=2)

    def test_cnn_center_tap_identity_is_relu(self, rng):
        aggregator = make_aggregator(AggregatorKind.CNN)
        center = aggregator.weight.shape[0] // 2
        aggregator.weight.data[:] = 0.0
        aggregator.weight.data[center] = np.eye(8)
        v = vectors(rng, 1, 1)
        out = aggregator(Tensor(v, dtype="f64"), np.ones((1, 1), dtype=np.int64)).data
        np.testing.assert_allclose(out[0], np.maximum(v[0, 0], 0.0), rtol=0, atol=1e-15)
        padded = np.concatenate([v, rng.normal(size=(1, 2, 8))], axis=1)
        out = aggregator(Tensor(padded, dtype="f64"), np.array([[1, 0, 0]])).data
        np.testing.assert_allclose(out[0], np.maximum(v[0, 0], 0.0), rtol=0, atol=1e-15)

    def test_lstm_with_zero_parameters_returns_zero(self, rng):
        aggregator = make_aggregator(AggregatorKind.LSTM)
        for p in (aggregator.input_weight, aggregator.hidden_weight, aggregator.bias):
            p.data[:] = 0.0
        out = aggregator(Tensor(vectors(rng, 2, 3), dtype="f64"), np.array([[1, 1, 0], [1, 1, 1]])).data
        assert np.array_equal(out, np.zeros((2, 8)))


class TestClassifierHead:
    """Affine map to logits"""

    def test_hand_set_weights(self):
        head = ClassifierHead(tiny_config(14, n_class=2), make_rng(0, Stream.INIT))
        weight = np.zeros((8, 2))
        weight[0] = [1.0, 2.0]
        weight[1] = [3.0, -1.0]
        head.projection.weight.data[:] = weight
        head.projection.bias.data[:] = [0.5, -0.5]
        doc = np.zeros((1, 8))
        doc[0, :2] = [2.0, 1.0]
        logits = head(Tensor(doc, dtype="f64")).data
        np.testing.assert_allclose(logits, [[5.5, 2.5]], rtol=0, atol=1e-12)

    def test_zero_head_gives_zero_logits(self, rng):
        head = ClassifierHead(tiny_config(14, n_class=3), make_rng(0, Stream.INIT))
        head.projection.weight.data[:] = 0.0
        logits = head(Tensor(vectors(rng, 2, 1)[:, 0], dtype="f64")).data
        assert logits.shape == (2, 3)
        assert np.array_equal(logits, np.zeros((2, 3)))
