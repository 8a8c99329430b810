import numpy as np
import pytest

from chunkstack.model.config import AggregatorKind, WordPool, tiny_config
from chunkstack.model.hierarchical import HierarchicalModel, prepare_documents
from chunkstack.training.checkpoint import save_model
from chunkstack.training.config import TrainConfig, TrainMode
from chunkstack.training.trainer import Trainer, train


@pytest.fixture
def toy_docs(toy_vocab, toy_records):
    config = tiny_config(len(toy_vocab))
    docs = prepare_documents([r.text for r in toy_records], toy_vocab, config)
    return docs, [r.label for r in toy_records]


def snapshot(model, prefix=""):
    return {name: p.data.copy() for name, p in model.named_parameters() if name.startswith(prefix)}


class TestTrainer:
    """Optimizer steps, accumulation and the frozen-encoder contract"""

    def test_overfits_small_corpus(self, toy_vocab, toy_records):
        config = tiny_config(len(toy_vocab))
        cfg = TrainConfig(lr=1e-2, batch_size=8, epochs=200, warmup_steps=1, dtype="f64")
        result = train(toy_records, toy_vocab, config, cfg)
        assert len(result.logs) == 200
        assert result.logs[0].loss > 5 * result.final_loss
        assert result.final_loss <= 0.1
        losses = [log.loss for log in result.logs]
        non_increasing = sum(b <= a for a, b in zip(losses, losses[1:]))
        assert non_increasing >= 0.9 * (len(losses) - 1)
        assert not result.model.training

    def test_step_count_and_logs(self, toy_vocab, toy_docs, caplog):
        docs, labels = toy_docs
        cfg = TrainConfig(lr=1e-3, batch_size=3, grad_accum_steps=2, epochs=2, dtype="f64")
        trainer = Trainer(HierarchicalModel(tiny_config(len(toy_vocab))), cfg)
        assert trainer.steps_per_epoch(8) == 2
        with caplog.at_level("INFO", logger="chunkstack.training.trainer"):
            logs = trainer.fit(docs, labels)
        assert [log.step for log in logs] == [1, 2, 3, 4]
        assert [log.epoch for log in logs] == [1, 1, 2, 2]
        assert "step=1 lr=" in caplog.text

    def test_max_steps_stops_early(self, toy_vocab, toy_docs):
        docs, labels = toy_docs
        cfg = TrainConfig(batch_size=2, epochs=5, max_steps=3, dtype="f64")
        logs = Trainer(HierarchicalModel(tiny_config(len(toy_vocab))), cfg).fit(docs, labels)
        assert len(logs) == 3

    def test_accumulation_matches_one_large_batch(self, toy_vocab, toy_docs):
        docs, labels = toy_docs
        config = tiny_config(len(toy_vocab))
        small = HierarchicalModel(config, seed=1)
        large = HierarchicalModel(config, seed=1)
        Trainer(small, TrainConfig(lr=1e-2, batch_size=2, grad_accum_steps=4, max_steps=1, dtype="f64")).fit(
            docs, labels
        )
        Trainer(large, TrainConfig(lr=1e-2, batch_size=8, grad_accum_steps=1, max_steps=1, dtype="f64")).fit(
            docs, labels
        )
        a, b = snapshot(small), snapshot(large)
        for name in a:
            np.testing.assert_allclose(a[name], b[name], rtol=0, atol=1e-9, err_msg=name)

    @pytest.mark.parametrize("cache_features", [True, False])
    def test_frozen_encoder_never_moves(self, toy_vocab, toy_docs, cache_features):
        docs, labels = toy_docs
        model = HierarchicalModel(tiny_config(len(toy_vocab), word_pool=WordPool.WSUM))
        encoder_before = snapshot(model, "word_encoder.")
        head_before = snapshot(model, "head.")
        cfg = TrainConfig(
            lr=1e-2, batch_size=4, max_steps=10, epochs=10, mode=TrainMode.FEATURE_EXTRACT,
            cache_features=cache_features, dtype="f64",
        )
        Trainer(model, cfg).fit(docs, labels)
        for name, value in snapshot(model, "word_encoder.").items():
            assert np.array_equal(value, encoder_before[name]), name
        assert any(not np.array_equal(v, head_before[k]) for k, v in snapshot(model, "head.").items())

    def test_same_seed_same_run(self, toy_vocab, toy_records, tmp_path):
        config = tiny_config(len(toy_vocab), aggregator=AggregatorKind.MEAN, dropout=0.1)
        cfg = TrainConfig(lr=1e-2, batch_size=3, epochs=2, dtype="f64", seed=9)
        a = train(toy_records, toy_vocab, config, cfg)
        b = train(toy_records, toy_vocab, config, cfg)
        assert [log.loss for log in a.logs] == [log.loss for log in b.logs]
        save_model(tmp_path / "a.ckpt", a.model)
        save_model(tmp_path / "b.ckpt", b.model)
        assert (tmp_path / "a.ckpt").read_bytes() == (tmp_path / "b.ckpt").read_bytes()

    def test_non_finite_loss_names_step(self, toy_vocab, toy_docs):
        docs, labels = toy_docs
        model = HierarchicalModel(tiny_config(len(toy_vocab)))
        model.head.projection.weight.data[:] = 1e308
        with np.errstate(all="ignore"):
            with pytest.raises(RuntimeError, match="step 1"):
                Trainer(model, TrainConfig(batch_size=8, dtype="f64")).fit(docs, labels)

    def test_rejects_bad_inputs(self, toy_vocab, toy_docs):
        docs, labels = toy_docs
        trainer = Trainer(HierarchicalModel(tiny_config(len(toy_vocab))), TrainConfig(dtype="f64"))
        with pytest.raises(ValueError):
            trainer.fit([], [])
        with pytest.raises(ValueError):
            trainer.fit(docs, [0] * 7 + [2])

    def test_vocabulary_must_match_model(self, toy_vocab, toy_records):
        with pytest.raises(ValueError, match="vocab"):
            train(toy_records, toy_vocab, tiny_config(len(toy_vocab) + 1), TrainConfig(dtype="f64"))

    def test_training_dtype_must_match_model(self, toy_vocab, toy_records):
        with pytest.raises(ValueError, match="'f32'.*'f64'"):
            train(toy_records, toy_vocab, tiny_config(len(toy_vocab)), TrainConfig(dtype="f32"))
