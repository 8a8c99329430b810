import numpy as np
import pytest

from chunkstack.baselines.bow import BowClassifier, BowConfig, bow_baseline, count_vectors
from chunkstack.baselines.truncation import fit_truncation, truncation_config
from chunkstack.model.config import ModelProfile
from chunkstack.training.config import TrainConfig


class TestBagOfWords:
    """Count features plus L2 logistic regression"""

    def test_count_vectors(self, toy_vocab):
        counts = count_vectors(["alpha alpha unable", ""], toy_vocab)
        assert counts.shape == (2, len(toy_vocab))
        assert counts[0, toy_vocab.id_of("alpha")] == 2
        assert counts[0, toy_vocab.id_of("##able")] == 1
        assert counts[1].sum() == 0

    def test_separates_keyword_task(self, toy_vocab, toy_records):
        report = bow_baseline(toy_records, toy_records, toy_vocab, BowConfig(steps=200, lr=0.1))
        assert report.accuracy == 1.0
        assert report.auc == 1.0

    def test_l2_shrinks_weights(self, toy_vocab, toy_records):
        loose = BowClassifier(toy_vocab, 2, BowConfig(steps=100, l2=0.0)).fit(toy_records)
        tight = BowClassifier(toy_vocab, 2, BowConfig(steps=100, l2=1.0)).fit(toy_records)
        assert np.linalg.norm(tight.weight.data) < np.linalg.norm(loose.weight.data)

    def test_probabilities(self, toy_vocab, toy_records):
        model = BowClassifier(toy_vocab, 2, BowConfig(steps=10)).fit(toy_records)
        probs = model.predict_proba(["alpha", "zzz"])
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, rtol=1e-12)

    def test_empty_training_set(self, toy_vocab):
        with pytest.raises(ValueError):
            BowClassifier(toy_vocab, 2, BowConfig()).fit([])


class TestTruncation:
    """The hierarchical model restricted to one chunk"""

    def test_forces_single_chunk(self):
        cfg = truncation_config(TrainConfig.preset("finetune", max_chunks=8))
        assert cfg.max_chunks == 1
        assert cfg.lr == 3e-5

    def test_fitted_model_sees_first_chunk_only(self, toy_vocab, toy_records):
        cfg = TrainConfig(profile=ModelProfile.TINY, content_len=6, max_chunks=3, dtype="f64", max_steps=2)
        classifier = fit_truncation(toy_records, toy_vocab, cfg)
        assert classifier.model.config.max_chunks == 1
        early = "alpha beta gamma delta read z"
        late = early + " alpha alpha alpha"
        np.testing.assert_array_equal(
            classifier.predict_proba([early]), classifier.predict_proba([late])
        )
