import json

import numpy as np
import pytest
from pydantic import ValidationError

from chunkstack.data.corpus import Record
from chunkstack.evaluation.report import EvalReport, build_report, evaluate, mean_macro_f1


class KeywordClassifier:
    """Scores 0.9 for class 1 whenever the keyword appears"""

    n_class = 2

    def __init__(self, keyword: str):
        self.keyword = keyword

    def predict_proba(self, texts):
        p1 = np.array([0.9 if self.keyword in t.split() else 0.2 for t in texts])
        return np.stack([1 - p1, p1], axis=1)


class TestBuildReport:
    """Report assembly from probabilities"""

    def test_binary_report(self):
        probs = np.array([[0.9, 0.1], [0.6, 0.4], [0.65, 0.35], [0.2, 0.8]])
        report = build_report([0, 0, 1, 1], probs, 2)
        assert report.n_examples == 4
        assert report.auc == pytest.approx(0.75)
        assert report.confusion == [[2, 0], [1, 1]]
        assert report.accuracy == 0.75
        assert report.per_class[1].recall == 0.5

    def test_argmax_ties_go_to_first_class(self):
        report = build_report([0, 1], np.full((2, 2), 0.5), 2)
        assert report.confusion == [[1, 0], [1, 0]]

    def test_multiclass_has_no_auc(self):
        probs = np.eye(3)
        report = build_report([0, 1, 2], probs, 3)
        assert report.auc is None
        assert report.macro_f1 == 1.0

    def test_single_gold_class_has_no_auc(self):
        assert build_report([1, 1], np.array([[0.3, 0.7], [0.6, 0.4]]), 2).auc is None

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="do not match"):
            build_report([0, 1], np.zeros((3, 2)), 2)

    def test_counts_must_add_up(self):
        report = build_report([0, 1], np.eye(2), 2)
        with pytest.raises(ValidationError):
            EvalReport(**{**report.model_dump(), "n_examples": 3})


class TestRendering:
    def test_json_line(self):
        line = build_report([0, 1], np.eye(2), 2).to_json_line()
        assert "\n" not in line
        payload = json.loads(line)
        assert payload["macro_f1"] == 1.0
        assert payload["confusion"] == [[1, 0], [0, 1]]

    def test_text_and_frame(self):
        report = build_report([0, 1, 1], np.array([[0.7, 0.3], [0.2, 0.8], [0.6, 0.4]]), 2)
        frame = report.to_frame()
        assert list(frame.index) == [0, 1]
        assert frame.loc[1, "support"] == 2
        text = report.to_text()
        assert "macro_f1:" in text
        assert "auc: 1.000000" in text


class TestEvaluate:
    def test_keyword_classifier(self):
        records = [
            Record(id="a", text="alpha beta", label=1),
            Record(id="b", text="beta", label=0),
            Record(id="c", text="gamma alpha", label=1),
            Record(id="d", text="delta", label=0),
        ]
        report = evaluate(KeywordClassifier("alpha"), records)
        assert report.accuracy == 1.0
        assert report.auc == 1.0

    def test_empty_corpus(self):
        with pytest.raises(ValueError):
            evaluate(KeywordClassifier("alpha"), [])

    def test_mean_macro_f1(self):
        perfect = build_report([0, 1], np.eye(2), 2)
        inverted = build_report([0, 1], np.eye(2)[::-1], 2)
        assert mean_macro_f1([perfect, inverted]) == 0.5
        with pytest.raises(ValueError):
            mean_macro_f1([])
