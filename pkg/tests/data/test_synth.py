import json
from collections import Counter

import pytest
from pydantic import ValidationError

from chunkstack.data.corpus import load_corpus
from chunkstack.data.synth import SignalKind, SynthSpec, synth_generate, write_synth

SMALL = dict(n_docs=40, n_test_docs=12, vocab_size=30, doc_len_mean=60, doc_len_jitter=5, content_len=20)


def long_range(**kwargs):
    return SynthSpec(signal_kind=SignalKind.LONG_RANGE_PAIR, **{**SMALL, "signal_offset_tokens": 25, **kwargs})


def keyword(**kwargs):
    return SynthSpec(signal_kind=SignalKind.KEYWORD_ANYWHERE, **{**SMALL, **kwargs})


class TestSynthSpec:
    """Feasibility checks"""

    def test_offset_must_pass_first_chunk(self):
        with pytest.raises(ValidationError, match="content_len"):
            long_range(signal_offset_tokens=10)

    def test_documents_must_reach_offset(self):
        with pytest.raises(ValidationError, match="no room"):
            long_range(signal_offset_tokens=55)

    def test_long_range_is_binary(self):
        with pytest.raises(ValidationError, match="binary"):
            long_range(n_class=3)

    def test_length_floor(self):
        with pytest.raises(ValidationError):
            keyword(doc_len_mean=5, doc_len_jitter=5)

    def test_triggers(self):
        assert long_range().triggers == ["trig0000", "trig0001", "trig0002", "trig0003"]
        assert keyword(n_class=3).triggers == ["trig0000", "trig0001"]


class TestLongRangeCorpus:
    """Label depends on a pair of triggers far apart"""

    def test_deterministic_and_split_specific(self):
        train_a, test_a = synth_generate(long_range())
        train_b, test_b = synth_generate(long_range())
        assert train_a == train_b and test_a == test_b
        assert train_a[0].text != test_a[0].text
        assert synth_generate(long_range(seed=1))[0] != train_a

    def test_classes_balanced(self):
        train, test = synth_generate(long_range())
        assert Counter(r.label for r in train) == {0: 20, 1: 20}
        assert Counter(r.label for r in test) == {0: 6, 1: 6}

    def test_trigger_placement_and_pairing(self):
        spec = long_range()
        train, _ = synth_generate(spec)
        for record in train:
            words = record.text.split()
            assert 55 <= len(words) <= 65
            first = [i for i, w in enumerate(words) if w in ("trig0000", "trig0002")]
            late = [i for i, w in enumerate(words) if w in ("trig0001", "trig0003")]
            assert len(first) == 1 and first[0] < spec.content_len
            assert len(late) == 1 and late[0] >= spec.signal_offset_tokens
            matched = (words[first[0]], words[late[0]]) in {("trig0000", "trig0001"), ("trig0002", "trig0003")}
            assert record.label == int(matched)

    def test_every_trigger_is_label_neutral(self):
        train, _ = synth_generate(long_range())
        for trigger in long_range().triggers:
            labels = Counter(r.label for r in train if trigger in r.text.split())
            assert labels[0] == labels[1]


class TestKeywordCorpus:
    def test_class_k_carries_trigger_k_minus_one(self):
        train, _ = synth_generate(keyword(n_class=3))
        for record in train:
            words = set(record.text.split())
            planted = {w for w in words if w.startswith("trig")}
            expected = set() if record.label == 0 else {f"trig{record.label - 1:04d}"}
            assert planted == expected

    def test_plant_in_first_chunk(self):
        train, _ = synth_generate(keyword(plant_in_first_chunk=True))
        for record in train:
            if record.label == 1:
                assert record.text.split().index("trig0000") < 20


class TestWriteSynth:
    def test_writes_both_splits_and_spec(self, tmp_path):
        spec = keyword()
        paths = write_synth(spec, tmp_path / "corpus")
        assert len(load_corpus(paths["train"])) == 40
        assert len(load_corpus(paths["test"])) == 12
        assert SynthSpec(**json.loads(paths["spec"].read_text(encoding="utf-8"))) == spec
