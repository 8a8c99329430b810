import json
import logging
from enum import Enum
from pathlib import Path
from typing import Dict, List, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from chunkstack.data.corpus import Record, write_corpus
from chunkstack.utils.rng import Stream, make_rng

logger = logging.getLogger(__name__)

FILLER_FORMAT = "tok{:05d}"
TRIGGER_FORMAT = "trig{:04d}"

# LongRangePair triggers: matched pairs (A, B) and (A', B').
FIRST_TRIGGERS = (TRIGGER_FORMAT.format(0), TRIGGER_FORMAT.format(2))  # A, A'
LATE_TRIGGERS = (TRIGGER_FORMAT.format(1), TRIGGER_FORMAT.format(3))  # B, B'


class SignalKind(str, Enum):
    KEYWORD_ANYWHERE = "keyword"
    LONG_RANGE_PAIR = "long-range"


class SynthSpec(BaseModel):
    """
    Parameters of a synthetic long-document corpus.

    Documents are sequences of filler words ``tok00000 .. tok{vocab_size-1}``
    with reserved trigger words ``trig0000, ...`` planted at controlled offsets.
    """

    model_config = ConfigDict(frozen=True)

    n_docs: int = Field(2000, ge=1)
    n_test_docs: int = Field(500, ge=0)
    vocab_size: int = Field(500, ge=1, le=100000)
    doc_len_mean: int = Field(600, ge=1)
    doc_len_jitter: int = Field(50, ge=0)
    n_class: int = Field(2, ge=2)
    signal_kind: SignalKind = SignalKind.LONG_RANGE_PAIR
    signal_offset_tokens: int = Field(300, ge=0)
    content_len: int = Field(202, ge=1)
    plant_in_first_chunk: bool = False
    seed: int = Field(0, ge=0)

    @model_validator(mode="after")
    def check_feasible(self) -> "SynthSpec":
        shortest = self.doc_len_mean - self.doc_len_jitter
        if shortest < 1:
            raise ValueError(
                f"doc_len_mean - doc_len_jitter must be >= 1, got {shortest}"
            )
        if self.signal_kind == SignalKind.LONG_RANGE_PAIR:
            if self.n_class != 2:
                raise ValueError("long-range corpora are binary; n_class must be 2")
            if self.signal_offset_tokens < self.content_len:
                raise ValueError(
                    f"signal_offset_tokens {self.signal_offset_tokens} must be >= content_len "
                    f"{self.content_len} so the late trigger falls past the first chunk"
                )
            if shortest <= self.signal_offset_tokens:
                raise ValueError(
                    f"Shortest document ({shortest} tokens) leaves no room for a trigger at "
                    f"offset >= {self.signal_offset_tokens}"
                )
        return self

    @property
    def triggers(self) -> List[str]:
        if self.signal_kind == SignalKind.LONG_RANGE_PAIR:
            return [TRIGGER_FORMAT.format(i) for i in range(4)]
        return [TRIGGER_FORMAT.format(i) for i in range(self.n_class - 1)]


def _filler(rng: np.random.Generator, spec: SynthSpec) -> List[str]:
    low = spec.doc_len_mean - spec.doc_len_jitter
    length = int(rng.integers(low, spec.doc_len_mean + spec.doc_len_jitter + 1))
    return [FILLER_FORMAT.format(int(i)) for i in rng.integers(0, spec.vocab_size, size=length)]


def _long_range_doc(rng: np.random.Generator, spec: SynthSpec, combo: int) -> Tuple[List[str], int]:
    """
    combo cycles 0..3 over (A, B)+, (A, B')-, (A', B')+, (A', B)-, so every trigger
    appears equally often in both classes.
    """
    first = FIRST_TRIGGERS[combo // 2]
    late = LATE_TRIGGERS[(combo // 2 + combo % 2) % 2]
    label = int(combo % 2 == 0)
    words = _filler(rng, spec)
    first_chunk = min(spec.content_len, len(words))
    words[int(rng.integers(0, first_chunk))] = first
    words[int(rng.integers(spec.signal_offset_tokens, len(words)))] = late
    return words, label


def _keyword_doc(rng: np.random.Generator, spec: SynthSpec, label: int) -> List[str]:
    words = _filler(rng, spec)
    if label > 0:
        limit = min(spec.content_len, len(words)) if spec.plant_in_first_chunk else len(words)
        words[int(rng.integers(0, limit))] = TRIGGER_FORMAT.format(label - 1)
    return words


def generate_records(spec: SynthSpec, n_docs: int, stream: Stream, split: str) -> List[Record]:
    """Generate one split; class (or trigger combination) counts are balanced by construction."""
    rng = make_rng(spec.seed, stream)
    cycle = 4 if spec.signal_kind == SignalKind.LONG_RANGE_PAIR else spec.n_class
    slots = rng.permutation(np.arange(n_docs) % cycle)
    records: List[Record] = []
    for i, slot in enumerate(slots):
        if spec.signal_kind == SignalKind.LONG_RANGE_PAIR:
            words, label = _long_range_doc(rng, spec, int(slot))
        else:
            label = int(slot)
            words = _keyword_doc(rng, spec, label)
        records.append(Record(id=f"{split}-{i:06d}", text=" ".join(words), label=label))
    return records


def synth_generate(spec: SynthSpec) -> Tuple[List[Record], List[Record]]:
    """Deterministic (train, test) corpora for ``spec``."""
    train = generate_records(spec, spec.n_docs, Stream.SYNTH_TRAIN, "train")
    test = generate_records(spec, spec.n_test_docs, Stream.SYNTH_TEST, "test")
    counts = np.bincount([r.label for r in train], minlength=spec.n_class).tolist()
    logger.info(
        f"Generated {spec.signal_kind.value} corpus: {len(train)} train / {len(test)} test, "
        f"train label counts {counts}"
    )
    return train, test


def write_synth(spec: SynthSpec, out_dir: Union[str, Path]) -> Dict[str, Path]:
    """Write train.jsonl, test.jsonl and a spec.json echo into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    train, test = synth_generate(spec)
    paths = {"train": out / "train.jsonl", "test": out / "test.jsonl", "spec": out / "spec.json"}
    write_corpus(paths["train"], train)
    write_corpus(paths["test"], test)
    paths["spec"].write_text(
        json.dumps(spec.model_dump(mode="json"), sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    return paths
