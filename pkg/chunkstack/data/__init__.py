from chunkstack.data.corpus import Record, label_count, load_corpus, load_texts, write_corpus
from chunkstack.data.synth import SignalKind, SynthSpec, synth_generate, write_synth

__all__ = [
    "Record",
    "SignalKind",
    "SynthSpec",
    "label_count",
    "load_corpus",
    "load_texts",
    "synth_generate",
    "write_corpus",
    "write_synth",
]
