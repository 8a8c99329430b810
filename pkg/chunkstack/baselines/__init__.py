from chunkstack.baselines.bow import BowClassifier, BowConfig, bow_baseline, count_vectors
from chunkstack.baselines.truncation import fit_truncation, truncation_baseline

__all__ = [
    "BowClassifier",
    "BowConfig",
    "bow_baseline",
    "count_vectors",
    "fit_truncation",
    "truncation_baseline",
]
