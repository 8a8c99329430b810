"""
chunkstack: hierarchical transformers for classifying documents longer than a
flat encoder's input limit.

Documents are split into fixed-length chunks, each chunk is encoded by a small
transformer word encoder, pooled into a chunk vector, and the chunk vectors are
aggregated (transformer, LSTM, CNN or mean) into one document vector that feeds
a linear classifier.
"""

import os

__version__ = "0.1.0"


def _cap_threads() -> None:
    # Must run before numpy is imported anywhere in the package.
    threads = os.environ.get("CHUNKSTACK_THREADS", "1")
    for var in (
        "OMP_NUM_THREADS",
        "OPENBLAS_NUM_THREADS",
        "MKL_NUM_THREADS",
        "VECLIB_MAXIMUM_THREADS",
        "NUMEXPR_NUM_THREADS",
    ):
        os.environ.setdefault(var, threads)


_cap_threads()
