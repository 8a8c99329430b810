import logging
from typing import List, Optional, Sequence, TypeVar

import numpy as np

from chunkstack.utils.rng import Stream, make_rng

logger = logging.getLogger(__name__)

R = TypeVar("R")


def downsample_balance(records: Sequence[R], seed: int, n_class: Optional[int] = None) -> List[R]:
    """
    Down-sample every class to the minority-class count.

    Each class is sampled without replacement on the DOWNSAMPLE stream, then
    the union is shuffled on the same stream.

    Args:
        records: Objects with an integer ``label``
        seed: Run seed
        n_class: Expected number of classes (default: largest label + 1)

    Returns:
        n_class * minority records in a deterministic order

    Raises:
        ValueError: If some class in [0, n_class) has no record
    """
    if not records:
        raise ValueError("Cannot balance an empty record list")
    labels = np.array([r.label for r in records], dtype=np.int64)
    n_class = int(labels.max()) + 1 if n_class is None else n_class
    counts = np.bincount(labels, minlength=n_class)
    absent = [c for c in range(n_class) if counts[c] == 0]
    if absent:
        raise ValueError(f"Cannot balance: classes {absent} have no records")
    if len(counts) > n_class:
        raise ValueError(f"Label {len(counts) - 1} outside [0, {n_class})")

    minority = int(counts.min())
    rng = make_rng(seed, Stream.DOWNSAMPLE)
    chosen = []
    for c in range(n_class):
        members = np.flatnonzero(labels == c)
        chosen.append(np.sort(rng.choice(members, size=minority, replace=False)))
    order = rng.permutation(np.concatenate(chosen))
    logger.info(
        f"Balanced {len(records)} records to {len(order)} "
        f"({minority} per class, counts before: {counts.tolist()})"
    )
    return [records[i] for i in order]
