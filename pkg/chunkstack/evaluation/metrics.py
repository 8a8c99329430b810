from typing import Dict, Sequence

import numpy as np
from scipy.stats import rankdata


def _as_labels(values: Sequence[int], name: str, n_class: int) -> np.ndarray:
    array = np.asarray(values, dtype=np.int64)
    if array.ndim != 1:
        raise ValueError(f"{name} must be a flat label list, got shape {array.shape}")
    if array.size and (array.min() < 0 or array.max() >= n_class):
        raise ValueError(f"{name} labels must lie in [0, {n_class})")
    return array


def confusion_matrix(gold: Sequence[int], pred: Sequence[int], n_class: int) -> np.ndarray:
    """Counts [n_class, n_class]; rows are gold classes, columns predictions."""
    g = _as_labels(gold, "gold", n_class)
    p = _as_labels(pred, "pred", n_class)
    if g.shape != p.shape:
        raise ValueError(f"gold and pred differ in length: {g.size} vs {p.size}")
    counts = np.zeros((n_class, n_class), dtype=np.int64)
    np.add.at(counts, (g, p), 1)
    return counts


def per_class_scores(confusion: np.ndarray) -> Dict[str, np.ndarray]:
    """
    Precision, recall and F1 per class from a confusion matrix.

    Mathematical Background:
    ----------------------
    P = TP / (TP + FP), R = TP / (TP + FN), F = 2PR / (P + R)
    Each ratio is 0 when its denominator is 0.
    """
    tp = np.diag(confusion).astype(np.float64)
    predicted = confusion.sum(axis=0).astype(np.float64)
    support = confusion.sum(axis=1).astype(np.float64)
    precision = np.divide(tp, predicted, out=np.zeros_like(tp), where=predicted > 0)
    recall = np.divide(tp, support, out=np.zeros_like(tp), where=support > 0)
    denom = precision + recall
    f1 = np.divide(2 * precision * recall, denom, out=np.zeros_like(tp), where=denom > 0)
    return {"precision": precision, "recall": recall, "f1": f1, "support": support}


def macro_f1(gold: Sequence[int], pred: Sequence[int], n_class: int) -> float:
    """
    Unweighted mean F1 over the classes that occur in ``gold``.

    Example: gold [0,0,1,1], pred [0,1,1,1] gives F1 2/3 and 4/5, macro 11/15.

    Raises:
        ValueError: On empty input, unequal lengths or out-of-range labels
    """
    if len(gold) == 0:
        raise ValueError("macro_f1 needs at least one example")
    scores = per_class_scores(confusion_matrix(gold, pred, n_class))
    supported = scores["support"] > 0
    return float(scores["f1"][supported].mean())


def auc_roc(gold: Sequence[int], scores: Sequence[float]) -> float:
    """
    Area under the ROC curve via the Mann-Whitney rank statistic.

    Mathematical Background:
    ----------------------
    With average ranks r over all scores (ties share their mean rank):
        AUC = (sum of positive ranks - n_pos (n_pos + 1) / 2) / (n_pos n_neg)
    which equals the fraction of positive/negative pairs ordered correctly,
    ties counting one half.

    Raises:
        ValueError: If gold is not binary with both classes present
    """
    g = np.asarray(gold, dtype=np.int64)
    s = np.asarray(scores, dtype=np.float64)
    if g.shape != s.shape or g.ndim != 1:
        raise ValueError(f"gold and scores differ in shape: {g.shape} vs {s.shape}")
    if not np.all((g == 0) | (g == 1)):
        raise ValueError("auc_roc needs binary gold labels")
    n_pos = int(g.sum())
    n_neg = int(g.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise ValueError("auc_roc needs both classes present in gold")
    ranks = rankdata(s, method="average")
    u = ranks[g == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def accuracy(gold: Sequence[int], pred: Sequence[int]) -> float:
    g = np.asarray(gold)
    p = np.asarray(pred)
    if g.size == 0 or g.shape != p.shape:
        raise ValueError("accuracy needs two non-empty label lists of equal length")
    return float((g == p).mean())
