import logging
from typing import List, Optional, Protocol, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, model_validator

from chunkstack.data.corpus import Record
from chunkstack.evaluation.metrics import (
    accuracy,
    auc_roc,
    confusion_matrix,
    macro_f1,
    per_class_scores,
)

logger = logging.getLogger(__name__)


class Classifier(Protocol):
    n_class: int

    def predict_proba(self, texts: Sequence[str]) -> np.ndarray:
        ...


class ClassScore(BaseModel):
    label: int
    precision: float = Field(..., ge=0, le=1)
    recall: float = Field(..., ge=0, le=1)
    f1: float = Field(..., ge=0, le=1)
    support: int = Field(..., ge=0)


class EvalReport(BaseModel):
    """Per-class scores, macro-F1, accuracy, AUC-ROC (binary tasks) and confusion counts."""

    n_examples: int = Field(..., ge=1)
    n_class: int = Field(..., ge=2)
    per_class: List[ClassScore]
    macro_f1: float = Field(..., ge=0, le=1)
    accuracy: float = Field(..., ge=0, le=1)
    auc: Optional[float] = Field(None, ge=0, le=1)
    confusion: List[List[int]]

    @model_validator(mode="after")
    def check_counts(self) -> "EvalReport":
        total = sum(sum(row) for row in self.confusion)
        if total != self.n_examples:
            raise ValueError(f"Confusion counts sum to {total}, expected {self.n_examples}")
        return self

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([c.model_dump() for c in self.per_class]).set_index("label")

    def to_text(self) -> str:
        """Human-readable key-value block followed by the per-class table."""
        lines = [
            f"n_examples: {self.n_examples}",
            f"n_class: {self.n_class}",
            f"accuracy: {self.accuracy:.6f}",
            f"macro_f1: {self.macro_f1:.6f}",
            f"auc: {'n/a' if self.auc is None else f'{self.auc:.6f}'}",
            f"confusion: {self.confusion}",
            "",
            self.to_frame().to_string(float_format=lambda v: f"{v:.6f}"),
        ]
        return "\n".join(lines)

    def to_json_line(self) -> str:
        return self.model_dump_json()


def build_report(gold: Sequence[int], probs: np.ndarray, n_class: int) -> EvalReport:
    """
    Assemble an EvalReport from gold labels and class probabilities [N, n_class].

    Predictions are the argmax (first class on ties). AUC uses the class-1
    probability and is only reported for binary tasks with both classes present.
    """
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 2 or probs.shape != (len(gold), n_class):
        raise ValueError(
            f"Probabilities of shape {probs.shape} do not match {len(gold)} examples x {n_class} classes"
        )
    pred = probs.argmax(axis=1)
    counts = confusion_matrix(gold, pred, n_class)
    scores = per_class_scores(counts)
    auc = None
    if n_class == 2 and 0 < int(np.sum(gold)) < len(gold):
        auc = auc_roc(gold, probs[:, 1])
    return EvalReport(
        n_examples=len(gold),
        n_class=n_class,
        per_class=[
            ClassScore(
                label=c,
                precision=float(scores["precision"][c]),
                recall=float(scores["recall"][c]),
                f1=float(scores["f1"][c]),
                support=int(scores["support"][c]),
            )
            for c in range(n_class)
        ],
        macro_f1=macro_f1(gold, pred, n_class),
        accuracy=accuracy(gold, pred),
        auc=auc,
        confusion=counts.tolist(),
    )


def evaluate(classifier: Classifier, records: Sequence[Record]) -> EvalReport:
    """Run inference over ``records`` and score the predictions."""
    if not records:
        raise ValueError("Cannot evaluate on an empty corpus")
    gold = [r.label for r in records]
    probs = classifier.predict_proba([r.text for r in records])
    report = build_report(gold, probs, classifier.n_class)
    logger.info(
        f"Evaluated {report.n_examples} records: accuracy={report.accuracy:.4f} "
        f"macro_f1={report.macro_f1:.4f} auc={report.auc}"
    )
    return report


def mean_macro_f1(reports: Sequence[EvalReport]) -> float:
    """Average of per-task macro-F1 scores (one report per task)."""
    if not reports:
        raise ValueError("mean_macro_f1 needs at least one report")
    return float(np.mean([r.macro_f1 for r in reports]))
