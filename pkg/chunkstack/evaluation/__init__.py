from chunkstack.evaluation.metrics import accuracy, auc_roc, confusion_matrix, macro_f1
from chunkstack.evaluation.report import (
    ClassScore,
    EvalReport,
    build_report,
    evaluate,
    mean_macro_f1,
)

__all__ = [
    "ClassScore",
    "EvalReport",
    "accuracy",
    "auc_roc",
    "build_report",
    "confusion_matrix",
    "evaluate",
    "macro_f1",
    "mean_macro_f1",
]
