from chunkstack.pipeline.experiment import (
    ALL_VARIANTS,
    ExperimentResult,
    ExperimentRow,
    default_train_config,
    run_experiment,
)
from chunkstack.pipeline.gradcheck import model_grad_check

__all__ = [
    "ALL_VARIANTS",
    "ExperimentResult",
    "ExperimentRow",
    "default_train_config",
    "model_grad_check",
    "run_experiment",
]
