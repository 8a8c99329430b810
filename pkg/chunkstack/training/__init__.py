from chunkstack.training.checkpoint import load_checkpoint, load_model, save_checkpoint, save_model
from chunkstack.training.config import PRESETS, Schedule, TrainConfig, TrainMode
from chunkstack.training.optimizer import Adam, AdamState, adam_step
from chunkstack.training.sampling import downsample_balance
from chunkstack.training.schedule import lr_schedule
from chunkstack.training.trainer import StepLog, Trainer, TrainResult, train

__all__ = [
    "Adam",
    "AdamState",
    "PRESETS",
    "Schedule",
    "StepLog",
    "TrainConfig",
    "TrainMode",
    "TrainResult",
    "Trainer",
    "adam_step",
    "downsample_balance",
    "load_checkpoint",
    "load_model",
    "lr_schedule",
    "save_checkpoint",
    "save_model",
    "train",
]
