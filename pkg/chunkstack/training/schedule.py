from typing import Optional

from chunkstack.training.config import Schedule, TrainConfig


def lr_schedule(step: int, cfg: TrainConfig, total_steps: Optional[int] = None) -> float:
    """
    Learning rate for a 1-based optimizer step.

    Mathematical Background:
    ----------------------
    warmup:          lr_t = lr * min(1, t / w)
    constant:        lr_t = lr                                    for t >= w
    linear decay:    lr_t = lr * max(0, (T - t) / max(1, T - w))  for t >= w

    Args:
        step: Optimizer step, starting at 1
        cfg: Supplies lr, warmup_steps and the post-warmup schedule
        total_steps: T, required by the linear schedule

    Returns:
        Learning rate for this step

    Raises:
        ValueError: If step < 1, or total_steps is missing for the linear schedule
    """
    if step < 1:
        raise ValueError(f"Schedule steps are 1-based, got {step}")
    if step < cfg.warmup_steps:
        return cfg.lr * step / cfg.warmup_steps
    if cfg.schedule == Schedule.CONSTANT:
        return cfg.lr
    if total_steps is None:
        raise ValueError("The linear schedule needs total_steps")
    span = max(1, total_steps - cfg.warmup_steps)
    return cfg.lr * max(0.0, (total_steps - step) / span)
