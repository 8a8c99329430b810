import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Tuple

import numpy as np

from chunkstack.nn.module import Parameter

logger = logging.getLogger(__name__)

BETA1 = 0.9
BETA2 = 0.999
EPS = 1e-8


@dataclass
class AdamState:
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(
    params: Dict[str, np.ndarray],
    grads: Dict[str, np.ndarray],
    state: AdamState,
    lr: float,
    beta1: float = BETA1,
    beta2: float = BETA2,
    eps: float = EPS,
) -> AdamState:
    """
    One Adam update with bias correction, applied in place to ``params``.

    Mathematical Background:
    ----------------------
    m_t = b1 m_{t-1} + (1 - b1) g
    v_t = b2 v_{t-1} + (1 - b2) g^2
    theta_t = theta_{t-1} - lr * (m_t / (1 - b1^t)) / (sqrt(v_t / (1 - b2^t)) + eps)

    Raises:
        ValueError: If a gradient is missing or its shape differs from its parameter
        FloatingPointError: If a gradient holds NaN or Inf
    """
    for name, g in grads.items():
        if name not in params or g.shape != params[name].shape:
            raise ValueError(f"adam_step: gradient {name} does not match any parameter shape")
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"adam_step: non-finite gradient for {name}")
    missing = [name for name in params if name not in grads]
    if missing:
        raise ValueError(f"adam_step: missing gradients for {missing}")

    state.step += 1
    t = state.step
    correction1 = 1.0 - beta1**t
    correction2 = 1.0 - beta2**t
    for name, theta in params.items():
        g = grads[name]
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(theta)
            v = np.zeros_like(theta)
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * (g * g)
        state.m[name], state.v[name] = m, v
        m_hat = m / correction1
        v_hat = v / correction2
        theta -= (lr * m_hat / (np.sqrt(v_hat) + eps)).astype(theta.dtype)
    return state


class Adam:
    """Adam over a fixed list of named parameters; no weight decay."""

    def __init__(self, named_params: Iterable[Tuple[str, Parameter]]):
        self.named_params: List[Tuple[str, Parameter]] = list(named_params)
        if not self.named_params:
            raise ValueError("Adam needs at least one trainable parameter")
        self.state = AdamState()

    def zero_grad(self) -> None:
        for _, p in self.named_params:
            p.zero_grad()

    def step(self, lr: float) -> None:
        params = {name: p.data for name, p in self.named_params}
        grads = {
            name: (p.grad if p.grad is not None else np.zeros_like(p.data))
            for name, p in self.named_params
        }
        adam_step(params, grads, self.state, lr)
