"""Adam with linear warmup and linear decay."""

import logging
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional

import numpy as np

from src.core.exceptions import NonFiniteError, ShapeError
from src.numeric.tensor import Tensor

logger = logging.getLogger(__name__)


@dataclass
class LinearSchedule:
    """Linear warmup over ``warmup_steps``, then linear decay to 0 at ``total_steps``.

    ``total_steps=None`` keeps the rate constant after warmup.
    """

    base_lr: float
    warmup_steps: int = 0
    total_steps: Optional[int] = None

    def rate(self, step: int) -> float:
        if self.warmup_steps > 0 and step <= self.warmup_steps:
            return self.base_lr * step / self.warmup_steps
        if self.total_steps is None or self.total_steps <= self.warmup_steps:
            return self.base_lr
        remaining = (self.total_steps - step) / (self.total_steps - self.warmup_steps)
        return self.base_lr * max(0.0, remaining)


@dataclass
class AdamState:
    """Optimizer moments and hyperparameters. ``step`` counts completed updates."""

    schedule: LinearSchedule
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    weight_decay: float = 0.0
    step: int = 0
    first_moment: Dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(
    params: Mapping[str, Tensor],
    grads: Mapping[str, np.ndarray],
    state: AdamState,
    grad_clip: Optional[float] = None,
) -> float:
    """Apply one bias-corrected Adam update in place. Returns the rate used."""
    for name, grad in grads.items():
        if not np.all(np.isfinite(grad)):
            raise NonFiniteError(f"gradient of parameter '{name}' is not finite")
        if grad.shape != params[name].shape:
            raise ShapeError(f"gradient of '{name}' has shape {grad.shape}, parameter {params[name].shape}")

    scale = 1.0
    if grad_clip is not None:
        norm = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))
        if norm > grad_clip:
            scale = grad_clip / norm

    state.step += 1
    t = state.step
    lr = state.schedule.rate(t)
    correction1 = 1.0 - state.beta1 ** t
    correction2 = 1.0 - state.beta2 ** t

    for name, param in params.items():
        grad = grads.get(name)
        if grad is None:
            grad = np.zeros_like(param.data)
        elif scale != 1.0:
            grad = grad * scale
        m = state.first_moment.get(name)
        v = state.second_moment.get(name)
        if m is None:
            m = np.zeros_like(param.data)
            v = np.zeros_like(param.data)
        m = state.beta1 * m + (1.0 - state.beta1) * grad
        v = state.beta2 * v + (1.0 - state.beta2) * grad * grad
        state.first_moment[name] = m
        state.second_moment[name] = v
        update = (m / correction1) / (np.sqrt(v / correction2) + state.epsilon)
        new_value = param.data - lr * update
        if state.weight_decay > 0.0:
            new_value = new_value - lr * state.weight_decay * param.data
        param.assign(new_value)
    return lr


class Adam:
    """Stateful wrapper reading gradients from ``param.grad``."""

    def __init__(
        self,
        params: Mapping[str, Tensor],
        schedule: LinearSchedule,
        beta1: float = 0.9,
        beta2: float = 0.999,
        epsilon: float = 1e-8,
        weight_decay: float = 0.0,
        grad_clip: Optional[float] = None,
    ):
        self.params = params
        self.grad_clip = grad_clip
        self.state = AdamState(
            schedule=schedule, beta1=beta1, beta2=beta2, epsilon=epsilon, weight_decay=weight_decay
        )

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def step(self) -> float:
        grads = {}
        for name, p in self.params.items():
            grads[name] = p.grad if p.grad is not None else np.zeros_like(p.data)
        return adam_step(self.params, grads, self.state, grad_clip=self.grad_clip)
