import logging
from dataclasses import dataclass, field
from typing import Dict, Mapping

import numpy as np

from .autodiff import AutodiffError, ShapeError, Tensor

logger = logging.getLogger(__name__)

DEFAULT_LEARNING_RATE = 5e-5
DEFAULT_EPOCHS = 3


@dataclass
class OptimizerState:
    """Adam moments keyed by parameter name."""

    learning_rate: float = DEFAULT_LEARNING_RATE
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    first_moments: Dict[str, np.ndarray] = field(default_factory=dict)
    second_moments: Dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0


def optimizer_step(state: OptimizerState, params: Mapping[str, Tensor]) -> None:
    """Apply one Adam update in place, then clear the gradients."""
    missing = [name for name, param in params.items() if param.grad is None]
    if missing:
        raise AutodiffError(f"missing gradient for registered parameter(s): {', '.join(missing)}")

    state.step += 1
    first_correction = 1.0 - state.beta1**state.step
    second_correction = 1.0 - state.beta2**state.step

    for name, param in params.items():
        grad = param.grad
        first = state.first_moments.get(name)
        second = state.second_moments.get(name)
        if first is None:
            first = np.zeros_like(param.values)
            second = np.zeros_like(param.values)
        if first.shape != param.shape or grad.shape != param.shape:
            raise ShapeError("optimizer_step", (param.shape, first.shape, grad.shape), f"parameter {name}")

        first = state.beta1 * first + (1.0 - state.beta1) * grad
        second = state.beta2 * second + (1.0 - state.beta2) * grad * grad
        state.first_moments[name] = first
        state.second_moments[name] = second

        update = state.learning_rate * (first / first_correction) / (np.sqrt(second / second_correction) + state.eps)
        param.values -= update
        param.grad = None
