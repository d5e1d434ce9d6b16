"""Fine-tuning, prediction and the gate-gradient pass over sequential loaders."""

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .autodiff import backward, cross_entropy_loss
from .batching import IGNORE_INDEX, SequentialLoader
from .encoder import EncoderModel, HeadMask, forward, head_gate_grads
from .optim import DEFAULT_EPOCHS, DEFAULT_LEARNING_RATE, OptimizerState, optimizer_step

logger = logging.getLogger(__name__)


class NonFiniteLossError(ArithmeticError):
    pass


@dataclass
class TrainingReport:
    epochs: int
    steps: int = 0
    epoch_losses: List[float] = field(default_factory=list)


def fine_tune(
    model: EncoderModel,
    loader: SequentialLoader,
    *,
    epochs: int = DEFAULT_EPOCHS,
    learning_rate: float = DEFAULT_LEARNING_RATE,
    head_mask: Optional[HeadMask] = None,
) -> TrainingReport:
    state = OptimizerState(learning_rate=learning_rate)
    params = model.named_parameters()
    report = TrainingReport(epochs=epochs)
    for epoch in range(epochs):
        total = 0.0
        for batch in loader:
            model.zero_grad()
            logits = forward(model, batch.token_ids, batch.attention, head_mask)
            loss = cross_entropy_loss(logits, batch.gold, IGNORE_INDEX)
            value = loss.item()
            if not np.isfinite(value):
                raise NonFiniteLossError(f"non-finite loss {value} at epoch {epoch}, step {state.step}")
            backward(loss)
            optimizer_step(state, params)
            total += value
        report.steps = state.step
        report.epoch_losses.append(total / max(len(loader), 1))
        logger.debug("epoch %d/%d mean loss %.4f", epoch + 1, epochs, report.epoch_losses[-1])
    model.zero_grad()
    return report


def predict(model: EncoderModel, loader: SequentialLoader, head_mask: Optional[HeadMask] = None) -> List[List[int]]:
    """Arg-max label ids per example, unpadded, in loader order."""
    predictions: List[List[int]] = []
    for batch in loader:
        logits = forward(model, batch.token_ids, batch.attention, head_mask)
        best = logits.values.argmax(axis=-1)
        predictions.extend(best[row, :length].tolist() for row, length in enumerate(batch.lengths))
    return predictions


def accumulate_head_gradients(
    model: EncoderModel, loader: SequentialLoader, head_mask: Optional[HeadMask] = None
) -> np.ndarray:
    """Sum of per-batch |gate gradient| over the loader; parameters are never updated."""
    if not loader.examples:
        raise ValueError("cannot accumulate head gradients over an empty split")
    config = model.config
    total = np.zeros((config.num_layers, config.num_heads_per_layer))
    for batch in loader:
        model.zero_grad()
        logits = forward(model, batch.token_ids, batch.attention, head_mask)
        loss = cross_entropy_loss(logits, batch.gold, IGNORE_INDEX, allow_empty=True)
        backward(loss)
        total += head_gate_grads(model)
    model.zero_grad()
    return total
