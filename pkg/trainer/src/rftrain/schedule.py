"""Learning-rate schedule: linear warmup then cosine decay to zero."""

from __future__ import annotations

import math


def warmup_cosine_lr(
    epoch: int,
    total_epochs: int,
    warmup_epochs: int,
    peak_lr: float,
    hold_epochs: int = 0,
) -> float:
    """Per-epoch learning rate: 0 -> peak over the warmup, cosine -> 0 after.

    ``warmup_cosine_lr(0, ...) == 0``, ``warmup_cosine_lr(warmup, ...) == peak``,
    and the value decays to exactly 0 at ``total_epochs``.  ``hold_epochs``
    keeps the rate at peak after the warmup before the decay starts (0
    reproduces the plain warmup+cosine profile).
    """
    if not 0 <= warmup_epochs < total_epochs:
        raise ValueError("need 0 <= warmup_epochs < total_epochs")
    if hold_epochs < 0 or warmup_epochs + hold_epochs >= total_epochs:
        raise ValueError("hold_epochs must fit between warmup and the end")
    if epoch < warmup_epochs:
        return peak_lr * epoch / warmup_epochs
    if epoch < warmup_epochs + hold_epochs:
        return peak_lr
    start = warmup_epochs + hold_epochs
    progress = (epoch - start) / (total_epochs - start)
    return peak_lr * 0.5 * (1.0 + math.cos(math.pi * min(progress, 1.0)))
