"""Learning-rate schedules: polynomial decay with linear warmup,
inverse square root with a frozen prefix, and cosine warmup/decay
parameterized by epoch fraction."""

from __future__ import annotations

import math
from dataclasses import dataclass

KINDS = ("polynomial_decay", "inverse_sqrt", "cosine_warmup_decay")


@dataclass(frozen=True)
class ScheduleConfig:
    kind: str
    peak_lr: float
    warmup_steps: int = 0
    total_steps: int = 0
    end_lr: float = 0.0
    power: float = 1.0
    frozen_prefix_steps: int = 0
    warmup_epochs: float = 4.0
    decay_epochs: float = 10.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.peak_lr <= 0:
            raise ValueError("peak_lr must be positive")
        if self.kind == "polynomial_decay" and self.warmup_steps > self.total_steps:
            raise ValueError("warmup_steps must not exceed total_steps")


def pretraining_schedule(
    peak_lr: float = 7e-4, warmup_steps: int = 10_000, total_steps: int = 91_075
) -> ScheduleConfig:
    """Replicated pretraining recipe: linear warmup then polynomial decay."""
    return ScheduleConfig(
        kind="polynomial_decay",
        peak_lr=peak_lr,
        warmup_steps=warmup_steps,
        total_steps=total_steps,
    )


def semantic_schedule(
    peak_lr: float = 6e-5, warmup_steps: int = 6_000, frozen_prefix_steps: int = 2_000
) -> ScheduleConfig:
    """Fine-tuning recipe: inverse square root after a frozen prefix."""
    return ScheduleConfig(
        kind="inverse_sqrt",
        peak_lr=peak_lr,
        warmup_steps=warmup_steps,
        frozen_prefix_steps=frozen_prefix_steps,
    )


def sentiment_schedule(
    peak_lr: float, warmup_epochs: float = 4.0, decay_epochs: float = 10.0
) -> ScheduleConfig:
    """Classifier fine-tuning recipe: cosine warmup from zero, cosine decay
    back to zero, by epoch fraction."""
    return ScheduleConfig(
        kind="cosine_warmup_decay",
        peak_lr=peak_lr,
        warmup_epochs=warmup_epochs,
        decay_epochs=decay_epochs,
    )


def schedule_lr(config: ScheduleConfig, step: float) -> float:
    """Learning rate at ``step`` (for the cosine kind, an epoch fraction)."""
    if step < 0:
        raise ValueError("step must be >= 0")
    if config.kind == "polynomial_decay":
        if config.warmup_steps > 0 and step <= config.warmup_steps:
            return config.peak_lr * step / config.warmup_steps
        if step >= config.total_steps:
            return config.end_lr
        remaining = (config.total_steps - step) / (config.total_steps - config.warmup_steps)
        return (config.peak_lr - config.end_lr) * remaining**config.power + config.end_lr

    if config.kind == "inverse_sqrt":
        if step < config.frozen_prefix_steps:
            return 0.0
        active = step - config.frozen_prefix_steps
        if config.warmup_steps > 0 and active <= config.warmup_steps:
            return config.peak_lr * active / config.warmup_steps
        return config.peak_lr * math.sqrt(config.warmup_steps / active)

    # cosine_warmup_decay, by epoch fraction
    epoch = step
    if epoch <= config.warmup_epochs:
        return config.peak_lr * (1.0 - math.cos(math.pi * epoch / config.warmup_epochs)) / 2.0
    if epoch <= config.warmup_epochs + config.decay_epochs:
        offset = epoch - config.warmup_epochs
        return config.peak_lr * (1.0 + math.cos(math.pi * offset / config.decay_epochs)) / 2.0
    return 0.0
