"""Learning-rate schedule: optional linear warmup, then cosine decay.

The curve is exact closed form: linear from 0 to peak over the first
``round(warmup_fraction * total_steps)`` steps, then cosine from peak down
to ``min_lr = min_lr_ratio * peak`` at the final step. Pretraining uses no
warmup; fine-tuning warms up over the first 10% of steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class TrainSchedule:
    peak_lr: float = 2e-4
    total_steps: int = 25_000
    batch_size_sequences: int = 2048
    warmup_fraction: float = 0.0
    min_lr_ratio: float = 0.1
    epochs: int = 1

    def __post_init__(self) -> None:
        if not 0.0 <= self.warmup_fraction < 1.0:
            raise ValueError("warmup_fraction must lie in [0, 1)")
        if self.peak_lr <= 0:
            raise ValueError("peak_lr must be positive")
        if not 0.0 <= self.min_lr_ratio <= 1.0:
            raise ValueError("min_lr_ratio must lie in [0, 1] so min_lr <= peak_lr")
        if self.total_steps < 0:
            raise ValueError("total_steps must be >= 0")
        if self.batch_size_sequences < 1:
            raise ValueError("batch_size_sequences must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")

    @property
    def min_lr(self) -> float:
        return self.min_lr_ratio * self.peak_lr

    @property
    def warmup_steps(self) -> int:
        return round(self.warmup_fraction * self.total_steps)

    def for_finetuning(self, total_steps: int) -> "TrainSchedule":
        from dataclasses import replace

        return replace(self, total_steps=total_steps, warmup_fraction=0.10, epochs=3)


def lr_at(schedule: TrainSchedule, step: int) -> float:
    """Learning rate at an integer step in [0, total_steps]."""
    total = schedule.total_steps
    if not 0 <= step <= total:
        raise ValueError(f"step {step} outside [0, {total}]")
    warmup = schedule.warmup_steps
    if step < warmup:
        return schedule.peak_lr * step / warmup
    if total == warmup:  # degenerate: no decay span
        return schedule.peak_lr
    progress = (step - warmup) / (total - warmup)
    return schedule.min_lr + 0.5 * (schedule.peak_lr - schedule.min_lr) * (
        1.0 + math.cos(math.pi * progress)
    )
