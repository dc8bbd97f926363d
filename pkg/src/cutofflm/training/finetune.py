"""Instruction fine-tuning with assistant-token loss masking.

Every data hand-off is guarded: the mix's declared cutoff must not exceed
the base checkpoint's cutoff year, and non-general examples must be dated
strictly before the model's boundary.
"""

from __future__ import annotations

import math
from dataclasses import replace
from pathlib import Path
from typing import Sequence

import numpy as np
import torch

from .. import tokenizer as tok
from ..chat import render_chat
from ..curation.mix import find_leakage_violations
from ..curation.types import InstructionExample
from ..errors import LeakageError
from ..model.transformer import IGNORE_ID, cross_entropy_loss
from .checkpoint import Checkpoint, save_checkpoint
from .pretrain import LossTrace, make_optimizer, _set_lr
from .schedule import TrainSchedule, lr_at


def _render_examples(
    examples: Sequence[InstructionExample],
    artifact: tok.TokenizerArtifact,
    seq_len: int,
) -> list[tuple[list[int], list[bool]]]:
    rendered = []
    for ex in examples:
        ids, mask = render_chat(artifact, ex.messages)
        ids, mask = ids[: seq_len + 1], mask[: seq_len + 1]
        if any(mask[1:]):  # at least one scored assistant target survived truncation
            rendered.append((ids, mask))
    if not rendered:
        raise ValueError("no example retains assistant tokens within the context window")
    return rendered


def _collate(
    batch: list[tuple[list[int], list[bool]]], pad_id: int
) -> tuple[torch.Tensor, torch.Tensor, int]:
    width = max(len(ids) for ids, _ in batch) - 1
    inputs = torch.full((len(batch), width), pad_id, dtype=torch.long)
    targets = torch.full((len(batch), width), IGNORE_ID, dtype=torch.long)
    real_tokens = 0
    for row, (ids, mask) in enumerate(batch):
        n = len(ids) - 1
        inputs[row, :n] = torch.tensor(ids[:-1], dtype=torch.long)
        for col in range(n):
            if mask[col + 1]:
                targets[row, col] = ids[col + 1]
        real_tokens += n
    return inputs, targets, real_tokens


def finetune(
    base: Checkpoint,
    dataset: Sequence[InstructionExample],
    declared_cutoff: int,
    artifact: tok.TokenizerArtifact,
    schedule: TrainSchedule,
    seed: int,
    epochs: int = 3,
    out_path: str | Path | None = None,
) -> tuple[Checkpoint, LossTrace]:
    """Tune a base checkpoint on an instruction mix; loss on assistant tokens only.

    Raises LeakageError before touching the model if the dataset's declared
    cutoff exceeds the base cutoff or any example is dated at/after the
    model's boundary.
    """
    if base.stage != "base":
        raise ValueError(f"finetune requires a base checkpoint, got stage {base.stage!r}")
    if not dataset:
        raise ValueError("instruction dataset is empty")
    if declared_cutoff > base.cutoff_year:
        raise LeakageError(
            f"dataset declares cutoff {declared_cutoff} but the base model's cutoff is "
            f"{base.cutoff_year}"
        )
    violations = find_leakage_violations(dataset, base.cutoff_year)
    if violations:
        detail = "; ".join(f"#{i}: {why}" for i, why in violations[:10])
        raise LeakageError(
            f"{len(violations)} example(s) breach the {base.cutoff_year} boundary: {detail}"
        )
    if artifact.fingerprint != base.tokenizer_fingerprint:
        raise ValueError("tokenizer fingerprint does not match the base checkpoint")

    rendered = _render_examples(dataset, artifact, base.config.sequence_length)
    batch_size = min(schedule.batch_size_sequences, len(rendered))
    steps_per_epoch = math.ceil(len(rendered) / batch_size)
    sched = replace(schedule, total_steps=epochs * steps_per_epoch, warmup_fraction=0.10)

    torch.manual_seed(seed)
    model = base.build_model()
    model.train()
    optimizer = make_optimizer(model, sched.peak_lr)
    rng = np.random.default_rng(seed)

    trace = LossTrace()
    tokens_consumed = 0
    step = 0
    for _epoch in range(epochs):
        order = rng.permutation(len(rendered))
        for start in range(0, len(rendered), batch_size):
            rows = [rendered[i] for i in order[start : start + batch_size]]
            inputs, targets, real = _collate(rows, artifact.pad_id)
            step += 1
            lr = lr_at(sched, step)
            _set_lr(optimizer, lr)
            logits = model(inputs)
            loss = cross_entropy_loss(logits, targets)
            loss_value = float(loss.item())
            if not math.isfinite(loss_value):
                raise ValueError(f"non-finite fine-tuning loss at step {step}")
            optimizer.zero_grad()
            loss.backward()
            torch.nn.utils.clip_grad_norm_(model.parameters(), 1.0)
            optimizer.step()
            tokens_consumed += real
            trace.append(step, loss_value, lr, tokens_consumed)

    tuned = Checkpoint.from_model(
        model,
        step=step,
        cutoff_year=base.cutoff_year,
        tokenizer_fingerprint=base.tokenizer_fingerprint,
        stage="instruct",
    )
    if out_path is not None:
        save_checkpoint(tuned, out_path)
    return tuned, trace
