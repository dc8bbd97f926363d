"""Pretraining loop over verified token shards.

Determinism contract: for a fixed seed the run is bit-reproducible — model
init, batch offsets, and optimizer state all derive from the seed and CPU
ops are deterministic. A non-finite loss aborts immediately (it indicates a
bug at desk scale), retaining the last good checkpoint.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .. import tokenizer as tok
from ..corpus.shards import ShardSet, load_token_stream
from ..errors import LeakageError
from ..model.config import ModelConfig
from ..model.transformer import DecoderLM, cross_entropy_loss
from .checkpoint import Checkpoint, save_checkpoint
from .schedule import TrainSchedule, lr_at


@dataclass
class LossTrace:
    entries: list[dict] = field(default_factory=list)

    def append(self, step: int, loss: float, lr: float, tokens_consumed: int) -> None:
        if self.entries and step <= self.entries[-1]["step"]:
            raise ValueError("trace steps must be strictly increasing")
        if not math.isfinite(loss):
            raise ValueError(f"non-finite loss {loss} at step {step}")
        self.entries.append(
            {"step": step, "loss": loss, "lr": lr, "tokens_consumed": tokens_consumed}
        )

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for entry in self.entries:
                fh.write(json.dumps(entry) + "\n")

    @property
    def losses(self) -> list[float]:
        return [e["loss"] for e in self.entries]


class TrainingDivergedError(Exception):
    """Loss went NaN/Inf; carries the last good checkpoint and partial trace."""

    def __init__(self, message: str, last_checkpoint: Checkpoint, trace: LossTrace):
        super().__init__(message)
        self.last_checkpoint = last_checkpoint
        self.trace = trace


def make_optimizer(model: DecoderLM, lr: float) -> torch.optim.AdamW:
    """Adam with betas (0.9, 0.95); weight decay 0.1 on matrices only."""
    decay = [p for p in model.parameters() if p.dim() >= 2]
    no_decay = [p for p in model.parameters() if p.dim() < 2]
    return torch.optim.AdamW(
        [
            {"params": decay, "weight_decay": 0.1},
            {"params": no_decay, "weight_decay": 0.0},
        ],
        lr=lr,
        betas=(0.9, 0.95),
    )


def _set_lr(optimizer: torch.optim.Optimizer, lr: float) -> None:
    for group in optimizer.param_groups:
        group["lr"] = lr


def pretrain(
    config: ModelConfig,
    shard_set: ShardSet,
    artifact: tok.TokenizerArtifact,
    schedule: TrainSchedule,
    seed: int,
    out_dir: str | Path | None = None,
    checkpoint_interval: int | None = None,
) -> tuple[list[Checkpoint], LossTrace]:
    """Train from scratch on a shard set; returns (checkpoint series, trace).

    Refuses to start on tokenizer/manifest mismatches and on tokenizer
    leakage (a tokenizer trained past the shards' cutoff). The final series
    entry is always the end-of-run base checkpoint, which for a zero-step
    schedule equals the seeded initialization.
    """
    manifest = shard_set.manifest
    if artifact.fingerprint != manifest.tokenizer_fingerprint:
        raise ValueError("tokenizer fingerprint does not match the shard manifest; refusing to start")
    if config.vocab_size < artifact.vocab_len:
        raise ValueError(
            f"config vocab_size {config.vocab_size} < tokenizer vocabulary {artifact.vocab_len}"
        )
    if artifact.trained_on_cutoff > manifest.cutoff_year:
        raise LeakageError(
            f"tokenizer trained on cutoff {artifact.trained_on_cutoff} data but shards are "
            f"cutoff {manifest.cutoff_year}"
        )

    stream = load_token_stream(shard_set).astype(np.int64)
    seq_len = config.sequence_length
    if schedule.total_steps > 0 and len(stream) < seq_len + 1:
        raise ValueError(
            f"token stream of {len(stream)} tokens is shorter than one window ({seq_len + 1})"
        )

    torch.manual_seed(seed)
    model = DecoderLM(config, init_seed=seed)
    model.train()
    optimizer = make_optimizer(model, schedule.peak_lr)
    rng = np.random.default_rng(seed)

    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    trace = LossTrace()
    checkpoints: list[Checkpoint] = []
    tokens_consumed = 0
    batch = schedule.batch_size_sequences

    def snapshot(step: int) -> Checkpoint:
        return Checkpoint.from_model(
            model,
            step=step,
            cutoff_year=manifest.cutoff_year,
            tokenizer_fingerprint=artifact.fingerprint,
            stage="base",
        )

    last_good = snapshot(0)
    for step in range(schedule.total_steps):
        lr = lr_at(schedule, step + 1)
        _set_lr(optimizer, lr)
        offsets = rng.integers(0, len(stream) - seq_len, size=batch)
        windows = np.stack([stream[o : o + seq_len + 1] for o in offsets])
        tokens = torch.from_numpy(windows)
        logits = model(tokens[:, :-1])
        loss = cross_entropy_loss(logits, tokens[:, 1:])
        loss_value = float(loss.item())
        if not math.isfinite(loss_value):
            raise TrainingDivergedError(
                f"non-finite loss at step {step + 1}; last good checkpoint at step "
                f"{last_good.step}",
                last_checkpoint=last_good,
                trace=trace,
            )
        optimizer.zero_grad()
        loss.backward()
        torch.nn.utils.clip_grad_norm_(model.parameters(), 1.0)
        optimizer.step()
        tokens_consumed += batch * seq_len
        trace.append(step + 1, loss_value, lr, tokens_consumed)
        if checkpoint_interval and (step + 1) % checkpoint_interval == 0:
            ckpt = snapshot(step + 1)
            checkpoints.append(ckpt)
            last_good = ckpt
            if out is not None:
                save_checkpoint(ckpt, out / f"step-{step + 1:07d}.pt")

    final = snapshot(schedule.total_steps)
    checkpoints.append(final)
    if out is not None:
        save_checkpoint(final, out / "base.pt")
        trace.save(out / "trace.jsonl")
    return checkpoints, trace
