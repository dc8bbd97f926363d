"""Checkpoint serialization with exact round-trip guarantees."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import torch

from ..errors import CheckpointError
from ..model.config import ModelConfig
from ..model.transformer import DecoderLM

FORMAT_VERSION = 1
STAGES = ("base", "instruct")


@dataclass
class Checkpoint:
    """Trained parameters stamped with their data-cutoff provenance."""

    config: ModelConfig
    state: dict[str, torch.Tensor]
    step: int
    cutoff_year: int
    tokenizer_fingerprint: str
    stage: str
    optimizer_state: dict | None = None
    optimizer_state_dropped: bool = field(default=False, compare=False)

    def __post_init__(self) -> None:
        if self.stage not in STAGES:
            raise ValueError(f"stage must be one of {STAGES}, got {self.stage!r}")

    def build_model(self) -> DecoderLM:
        model = DecoderLM(self.config, init_seed=None)
        model.load_state_dict(self.state)
        model.eval()
        return model

    def parameters_digest(self) -> str:
        import hashlib

        h = hashlib.sha256()
        for name in sorted(self.state):
            h.update(name.encode())
            h.update(self.state[name].numpy().tobytes())
        return h.hexdigest()

    @classmethod
    def from_model(
        cls,
        model: DecoderLM,
        step: int,
        cutoff_year: int,
        tokenizer_fingerprint: str,
        stage: str,
        optimizer: torch.optim.Optimizer | None = None,
    ) -> "Checkpoint":
        state = {name: tensor.detach().clone() for name, tensor in model.state_dict().items()}
        return cls(
            config=model.config,
            state=state,
            step=step,
            cutoff_year=cutoff_year,
            tokenizer_fingerprint=tokenizer_fingerprint,
            stage=stage,
            optimizer_state=optimizer.state_dict() if optimizer is not None else None,
        )


def save_checkpoint(checkpoint: Checkpoint, path: str | Path) -> None:
    payload = {
        "format_version": FORMAT_VERSION,
        "config": checkpoint.config.to_dict(),
        "state": checkpoint.state,
        "step": checkpoint.step,
        "cutoff_year": checkpoint.cutoff_year,
        "tokenizer_fingerprint": checkpoint.tokenizer_fingerprint,
        "stage": checkpoint.stage,
        "optimizer_state": checkpoint.optimizer_state,
    }
    torch.save(payload, path)


def load_checkpoint(path: str | Path, include_optimizer: bool = True) -> Checkpoint:
    """Load a checkpoint; corrupt or truncated files never yield a partial result."""
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as exc:
        raise CheckpointError(f"cannot load checkpoint {path}: {exc}") from exc
    if not isinstance(payload, dict) or "format_version" not in payload:
        raise CheckpointError(f"{path} is not a checkpoint file")
    version = payload["format_version"]
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"checkpoint format version {version}, this build reads version {FORMAT_VERSION}"
        )
    optimizer_state = payload.get("optimizer_state")
    dropped = False
    if not include_optimizer and optimizer_state is not None:
        warnings.warn("optimizer state present in checkpoint but not loaded", stacklevel=2)
        optimizer_state = None
        dropped = True
    return Checkpoint(
        config=ModelConfig.from_dict(payload["config"]),
        state=payload["state"],
        step=payload["step"],
        cutoff_year=payload["cutoff_year"],
        tokenizer_fingerprint=payload["tokenizer_fingerprint"],
        stage=payload["stage"],
        optimizer_state=optimizer_state,
        optimizer_state_dropped=dropped,
    )
