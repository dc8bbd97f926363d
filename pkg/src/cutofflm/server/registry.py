"""Registry of loaded dated models, keyed by model id.

Parameters are immutable once loaded and shared across request threads.
Registration is serialized; listing takes an atomic snapshot, so readers
never observe a partially registered entry.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from pathlib import Path

from .. import tokenizer as tok
from ..model.transformer import DecoderLM
from ..training.checkpoint import load_checkpoint


class UnknownModelError(KeyError):
    pass


@dataclass
class ModelRegistryEntry:
    model_id: str
    cutoff_year: int
    stage: str
    checkpoint_path: str
    tokenizer_fingerprint: str
    model: DecoderLM


class ModelRegistry:
    def __init__(self, artifact: tok.TokenizerArtifact):
        self.artifact = artifact
        self._entries: dict[str, ModelRegistryEntry] = {}
        self._snapshot_lock = threading.Lock()
        self._register_lock = threading.Lock()

    def register(self, model_id: str, checkpoint_path: str | Path) -> ModelRegistryEntry:
        """Load a checkpoint and expose it; duplicate ids and metadata mismatches refuse."""
        with self._register_lock:
            with self._snapshot_lock:
                if model_id in self._entries:
                    raise ValueError(f"model id {model_id!r} already registered")
            checkpoint = load_checkpoint(checkpoint_path)
            if checkpoint.tokenizer_fingerprint != self.artifact.fingerprint:
                raise ValueError(
                    f"checkpoint {checkpoint_path} was trained with a different tokenizer "
                    f"({checkpoint.tokenizer_fingerprint[:12]}… vs {self.artifact.fingerprint[:12]}…)"
                )
            entry = ModelRegistryEntry(
                model_id=model_id,
                cutoff_year=checkpoint.cutoff_year,
                stage=checkpoint.stage,
                checkpoint_path=str(checkpoint_path),
                tokenizer_fingerprint=checkpoint.tokenizer_fingerprint,
                model=checkpoint.build_model(),
            )
            with self._snapshot_lock:
                self._entries[model_id] = entry
            return entry

    def get(self, model_id: str) -> ModelRegistryEntry:
        with self._snapshot_lock:
            entry = self._entries.get(model_id)
        if entry is None:
            raise UnknownModelError(model_id)
        return entry

    def __contains__(self, model_id: str) -> bool:
        with self._snapshot_lock:
            return model_id in self._entries

    def list_entries(self) -> list[ModelRegistryEntry]:
        """Entries sorted by cutoff year (then id); a consistent snapshot."""
        with self._snapshot_lock:
            entries = list(self._entries.values())
        return sorted(entries, key=lambda e: (e.cutoff_year, e.model_id))

    @classmethod
    def from_registry_file(cls, path: str | Path) -> "ModelRegistry":
        """Registry file: {"tokenizer": <path>, "models": [{"id", "checkpoint"}, ...]}."""
        base = Path(path).parent
        with open(path, "r", encoding="utf-8") as fh:
            spec = json.load(fh)
        artifact = tok.load(_resolve(base, spec["tokenizer"]))
        registry = cls(artifact)
        for model in spec["models"]:
            registry.register(model["id"], _resolve(base, model["checkpoint"]))
        return registry


def _resolve(base: Path, p: str) -> Path:
    path = Path(p)
    return path if path.is_absolute() else base / path
