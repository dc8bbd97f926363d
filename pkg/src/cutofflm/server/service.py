"""Chat and comparison services over the model registry.

Every response is replayable: requests without a seed get a server-drawn
seed that is echoed back. Comparison runs each model with the same seed and
is byte-equivalent to the corresponding standalone chat calls; one model's
failure is isolated to its own result slot.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Sequence

from .. import tokenizer as tok
from ..chat import render_chat
from ..model.generate import GenerationParams, generate
from .registry import ModelRegistry, UnknownModelError


@dataclass(frozen=True)
class ChatResult:
    model_id: str
    text: str
    seed: int
    finish_reason: str
    prompt_tokens: int
    completion_tokens: int


def _draw_seed() -> int:
    return random.randrange(2**31)


def chat_completion(
    registry: ModelRegistry,
    model_id: str,
    messages: Sequence[tuple[str, str]],
    temperature: float = 0.8,
    top_k: int = 50,
    max_tokens: int = 128,
    seed: int | None = None,
) -> ChatResult:
    """Render the conversation through the chat template and generate a reply.

    Raises UnknownModelError for unregistered ids and ValueError for invalid
    conversations or prompts that overflow the context window (no silent
    truncation).
    """
    entry = registry.get(model_id)
    artifact = registry.artifact
    prompt_ids, _mask = render_chat(artifact, messages, add_generation_prompt=True)
    used_seed = _draw_seed() if seed is None else seed
    params = GenerationParams(
        temperature=temperature,
        top_k=top_k,
        max_new_tokens=max_tokens,
        seed=used_seed,
        stop_ids=frozenset({artifact.end_of_turn_id, artifact.end_of_text_id}),
    )
    new_ids, finish_reason = generate(entry.model, prompt_ids, params)
    return ChatResult(
        model_id=model_id,
        text=tok.decode_text(artifact, new_ids, skip_specials=True),
        seed=used_seed,
        finish_reason=finish_reason,
        prompt_tokens=len(prompt_ids),
        completion_tokens=len(new_ids),
    )


def compare(
    registry: ModelRegistry,
    model_ids: Sequence[str],
    messages: Sequence[tuple[str, str]],
    temperature: float = 0.8,
    top_k: int = 50,
    max_tokens: int = 128,
    seed: int | None = None,
) -> list[ChatResult | dict]:
    """Run the same conversation against several models with a shared seed.

    Validation is fail-fast: duplicate or unknown ids reject the whole
    request before any generation. After validation, a per-model failure
    yields an error record in that model's slot without voiding the others.
    """
    if len(model_ids) < 2:
        raise ValueError("compare needs at least two model ids")
    if len(set(model_ids)) != len(model_ids):
        raise ValueError("compare model ids must be distinct")
    missing = [m for m in model_ids if m not in registry]
    if missing:
        raise UnknownModelError(", ".join(missing))

    used_seed = _draw_seed() if seed is None else seed
    results: list[ChatResult | dict] = []
    for model_id in model_ids:
        try:
            results.append(
                chat_completion(
                    registry,
                    model_id,
                    messages,
                    temperature=temperature,
                    top_k=top_k,
                    max_tokens=max_tokens,
                    seed=used_seed,
                )
            )
        except Exception as exc:  # isolate the failing slot
            results.append(
                {
                    "model": model_id,
                    "error": {"code": "generation_failed", "message": str(exc)},
                }
            )
    return results
