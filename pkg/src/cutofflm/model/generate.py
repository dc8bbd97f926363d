"""Deterministic seeded sampling from a trained model.

The sampler consumes exactly one uniform draw from a PCG64 stream per
emitted token, so any generation is replayable from (params, prompt,
sampling settings). Temperature zero and top-k 1 both reduce to argmax
with lowest-id tie-breaking and consume no randomness.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from .transformer import DecoderLM


@dataclass(frozen=True)
class GenerationParams:
    temperature: float = 0.8
    top_k: int = 50
    max_new_tokens: int = 64
    seed: int = 0
    stop_ids: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_new_tokens < 0:
            raise ValueError("max_new_tokens must be >= 0")


def sample_token(logits: np.ndarray, temperature: float, top_k: int, rng: np.random.Generator) -> int:
    """One sampling step on a float64 logit row."""
    n = logits.shape[0]
    if temperature == 0.0 or top_k == 1:
        return int(np.argmax(logits))  # first max = lowest id
    scaled = logits / temperature
    k = n if top_k <= 0 else min(top_k, n)
    order = np.lexsort((np.arange(n), -scaled))[:k]
    sel = scaled[order]
    sel = sel - sel.max()
    probs = np.exp(sel)
    probs /= probs.sum()
    cum = np.cumsum(probs)
    u = rng.random()
    idx = int(np.searchsorted(cum, u, side="right"))
    return int(order[min(idx, k - 1)])


def generate(
    model: DecoderLM,
    prompt_ids: list[int],
    params: GenerationParams,
) -> tuple[list[int], str]:
    """Autoregressively extend ``prompt_ids``.

    Returns (new token ids, finish reason). The stop token, when hit, is
    included in the returned ids and the finish reason is "stop"; otherwise
    generation ends at max_new_tokens or at the context limit with reason
    "length". A prompt longer than the context window is an error, never a
    silent truncation.
    """
    if not prompt_ids:
        raise ValueError("prompt must be non-empty")
    limit = model.config.sequence_length
    if len(prompt_ids) > limit:
        raise ValueError(f"prompt length {len(prompt_ids)} exceeds context window {limit}")

    rng = np.random.default_rng(params.seed)
    ids = list(prompt_ids)
    new_ids: list[int] = []
    model.eval()
    with torch.no_grad():
        while len(new_ids) < params.max_new_tokens and len(ids) < limit:
            tokens = torch.tensor([ids], dtype=torch.long)
            logits = model(tokens)[0, -1].double().cpu().numpy()
            next_id = sample_token(logits, params.temperature, params.top_k, rng)
            ids.append(next_id)
            new_ids.append(next_id)
            if next_id in params.stop_ids:
                return new_ids, "stop"
    return new_ids, "length"
