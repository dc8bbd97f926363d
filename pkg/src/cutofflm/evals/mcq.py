"""Multiple-choice scoring by continuation log-likelihood.

Each choice is scored as the sum of token log-likelihoods of the choice
continuation conditioned on the assembled prompt (k exemplars plus the
question). Per-token normalization divides by the continuation's token
count; raw-sum mode is retained for oracle tests. Exact ties (within 1e-9)
resolve to the lowest choice index.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import torch
import torch.nn.functional as F

from .. import tokenizer as tok
from ..model.transformer import DecoderLM

TIE_EPS = 1e-9


@dataclass(frozen=True)
class McqItem:
    question: str
    choices: tuple[str, ...]
    gold: int
    exemplars: tuple[tuple[str, str], ...] = ()
    item_id: str = ""

    def __post_init__(self) -> None:
        if len(self.choices) < 2:
            raise ValueError(f"item {self.item_id!r} needs at least two choices")
        if not 0 <= self.gold < len(self.choices):
            raise ValueError(f"item {self.item_id!r} gold index {self.gold} out of range")


@dataclass
class McqScore:
    chosen: int
    scores: list[float]  # after normalization
    raw_sums: list[float]
    token_counts: list[int]


def assemble_prompt(item: McqItem, shots: int, seed: int = 0) -> str:
    """Deterministic k-shot prompt: seeded exemplar subset in original order."""
    exemplars = list(item.exemplars)
    if shots < len(exemplars):
        rng = np.random.default_rng(seed)
        picked = sorted(rng.permutation(len(exemplars))[:shots])
        exemplars = [exemplars[i] for i in picked]
    parts = [f"Question: {q}\nAnswer: {a}\n\n" for q, a in exemplars]
    parts.append(f"Question: {item.question}\nAnswer:")
    return "".join(parts)


def _continuation_logprobs(
    model: DecoderLM,
    context_ids: list[int],
    continuation_ids: list[int],
    item_id: str,
) -> list[float]:
    total = len(context_ids) + len(continuation_ids)
    if total > model.config.sequence_length:
        raise ValueError(
            f"item {item_id!r}: prompt+choice spans {total} tokens, context window is "
            f"{model.config.sequence_length}"
        )
    ids = context_ids + continuation_ids
    with torch.no_grad():
        logits = model(torch.tensor([ids[:-1]], dtype=torch.long))[0]
    logp = F.log_softmax(logits.double(), dim=-1)
    out = []
    for offset, token in enumerate(continuation_ids):
        position = len(context_ids) - 1 + offset
        out.append(float(logp[position, token].item()))
    return out


def score_mcq(
    model: DecoderLM,
    artifact: tok.TokenizerArtifact,
    item: McqItem,
    normalization: str = "per_token",
    shots: int = 0,
    seed: int = 0,
) -> McqScore:
    if normalization not in ("none", "per_token"):
        raise ValueError(f"unknown normalization {normalization!r}")
    model.eval()
    prompt = assemble_prompt(item, shots, seed)
    context_ids = tok.encode(artifact, prompt)
    raw_sums: list[float] = []
    token_counts: list[int] = []
    for choice in item.choices:
        continuation_ids = tok.encode(artifact, " " + choice)
        if not continuation_ids:
            raise ValueError(f"item {item.item_id!r}: empty choice continuation")
        logprobs = _continuation_logprobs(model, context_ids, continuation_ids, item.item_id)
        raw_sums.append(sum(logprobs))
        token_counts.append(len(continuation_ids))
    if normalization == "per_token":
        scores = [s / n for s, n in zip(raw_sums, token_counts)]
    else:
        scores = list(raw_sums)
    chosen = 0
    for index in range(1, len(scores)):
        if scores[index] > scores[chosen] + TIE_EPS:
            chosen = index
    return McqScore(chosen=chosen, scores=scores, raw_sums=raw_sums, token_counts=token_counts)


@dataclass
class TaskResult:
    accuracy: float
    records: list[dict] = field(default_factory=list)

    @property
    def error_count(self) -> int:
        return sum(1 for r in self.records if r.get("error"))


def run_task(
    model: DecoderLM,
    artifact: tok.TokenizerArtifact,
    items: Sequence[McqItem],
    normalization: str = "per_token",
    shots: int = 0,
    seed: int = 0,
) -> TaskResult:
    """Macro accuracy over items; item-level errors score as incorrect and are flagged."""
    if not items:
        raise ValueError("task has no items")
    records: list[dict] = []
    correct = 0
    for index, item in enumerate(items):
        record: dict = {"index": index, "id": item.item_id, "gold": item.gold}
        try:
            score = score_mcq(model, artifact, item, normalization, shots, seed)
        except ValueError as exc:
            record["error"] = str(exc)
            record["correct"] = False
            records.append(record)
            continue
        record["chosen"] = score.chosen
        record["scores"] = score.scores
        record["correct"] = score.chosen == item.gold
        correct += record["correct"]
        records.append(record)
    return TaskResult(accuracy=correct / len(items), records=records)


def load_mcq_task(path: str | Path) -> list[McqItem]:
    items = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            record = json.loads(line)
            items.append(
                McqItem(
                    question=record["question"],
                    choices=tuple(record["choices"]),
                    gold=record["gold"],
                    exemplars=tuple(
                        (e["question"], e["answer"]) for e in record.get("exemplars", [])
                    ),
                    item_id=record.get("id", f"item-{line_no}"),
                )
            )
    if not items:
        raise ValueError(f"{path} holds no items")
    return items
