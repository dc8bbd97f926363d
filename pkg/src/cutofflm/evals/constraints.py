"""Verifiable instruction-following constraints with prompt-level strict scoring.

A response passes an item only if every constraint passes. Supported
families are all deterministic: word-count bounds, required keyword,
forbidden substring, exact line count.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .. import tokenizer as tok
from ..chat import render_chat
from ..model.generate import GenerationParams, generate
from ..model.transformer import DecoderLM

CONSTRAINT_TYPES = ("max_words", "min_words", "contains", "forbidden", "line_count")


@dataclass(frozen=True)
class ConstraintItem:
    prompt: str
    constraints: tuple[dict, ...]
    item_id: str = ""

    def __post_init__(self) -> None:
        if not self.constraints:
            raise ValueError(f"item {self.item_id!r} has no constraints")
        for c in self.constraints:
            kind = c.get("type")
            if kind not in CONSTRAINT_TYPES:
                raise ValueError(f"unknown constraint type {kind!r}")
            if kind in ("max_words", "min_words", "line_count") and "n" not in c:
                raise ValueError(f"constraint {kind} needs field 'n'")
            if kind in ("contains", "forbidden") and not c.get("text"):
                raise ValueError(f"constraint {kind} needs non-empty field 'text'")


@dataclass(frozen=True)
class ConstraintVerdict:
    constraint: dict
    passed: bool
    detail: str


def _check_one(response: str, constraint: dict) -> ConstraintVerdict:
    kind = constraint["type"]
    if kind == "max_words":
        words = len(response.split())
        return ConstraintVerdict(constraint, words <= constraint["n"], f"{words} words")
    if kind == "min_words":
        words = len(response.split())
        return ConstraintVerdict(constraint, words >= constraint["n"], f"{words} words")
    if kind == "contains":
        hit = constraint["text"] in response
        return ConstraintVerdict(constraint, hit, "found" if hit else "missing")
    if kind == "forbidden":
        hit = constraint["text"] in response
        return ConstraintVerdict(constraint, not hit, "present" if hit else "absent")
    lines = len(response.splitlines())
    return ConstraintVerdict(constraint, lines == constraint["n"], f"{lines} lines")


def check_instruction(response: str, item: ConstraintItem) -> tuple[bool, list[ConstraintVerdict]]:
    """Strict conjunction: pass iff every constraint passes."""
    verdicts = [_check_one(response, c) for c in item.constraints]
    return all(v.passed for v in verdicts), verdicts


def run_instruction_task(
    model: DecoderLM,
    artifact: tok.TokenizerArtifact,
    items: Sequence[ConstraintItem],
    params: GenerationParams | None = None,
) -> tuple[float, list[dict]]:
    """Generate a response per prompt through the chat template; strict accuracy."""
    if not items:
        raise ValueError("task has no items")
    if params is None:
        params = GenerationParams(
            temperature=0.0,
            max_new_tokens=96,
            stop_ids=frozenset({artifact.end_of_turn_id, artifact.end_of_text_id}),
        )
    records = []
    passed_count = 0
    for index, item in enumerate(items):
        ids, _mask = render_chat(artifact, [("user", item.prompt)], add_generation_prompt=True)
        new_ids, finish = generate(model, ids, params)
        response = tok.decode_text(artifact, new_ids, skip_specials=True)
        passed, verdicts = check_instruction(response, item)
        passed_count += passed
        records.append(
            {
                "index": index,
                "id": item.item_id,
                "response": response,
                "finish_reason": finish,
                "passed": passed,
                "verdicts": [
                    {"type": v.constraint["type"], "passed": v.passed, "detail": v.detail}
                    for v in verdicts
                ],
            }
        )
    return passed_count / len(items), records


def load_constraint_task(path: str | Path) -> list[ConstraintItem]:
    items = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            record = json.loads(line)
            items.append(
                ConstraintItem(
                    prompt=record["prompt"],
                    constraints=tuple(record["constraints"]),
                    item_id=record.get("id", f"item-{line_no}"),
                )
            )
    if not items:
        raise ValueError(f"{path} holds no items")
    return items
