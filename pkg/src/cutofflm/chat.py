"""Chat template shared by fine-tuning, evaluation, and serving.

A conversation renders to: ``<|role|>`` marker, the encoded turn text, then
``<|endofturn|>``, for each message in order. Only assistant turns carry
training loss (their text and end-of-turn token); role markers and all
non-assistant content are masked out.
"""

from __future__ import annotations

from typing import Iterable, Sequence

from . import tokenizer as tok

ROLES = ("system", "user", "assistant")


def validate_messages(messages: Sequence[tuple[str, str]]) -> None:
    """Enforce: non-empty, optional leading system, then user/assistant alternation."""
    if not messages:
        raise ValueError("conversation has no messages")
    for role, text in messages:
        if role not in ROLES:
            raise ValueError(f"unknown role {role!r}")
        if not isinstance(text, str):
            raise ValueError(f"message text for role {role!r} is not a string")
    body = list(messages)
    if body[0][0] == "system":
        body = body[1:]
    if any(role == "system" for role, _ in body):
        raise ValueError("system message allowed only at the start")
    expected = "user"
    for role, _ in body:
        if role != expected:
            raise ValueError(f"roles must alternate user/assistant; expected {expected}, got {role}")
        expected = "assistant" if expected == "user" else "user"


def render_chat(
    artifact: tok.TokenizerArtifact,
    messages: Sequence[tuple[str, str]],
    add_generation_prompt: bool = False,
) -> tuple[list[int], list[bool]]:
    """Render a conversation to token ids and an assistant-token loss mask."""
    validate_messages(messages)
    ids: list[int] = []
    mask: list[bool] = []
    for role, text in messages:
        ids.append(artifact.role_id(role))
        mask.append(False)
        body = tok.encode(artifact, text)
        body.append(artifact.end_of_turn_id)
        ids.extend(body)
        mask.extend([role == "assistant"] * len(body))
    if add_generation_prompt:
        ids.append(artifact.role_id("assistant"))
        mask.append(False)
    return ids, mask


def messages_from_dicts(raw: Iterable[dict]) -> list[tuple[str, str]]:
    return [(m["role"], m["text"]) for m in raw]
