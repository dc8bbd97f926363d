"""Time-sensitivity classification and dataset filtering.

Two interchangeable classifiers: a deterministic rule-based one (year
patterns plus a dated-entity lexicon) and an external chat-endpoint one
that asks for a single-word verdict at temperature zero. Either way an
example is kept only when classified as general.
"""

from __future__ import annotations

import re
import warnings
from typing import Callable, Iterable, Protocol

from ..endpoint import ChatEndpointClient, EndpointError
from .types import InstructionExample, RemovalReport

GENERAL = "general"
TIME_SENSITIVE = "time_sensitive"
UNKNOWN = "unknown"


class Classifier(Protocol):
    def __call__(self, example: InstructionExample) -> str: ...


# Calendar years 1900-2099 and common dated-entity phrasings. The lexicon is
# deliberately high-precision: it must flag queries that presuppose knowledge
# released at a specific point in time, not general references to time itself.
_TEMPORAL_PATTERNS = [
    r"\b(19|20)\d{2}\b",
    r"\bepisode\s+\d+\b",
    r"\bseason\s+\d+\b",
    r"\b(latest|newest|most recent|upcoming)\b",
    r"\b(this|last|next)\s+(year|month|week|quarter)\b",
    r"\btoday'?s?\b",
    r"\byesterday\b",
    r"\bcurrent\s+(president|prime minister|champion|price|events?)\b",
    r"\b(world cup|olympics|super bowl|grammy|oscars?)\b",
    r"\b(covid|pandemic|lockdown)\b",
    r"\bstock (price|return)s?\b",
    r"\belection (result|winner|outcome)s?\b",
    r"\bbox office\b",
    r"\brecently (released|announced|launched)\b",
]
_TEMPORAL_RE = re.compile("|".join(_TEMPORAL_PATTERNS), re.IGNORECASE)


class RuleBasedClassifier:
    """Pure function of the example text; deterministic by construction."""

    def __call__(self, example: InstructionExample) -> str:
        return TIME_SENSITIVE if _TEMPORAL_RE.search(example.all_text()) else GENERAL


_CLASSIFY_SYSTEM = (
    "You label instruction-tuning examples. Answer with exactly one word: "
    "TIME_SENSITIVE if the example presupposes knowledge tied to a specific "
    "point in time (dated events, releases, prices, office holders), or "
    "GENERAL if it does not."
)

_CLASSIFY_SHOTS = [
    ("Please replicate the script of episode 3 of season 2 of that TV show.", "TIME_SENSITIVE"),
    ("Explain what a binary search does.", "GENERAL"),
    ("Who won the most recent championship final?", "TIME_SENSITIVE"),
]


class EndpointClassifier:
    """Chat-endpoint classifier with a fixed prompt and strict verdict parsing.

    Transport failures propagate as EndpointError (retryable inside the
    client); a verdict that stays unparseable after retries marks the example
    unknown, with a warning.
    """

    def __init__(self, client: ChatEndpointClient, parse_retries: int = 1):
        self.client = client
        self.parse_retries = parse_retries

    def _messages(self, example: InstructionExample) -> list[dict]:
        messages = [{"role": "system", "content": _CLASSIFY_SYSTEM}]
        for text, verdict in _CLASSIFY_SHOTS:
            messages.append({"role": "user", "content": text})
            messages.append({"role": "assistant", "content": verdict})
        messages.append({"role": "user", "content": example.all_text()})
        return messages

    def __call__(self, example: InstructionExample) -> str:
        for _ in range(self.parse_retries + 1):
            reply = self.client.complete(self._messages(example), temperature=0.0)
            verdict = reply.strip().upper().rstrip(".")
            if verdict == "TIME_SENSITIVE":
                return TIME_SENSITIVE
            if verdict == "GENERAL":
                return GENERAL
        warnings.warn(f"unparseable classifier verdict {reply!r}; marking unknown", stacklevel=2)
        return UNKNOWN


def classify_time_sensitivity(example: InstructionExample, classifier: Classifier) -> str:
    return classifier(example)


def filter_dataset(
    dataset: list[InstructionExample],
    classifier: Classifier,
    dataset_name: str = "dataset",
) -> tuple[list[InstructionExample], list[InstructionExample], RemovalReport]:
    """Partition a dataset into (kept generals, removed) with exact accounting.

    Unknown-verdict examples are excluded from training, i.e. counted as
    removed. Classifier errors abort with a partial-progress report attached.
    """
    if not dataset:
        raise ValueError("dataset is empty")
    kept: list[InstructionExample] = []
    removed: list[InstructionExample] = []
    for index, example in enumerate(dataset):
        try:
            label = classifier(example)
        except EndpointError as exc:
            partial = RemovalReport(dataset=dataset_name, before=index or 1, after=len(kept))
            raise EndpointError(
                f"classifier failed at example {index}/{len(dataset)} "
                f"(kept {partial.after} so far): {exc}"
            ) from exc
        if label == GENERAL:
            kept.append(example.with_sensitivity(GENERAL))
        else:
            removed.append(example.with_sensitivity(label))
    report = RemovalReport(dataset=dataset_name, before=len(dataset), after=len(kept))
    return kept, removed, report
