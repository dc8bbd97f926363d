"""Instruction-data record types and their line-delimited file formats."""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from ..chat import validate_messages

SENSITIVITIES = ("general", "time_sensitive", "unknown")
FINANCE_KINDS = ("headline_return", "transcript_capex")


@dataclass(frozen=True)
class InstructionExample:
    """One chat-format training example with a sensitivity label."""

    messages: tuple[tuple[str, str], ...]
    source: str = ""
    timestamp: dt.date | None = None
    sensitivity: str = "unknown"

    def __post_init__(self) -> None:
        validate_messages(self.messages)
        roles = [role for role, _ in self.messages]
        if "user" not in roles or "assistant" not in roles:
            raise ValueError("example needs at least one user and one assistant turn")
        if self.sensitivity not in SENSITIVITIES:
            raise ValueError(f"sensitivity must be one of {SENSITIVITIES}")

    def with_sensitivity(self, sensitivity: str) -> "InstructionExample":
        from dataclasses import replace

        return replace(self, sensitivity=sensitivity)

    def all_text(self) -> str:
        return "\n".join(text for _, text in self.messages)

    def to_json(self) -> dict:
        return {
            "messages": [{"role": role, "text": text} for role, text in self.messages],
            "source": self.source,
            "timestamp": self.timestamp.isoformat() if self.timestamp else None,
            "sensitivity": self.sensitivity,
        }

    @classmethod
    def from_json(cls, record: dict) -> "InstructionExample":
        ts = record.get("timestamp")
        return cls(
            messages=tuple((m["role"], m["text"]) for m in record["messages"]),
            source=record.get("source", ""),
            timestamp=dt.date.fromisoformat(ts) if ts else None,
            sensitivity=record.get("sensitivity", "unknown"),
        )


@dataclass(frozen=True)
class RemovalReport:
    """Before/after counts for one dataset's time-sensitivity filtering."""

    dataset: str
    before: int
    after: int

    def __post_init__(self) -> None:
        if self.before < 1:
            raise ValueError("report requires a non-empty dataset")
        if not 0 <= self.after <= self.before:
            raise ValueError("after count must lie in [0, before]")

    @property
    def removal_rate(self) -> float:
        return (self.before - self.after) / self.before

    @property
    def removal_rate_percent(self) -> str:
        return f"{self.removal_rate * 100:.2f}%"

    def to_json(self) -> dict:
        return {
            "dataset": self.dataset,
            "before": self.before,
            "after": self.after,
            "removal_rate": self.removal_rate_percent,
        }


@dataclass(frozen=True)
class FinancePromptRecord:
    """Raw finance context (headline or transcript excerpt) anchored to a date."""

    kind: str
    context: str
    entity: str
    as_of: dt.date

    def __post_init__(self) -> None:
        if self.kind not in FINANCE_KINDS:
            raise ValueError(f"kind must be one of {FINANCE_KINDS}")
        if not self.context.strip():
            raise ValueError("empty context")

    @property
    def month(self) -> int:
        return self.as_of.month

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "context": self.context,
            "entity": self.entity,
            "as_of": self.as_of.isoformat(),
        }

    @classmethod
    def from_json(cls, record: dict) -> "FinancePromptRecord":
        return cls(
            kind=record["kind"],
            context=record["context"],
            entity=record.get("entity", ""),
            as_of=dt.date.fromisoformat(record["as_of"]),
        )


def save_examples(examples: Iterable[InstructionExample], path: str | Path) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(json.dumps(ex.to_json(), ensure_ascii=False) + "\n")
            count += 1
    return count


def load_examples(path: str | Path) -> list[InstructionExample]:
    examples = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                examples.append(InstructionExample.from_json(json.loads(line)))
    return examples


def load_finance_records(path: str | Path) -> list[FinancePromptRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(FinancePromptRecord.from_json(json.loads(line)))
    return records


MIX_HEADER_KIND = "instruction_mix"


def save_mix(
    examples: list[InstructionExample],
    cutoff_year: int,
    seed: int,
    path: str | Path,
) -> None:
    """Mix file: a header line with the declared cutoff, then example records."""
    counts: dict[str, int] = {}
    for ex in examples:
        counts[ex.source] = counts.get(ex.source, 0) + 1
    header = {
        "kind": MIX_HEADER_KIND,
        "cutoff_year": cutoff_year,
        "seed": seed,
        "examples": len(examples),
        "sources": counts,
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for ex in examples:
            fh.write(json.dumps(ex.to_json(), ensure_ascii=False) + "\n")


def load_mix(path: str | Path) -> tuple[list[InstructionExample], dict]:
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline()
        header = json.loads(first) if first.strip() else {}
        if header.get("kind") != MIX_HEADER_KIND:
            raise ValueError(f"{path} is not an instruction mix file")
        examples = [
            InstructionExample.from_json(json.loads(line)) for line in fh if line.strip()
        ]
    return examples, header
