"""Strict cutoff filtering of document streams."""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .documents import CutoffSpec, TimestampedDocument


@dataclass
class PartitionReport:
    """Reconciled counts for one partition or verification pass.

    ``violations`` lists (doc id, timestamp) pairs that breach the cutoff;
    ``corruptions`` lists integrity failures, which are distinct from
    temporal violations.
    """

    docs_seen: int = 0
    docs_kept: int = 0
    docs_rejected: int = 0
    tokens_emitted: int = 0
    violations: list[tuple[str, dt.date]] = field(default_factory=list)
    corruptions: list[str] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.violations and not self.corruptions

    def reconciles(self) -> bool:
        return self.docs_seen == self.docs_kept + self.docs_rejected


def partition_by_cutoff(
    docs: Iterable[TimestampedDocument],
    spec: CutoffSpec,
    report: PartitionReport | None = None,
) -> tuple[Iterator[TimestampedDocument], PartitionReport]:
    """Split a document stream at the cutoff boundary.

    Returns (kept stream, report). Kept documents are exactly those with
    timestamp strictly before Jan 1 of the cutoff year; the report's counts
    fill in as the stream is consumed.
    """
    if report is None:
        report = PartitionReport()

    def kept() -> Iterator[TimestampedDocument]:
        for doc in docs:
            report.docs_seen += 1
            if spec.admits(doc):
                report.docs_kept += 1
                yield doc
            else:
                report.docs_rejected += 1

    return kept(), report
