"""Quarterly relative-perplexity series over a dated probe corpus.

Documents bucket by the calendar quarter of their own timestamp. Relative
values divide each bucket's mean perplexity by the series-wide mean (the
unweighted mean over present buckets), which the series records as its
normalization divisor; the breakpoint detector is invariant to this choice.
"""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .. import tokenizer as tok
from ..corpus.documents import TimestampedDocument
from ..model.transformer import DecoderLM
from .perplexity import per_document_perplexities


def quarter_index(date: dt.date) -> int:
    """Calendar-true linear index: quarters since year 0."""
    return date.year * 4 + (date.month - 1) // 3


def quarter_label(index: int) -> str:
    return f"{index // 4}Q{index % 4 + 1}"


@dataclass
class QuarterBucket:
    label: str
    index: int
    count: int = 0
    token_count: int = 0
    mean_perplexity: float | None = None
    relative: float | None = None

    @property
    def present(self) -> bool:
        return self.mean_perplexity is not None


@dataclass
class PerplexitySeries:
    cutoff_year: int
    buckets: list[QuarterBucket] = field(default_factory=list)
    normalization: float = 1.0

    def present_points(self) -> list[tuple[int, float]]:
        return [(b.index, b.relative) for b in self.buckets if b.present]

    def to_json(self) -> dict:
        return {
            "cutoff_year": self.cutoff_year,
            "normalization": self.normalization,
            "buckets": [
                {
                    "quarter": b.label,
                    "count": b.count,
                    "token_count": b.token_count,
                    "mean_perplexity": b.mean_perplexity,
                    "relative_perplexity": b.relative,
                }
                for b in self.buckets
            ],
        }

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=2)


def relative_series(
    model: DecoderLM,
    artifact: tok.TokenizerArtifact,
    docs: Sequence[TimestampedDocument],
    samples_per_quarter: int,
    cutoff_year: int,
    min_per_quarter: int = 1,
    batch_size: int = 32,
) -> PerplexitySeries:
    """Bucket documents by quarter, score up to ``samples_per_quarter`` per bucket.

    Sampling is deterministic (first documents in input order). Buckets below
    ``min_per_quarter`` stay in the series but are marked absent; downstream
    fitting must tolerate the gaps.
    """
    if samples_per_quarter < 1:
        raise ValueError("samples_per_quarter must be positive")
    grouped: dict[int, list[TimestampedDocument]] = {}
    for doc in docs:
        bucket = grouped.setdefault(quarter_index(doc.timestamp), [])
        if len(bucket) < samples_per_quarter:
            bucket.append(doc)
    if not grouped:
        raise ValueError("no dated documents supplied")

    first, last = min(grouped), max(grouped)
    series = PerplexitySeries(cutoff_year=cutoff_year)
    for index in range(first, last + 1):
        bucket = QuarterBucket(label=quarter_label(index), index=index)
        selected = grouped.get(index, [])
        bucket.count = len(selected)
        if len(selected) >= min_per_quarter:
            ppls, _excluded, tokens = per_document_perplexities(
                model, artifact, [d.text for d in selected], batch_size
            )
            if ppls:
                bucket.mean_perplexity = sum(ppls) / len(ppls)
                bucket.token_count = sum(tokens)
                bucket.count = len(ppls)
        series.buckets.append(bucket)

    present = [b for b in series.buckets if b.present]
    if not present:
        raise ValueError("every quarter fell below the minimum sample count")
    series.normalization = sum(b.mean_perplexity for b in present) / len(present)
    for b in present:
        b.relative = b.mean_perplexity / series.normalization
    return series
