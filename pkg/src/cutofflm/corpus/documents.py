"""Timestamped documents: parsing, validation, and streaming ingest.

Documents are the unit of temporal filtering. Every document carries a
UTC calendar date (day precision); filtering happens against a cutoff
year's January-1 instant, so day-precision data still filters correctly.
"""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Iterator

MIN_DATE = dt.date(1990, 1, 1)
MAX_DATE = dt.date(2100, 12, 31)

DEFAULT_SCHEMA = {
    "text": "text",
    "timestamp": "timestamp",
    "id": "id",
    "url": "url",
    "source": "source",
}


class DocumentError(ValueError):
    """A single record failed validation."""


class IngestError(Exception):
    """The record stream as a whole is unusable."""


def parse_timestamp(value: object) -> dt.date:
    """Parse an ISO-8601 date/datetime or epoch-seconds value to a UTC date.

    Raises DocumentError for unparseable values or dates outside
    [1990-01-01, 2100-12-31].
    """
    if isinstance(value, bool):
        raise DocumentError(f"not a timestamp: {value!r}")
    if isinstance(value, (int, float)):
        try:
            parsed = dt.datetime.fromtimestamp(value, tz=dt.timezone.utc).date()
        except (OverflowError, OSError, ValueError) as exc:
            raise DocumentError(f"bad epoch seconds {value!r}: {exc}") from exc
    elif isinstance(value, str):
        text = value.strip()
        if not text:
            raise DocumentError("empty timestamp")
        try:
            parsed = dt.datetime.fromtimestamp(float(text), tz=dt.timezone.utc).date()
        except ValueError:
            try:
                parsed = dt.datetime.fromisoformat(text.replace("Z", "+00:00")).date()
            except ValueError as exc:
                raise DocumentError(f"bad timestamp {value!r}: {exc}") from exc
    else:
        raise DocumentError(f"not a timestamp: {value!r}")
    if not MIN_DATE <= parsed <= MAX_DATE:
        raise DocumentError(f"timestamp {parsed.isoformat()} outside supported range")
    return parsed


@dataclass(frozen=True)
class TimestampedDocument:
    """One text record with a crawl/publication date."""

    id: str
    text: str
    timestamp: dt.date
    source: str = ""
    url: str | None = None

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise DocumentError(f"document {self.id!r} has empty text")
        if not MIN_DATE <= self.timestamp <= MAX_DATE:
            raise DocumentError(
                f"document {self.id!r} timestamp {self.timestamp} outside supported range"
            )


@dataclass(frozen=True)
class CutoffSpec:
    """A cutoff year; documents strictly before Jan 1 of that year are admissible."""

    cutoff_year: int

    @property
    def boundary(self) -> dt.date:
        return dt.date(self.cutoff_year, 1, 1)

    def admits(self, doc: TimestampedDocument) -> bool:
        return doc.timestamp < self.boundary


@dataclass
class IngestStats:
    """Counts and diagnostics from one ingest pass; filled as the stream is consumed."""

    records_seen: int = 0
    documents_yielded: int = 0
    rejected: list[tuple[int, str]] = field(default_factory=list)

    @property
    def records_rejected(self) -> int:
        return len(self.rejected)


def _record_to_document(record: dict, schema: dict[str, str], line_no: int) -> TimestampedDocument:
    text_key = schema["text"]
    ts_key = schema["timestamp"]
    if text_key not in record:
        raise DocumentError(f"missing field {text_key!r}")
    if ts_key not in record:
        raise DocumentError(f"missing field {ts_key!r}")
    text = record[text_key]
    if not isinstance(text, str):
        raise DocumentError(f"field {text_key!r} is not a string")
    doc_id = record.get(schema["id"])
    if doc_id is None:
        doc_id = f"line-{line_no}"
    url = record.get(schema["url"])
    source = record.get(schema["source"], "") or ""
    return TimestampedDocument(
        id=str(doc_id),
        text=text,
        timestamp=parse_timestamp(record[ts_key]),
        source=str(source),
        url=str(url) if url is not None else None,
    )


def ingest_documents(
    source: str | Path | IO[str] | Iterable[str],
    schema: dict[str, str] | None = None,
    stats: IngestStats | None = None,
) -> Iterator[TimestampedDocument]:
    """Stream validated documents from line-delimited JSON records.

    Malformed records (bad JSON, missing/invalid fields, bad timestamps) are
    counted in ``stats`` and skipped. If more than half the records are
    malformed, IngestError is raised at end of stream with diagnostics.
    An unreadable source raises IngestError immediately.
    """
    field_map = dict(DEFAULT_SCHEMA)
    if schema:
        field_map.update(schema)
    if stats is None:
        stats = IngestStats()

    if isinstance(source, (str, Path)):
        try:
            handle: Iterable[str] = open(source, "r", encoding="utf-8")
        except OSError as exc:
            raise IngestError(f"cannot read {source}: {exc}") from exc
        close_after = True
    else:
        handle = source
        close_after = False

    try:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            stats.records_seen += 1
            try:
                record = json.loads(line)
                if not isinstance(record, dict):
                    raise DocumentError("record is not an object")
                doc = _record_to_document(record, field_map, line_no)
            except (json.JSONDecodeError, DocumentError) as exc:
                stats.rejected.append((line_no, str(exc)))
                continue
            stats.documents_yielded += 1
            yield doc
    finally:
        if close_after:
            handle.close()  # type: ignore[union-attr]

    if stats.records_seen and stats.records_rejected * 2 > stats.records_seen:
        sample = "; ".join(f"line {n}: {msg}" for n, msg in stats.rejected[:5])
        raise IngestError(
            f"{stats.records_rejected}/{stats.records_seen} records malformed "
            f"(first failures: {sample})"
        )


def read_documents(
    source: str | Path | IO[str] | Iterable[str],
    schema: dict[str, str] | None = None,
) -> tuple[list[TimestampedDocument], IngestStats]:
    """Eagerly ingest a record stream; convenience wrapper over ingest_documents."""
    stats = IngestStats()
    docs = list(ingest_documents(source, schema=schema, stats=stats))
    return docs, stats


def write_documents(docs: Iterable[TimestampedDocument], path: str | Path) -> int:
    """Write documents as line-delimited JSON with default field names."""
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            record = {
                "id": doc.id,
                "text": doc.text,
                "timestamp": doc.timestamp.isoformat(),
                "source": doc.source,
            }
            if doc.url is not None:
                record["url"] = doc.url
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
            count += 1
    return count
