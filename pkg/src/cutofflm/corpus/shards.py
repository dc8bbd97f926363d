"""Binary token shards with a provenance manifest.

Shard layout: an 8-byte magic, a fixed 128-byte header (format version,
token width, token count, cutoff year, tokenizer fingerprint), then the
payload of little-endian token ids. The manifest records, per shard, the
payload checksum and the ids of every document contributing tokens, plus
the kept-document order so a verifier can re-derive the exact stream.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .. import tokenizer as tok
from ..errors import ShardCorruptionError
from .documents import CutoffSpec, TimestampedDocument
from .partition import PartitionReport

MAGIC = b"TCSHARD1"
HEADER_SIZE = 128
FORMAT_VERSION = 1
TOKEN_WIDTH = 4  # 4-byte ids regardless of vocab size
MANIFEST_NAME = "manifest.json"


@dataclass
class ShardInfo:
    path: str
    checksum: str
    token_count: int
    doc_ids: list[str]

    @property
    def doc_id_range(self) -> tuple[str, str]:
        return (self.doc_ids[0], self.doc_ids[-1]) if self.doc_ids else ("", "")


@dataclass
class ShardManifest:
    cutoff_year: int
    tokenizer_fingerprint: str
    separator_id: int
    tokens_emitted: int
    docs_kept: int
    shards: list[ShardInfo] = field(default_factory=list)
    documents: list[dict] = field(default_factory=list)  # {id, token_count} in kept order

    def to_json(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "cutoff_year": self.cutoff_year,
            "tokenizer_fingerprint": self.tokenizer_fingerprint,
            "separator_id": self.separator_id,
            "tokens_emitted": self.tokens_emitted,
            "docs_kept": self.docs_kept,
            "shards": [
                {
                    "path": s.path,
                    "checksum": s.checksum,
                    "token_count": s.token_count,
                    "doc_ids": s.doc_ids,
                    "doc_id_range": list(s.doc_id_range),
                }
                for s in self.shards
            ],
            "documents": self.documents,
        }

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh)

    @classmethod
    def load(cls, path: str | Path) -> "ShardManifest":
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        if data.get("format_version") != FORMAT_VERSION:
            raise ShardCorruptionError(
                f"manifest format version {data.get('format_version')}, expected {FORMAT_VERSION}"
            )
        return cls(
            cutoff_year=data["cutoff_year"],
            tokenizer_fingerprint=data["tokenizer_fingerprint"],
            separator_id=data["separator_id"],
            tokens_emitted=data["tokens_emitted"],
            docs_kept=data["docs_kept"],
            shards=[
                ShardInfo(
                    path=s["path"],
                    checksum=s["checksum"],
                    token_count=s["token_count"],
                    doc_ids=list(s["doc_ids"]),
                )
                for s in data["shards"]
            ],
            documents=list(data["documents"]),
        )


@dataclass
class ShardSet:
    """A manifest plus the directory its shard paths are relative to."""

    manifest: ShardManifest
    root: Path

    def shard_path(self, info: ShardInfo) -> Path:
        return self.root / info.path


def _pack_header(token_count: int, cutoff_year: int, fingerprint: str) -> bytes:
    header = MAGIC + struct.pack(
        "<IIQI", FORMAT_VERSION, TOKEN_WIDTH, token_count, cutoff_year
    )
    header += fingerprint.encode("ascii")[:64].ljust(64, b"\0")
    return header.ljust(HEADER_SIZE, b"\0")


def _unpack_header(raw: bytes) -> tuple[int, int, int, int, str]:
    if len(raw) < HEADER_SIZE or raw[:8] != MAGIC:
        raise ShardCorruptionError("bad shard magic or truncated header")
    version, width, count, year = struct.unpack("<IIQI", raw[8:28])
    fingerprint = raw[28:92].rstrip(b"\0").decode("ascii")
    return version, width, count, year, fingerprint


def write_shard(path: Path, tokens: np.ndarray, cutoff_year: int, fingerprint: str) -> str:
    """Write one shard; returns the payload checksum."""
    payload = np.asarray(tokens, dtype="<u4").tobytes()
    checksum = hashlib.sha256(payload).hexdigest()
    try:
        with open(path, "wb") as fh:
            fh.write(_pack_header(len(tokens), cutoff_year, fingerprint))
            fh.write(payload)
    except OSError:
        path.unlink(missing_ok=True)  # no partial outputs
        raise
    return checksum


def read_shard(path: str | Path) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read()
    version, width, count, _year, _fp = _unpack_header(raw[:HEADER_SIZE])
    if version != FORMAT_VERSION:
        raise ShardCorruptionError(f"shard format version {version}, expected {FORMAT_VERSION}")
    if width != TOKEN_WIDTH:
        raise ShardCorruptionError(f"unsupported token width {width}")
    payload = raw[HEADER_SIZE:]
    if len(payload) != count * width:
        raise ShardCorruptionError(
            f"{path}: declared {count} tokens but payload holds {len(payload) // width}"
        )
    return np.frombuffer(payload, dtype="<u4")


def shard_payload_checksum(path: str | Path) -> str:
    with open(path, "rb") as fh:
        raw = fh.read()
    return hashlib.sha256(raw[HEADER_SIZE:]).hexdigest()


def shard_tokens(
    kept_docs: Iterable[TimestampedDocument],
    artifact: tok.TokenizerArtifact,
    shard_size_tokens: int,
    spec: CutoffSpec,
    out_dir: str | Path,
    budget_tokens: int | None = None,
    report: PartitionReport | None = None,
) -> ShardSet:
    """Tokenize kept documents into fixed-size shards plus a manifest.

    The token stream is each document's encoding followed by one separator
    token; shards are consecutive ``shard_size_tokens``-sized slices of that
    stream (last shard may be short). With a token budget, documents are
    consumed in input order until the emitted count reaches the budget
    (whole documents only, so the total may overshoot by part of one doc).
    """
    if shard_size_tokens < 1:
        raise ValueError("shard_size_tokens must be positive")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if report is None:
        report = PartitionReport()

    sep = artifact.doc_sep_id
    if any(tid >= 2 ** (8 * TOKEN_WIDTH) for tid in (sep, len(artifact.vocab) - 1)):
        raise ValueError("token ids exceed shard token width")

    buffer: list[int] = []
    buffer_start = 0  # global offset of buffer[0]
    emitted = 0
    shard_docs: dict[int, list[str]] = {}
    documents: list[dict] = []
    infos: list[ShardInfo] = []
    written: list[Path] = []

    def flush(final: bool) -> None:
        nonlocal buffer, buffer_start
        while len(buffer) >= shard_size_tokens or (final and buffer):
            chunk = buffer[:shard_size_tokens]
            buffer = buffer[shard_size_tokens:]
            index = len(infos)
            name = f"shard-{index:05d}.bin"
            try:
                checksum = write_shard(
                    out / name, np.array(chunk, dtype=np.uint64), spec.cutoff_year,
                    artifact.fingerprint,
                )
            except OSError:
                for p in written:
                    p.unlink(missing_ok=True)
                raise
            written.append(out / name)
            infos.append(
                ShardInfo(
                    path=name,
                    checksum=checksum,
                    token_count=len(chunk),
                    doc_ids=shard_docs.pop(index, []),
                )
            )
            buffer_start += len(chunk)

    for doc in kept_docs:
        if not spec.admits(doc):
            raise ValueError(
                f"document {doc.id!r} dated {doc.timestamp} is not admissible for "
                f"cutoff {spec.cutoff_year}; run partition_by_cutoff first"
            )
        if budget_tokens is not None and emitted >= budget_tokens:
            break
        ids = tok.encode(artifact, doc.text)
        ids.append(sep)
        start = buffer_start + len(buffer)
        end = start + len(ids)
        for shard_index in range(start // shard_size_tokens, (end - 1) // shard_size_tokens + 1):
            shard_docs.setdefault(shard_index, []).append(doc.id)
        documents.append({"id": doc.id, "token_count": len(ids)})
        buffer.extend(ids)
        emitted += len(ids)
        flush(final=False)

    flush(final=True)
    report.tokens_emitted += emitted

    manifest = ShardManifest(
        cutoff_year=spec.cutoff_year,
        tokenizer_fingerprint=artifact.fingerprint,
        separator_id=sep,
        tokens_emitted=emitted,
        docs_kept=len(documents),
        shards=infos,
        documents=documents,
    )
    manifest.save(out / MANIFEST_NAME)
    return ShardSet(manifest=manifest, root=out)


def iter_shard_tokens(shard_set: ShardSet) -> Iterator[np.ndarray]:
    for info in shard_set.manifest.shards:
        yield read_shard(shard_set.shard_path(info))


def load_token_stream(shard_set: ShardSet) -> np.ndarray:
    """Concatenate all shard payloads into one token array."""
    arrays = list(iter_shard_tokens(shard_set)) or [np.array([], dtype="<u4")]
    return np.concatenate(arrays)


def verify_partition(
    shard_set: ShardSet,
    source_docs: Iterable[TimestampedDocument],
    spec: CutoffSpec,
    artifact: tok.TokenizerArtifact | None = None,
) -> PartitionReport:
    """Audit shards against the cutoff and, when a tokenizer is given, content.

    Reports every contributing document whose timestamp breaches the boundary
    as a temporal violation, and every checksum/content/metadata mismatch as a
    corruption; the two failure classes never mix.
    """
    manifest = shard_set.manifest
    report = PartitionReport(docs_kept=manifest.docs_kept)

    by_id: dict[str, TimestampedDocument] = {}
    for doc in source_docs:
        report.docs_seen += 1
        by_id[doc.id] = doc
    report.docs_rejected = report.docs_seen - report.docs_kept

    if manifest.cutoff_year != spec.cutoff_year:
        report.corruptions.append(
            f"manifest cutoff_year {manifest.cutoff_year} != expected {spec.cutoff_year}"
        )
    if artifact is not None and artifact.fingerprint != manifest.tokenizer_fingerprint:
        report.corruptions.append("tokenizer fingerprint does not match manifest")

    # Temporal audit: every document contributing tokens must predate the boundary.
    for entry in manifest.documents:
        doc = by_id.get(entry["id"])
        if doc is None:
            report.corruptions.append(f"document {entry['id']!r} missing from source")
            continue
        if not spec.admits(doc):
            report.violations.append((doc.id, doc.timestamp))

    # Integrity audit: checksums, then (with a tokenizer) exact content replay.
    total = 0
    payloads: list[np.ndarray] = []
    for info in manifest.shards:
        path = shard_set.shard_path(info)
        try:
            tokens = read_shard(path)
        except (OSError, ShardCorruptionError) as exc:
            report.corruptions.append(f"{info.path}: {exc}")
            continue
        actual = hashlib.sha256(tokens.astype("<u4").tobytes()).hexdigest()
        if actual != info.checksum:
            report.corruptions.append(f"{info.path}: checksum mismatch")
            continue
        if len(tokens) != info.token_count:
            report.corruptions.append(
                f"{info.path}: token count {len(tokens)} != manifest {info.token_count}"
            )
            continue
        total += len(tokens)
        payloads.append(tokens)

    if not report.corruptions and total != manifest.tokens_emitted:
        report.corruptions.append(
            f"shards hold {total} tokens but manifest declares {manifest.tokens_emitted}"
        )

    if artifact is not None and not report.corruptions:
        stream = np.concatenate(payloads) if payloads else np.array([], dtype="<u4")
        offset = 0
        sep = manifest.separator_id
        for entry in manifest.documents:
            doc = by_id.get(entry["id"])
            if doc is None:
                continue
            expected = tok.encode(artifact, doc.text) + [sep]
            actual_slice = stream[offset : offset + len(expected)]
            if len(actual_slice) != len(expected) or not np.array_equal(
                actual_slice, np.array(expected, dtype="<u4")
            ):
                report.corruptions.append(
                    f"document {doc.id!r}: shard tokens do not match re-encoded text"
                )
                break
            offset += len(expected)
        else:
            if offset != len(stream):
                report.corruptions.append(
                    f"{len(stream) - offset} trailing tokens not covered by any document"
                )

    report.tokens_emitted = total
    return report
