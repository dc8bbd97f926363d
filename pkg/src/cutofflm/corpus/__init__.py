from .documents import (
    CutoffSpec,
    IngestError,
    IngestStats,
    TimestampedDocument,
    ingest_documents,
    parse_timestamp,
    read_documents,
)
from .partition import PartitionReport, partition_by_cutoff
from .shards import ShardManifest, ShardSet, shard_tokens, verify_partition

__all__ = [
    "CutoffSpec",
    "IngestError",
    "IngestStats",
    "TimestampedDocument",
    "ingest_documents",
    "parse_timestamp",
    "read_documents",
    "PartitionReport",
    "partition_by_cutoff",
    "ShardManifest",
    "ShardSet",
    "shard_tokens",
    "verify_partition",
]
