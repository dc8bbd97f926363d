"""Exceptions shared across pipeline stages."""


class LeakageError(Exception):
    """Data dated at or after a model's cutoff boundary reached a training path."""


class ShardCorruptionError(Exception):
    """A shard payload does not match its manifest checksum or header."""


class CheckpointError(Exception):
    """A checkpoint file is unreadable, truncated, or version-incompatible."""
