"""
Store Errors
============

Exception hierarchy for the authenticated store. Every exception carries the
context that produced it as attributes so callers can report the offending
key, version or offset without parsing messages.
"""

from typing import Optional


class StoreError(Exception):
    """Base class for every error raised by the store."""

    pass


class HashDomainError(StoreError, ValueError):
    """Raised when a salt or hash input falls outside its field range."""

    pass


class RoutingError(StoreError):
    """
    Raised when a key is applied to a subtree that does not own it.

    Attributes:
        key: The offending key bytes
        expected: (shard_id, subtree_index) the key routes to
        actual: (shard_id, subtree_index) it was applied to
    """

    def __init__(self, key: bytes, expected: tuple[int, int], actual: tuple[int, int]):
        self.key = key
        self.expected = expected
        self.actual = actual
        super().__init__(
            f"Key {key[:16].hex()} routes to shard/subtree {expected}, "
            f"not {actual}"
        )


class VersionRegressionError(StoreError):
    """
    Raised when a write carries a version older than the subtree's newest.

    Attributes:
        version: The version supplied by the caller
        newest: The newest version already present
    """

    def __init__(self, version: int, newest: int):
        self.version = version
        self.newest = newest
        super().__init__(f"Version {version} is older than newest version {newest}")


class IntegrityError(StoreError):
    """Raised on a full 256-bit key-hash collision between distinct keys."""

    pass


class JournalCapacityError(StoreError):
    """Raised when a journal segment would exceed 52-bit addressing."""

    pass


class JournalCorruptionError(StoreError):
    """
    Raised when journal bytes do not decode as a record.

    Attributes:
        version: Segment version
        offset: Offset that failed to decode (None for whole-segment damage)
    """

    def __init__(self, message: str, version: int, offset: Optional[int] = None):
        self.version = version
        self.offset = offset
        super().__init__(message)


class JournalStateError(StoreError):
    """Raised on appends to sealed segments and on double seals."""

    pass


class JournalStorageError(StoreError):
    """Raised when the backing file system fails underneath a journal."""

    pass


class SnapshotFormatError(StoreError):
    """Raised when a snapshot cannot be written or does not follow the format."""

    pass


class SnapshotCorruptionError(StoreError):
    """Raised when snapshot bytes are truncated or fail their checksum."""

    pass


class ProofFormatError(StoreError):
    """Raised when a proof or entry stream is malformed."""

    pass


class InvalidProofError(StoreError):
    """
    Raised when a proof does not authenticate against the trusted root.

    Attributes:
        reason: Short description of the failed check
    """

    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(f"Invalid proof: {reason}")


class ShardWorkerError(StoreError):
    """
    Raised when a process hosting a shard dies or fails outside a store error.

    Attributes:
        shard_id: Shard whose worker failed
    """

    def __init__(self, shard_id: int, message: str):
        self.shard_id = shard_id
        super().__init__(f"Shard {shard_id} worker failed: {message}")
