"""
Journal Molecules - Append-Only Version Segments
================================================

Raw key/value payloads are written to an append-only journal split into one
segment per version. Leaves and snapshot entries refer to payloads by the
byte offset of their record inside that version's segment.

Segment file layout (all integers little-endian):
- header: magic (8) | format version (u32) | journal version (u64)
- records: key_len (u32) | key | value_len (u32) | value
- footer (written by seal): record count (u64) | payload length (u64) |
  checksum (32) = hash_data of all record bytes

Two backends share the same semantics: MemorySegment keeps records in RAM
(used when the historical component is switched off), FileSegment writes
`<version>.journal` files that are flushed to stable storage on seal.
"""

import logging
import os
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .config_atoms import (
    HASH_SIZE,
    JOURNAL_FORMAT_VERSION,
    JOURNAL_MAGIC,
    MAX_JOURNAL_OFFSET,
)
from .errors import (
    JournalCapacityError,
    JournalCorruptionError,
    JournalStateError,
    JournalStorageError,
)
from .hashing_atoms import DEFAULT_HASH, HashFunction, new_data_hasher
from .utils import resolve_absolute_path

# Configure module logger
logger = logging.getLogger(__name__)

_HEADER = struct.Struct("<8sIQ")
_FOOTER = struct.Struct(f"<QQ{HASH_SIZE}s")
_LENGTH = struct.Struct("<I")


# =============================================================================
# ATOMS - Record codec and summary
# =============================================================================


def encode_record(key: bytes, value: bytes) -> bytes:
    """Encode one journal record: length-prefixed key, then value."""
    return _LENGTH.pack(len(key)) + key + _LENGTH.pack(len(value)) + value


def decode_record(buf: bytes | bytearray | memoryview, offset: int, version: int) -> tuple[bytes, bytes, int]:
    """
    Decode the record starting at `offset` of a record stream.

    Returns:
        (key, value, end offset)

    Raises:
        JournalCorruptionError: If the record runs past the end of the stream
    """
    end = len(buf)
    if offset + 4 > end:
        raise JournalCorruptionError(f"Truncated key length at offset {offset}", version, offset)
    (key_len,) = _LENGTH.unpack_from(buf, offset)
    key_start = offset + 4
    value_len_at = key_start + key_len
    if value_len_at + 4 > end:
        raise JournalCorruptionError(f"Truncated key at offset {offset}", version, offset)
    (value_len,) = _LENGTH.unpack_from(buf, value_len_at)
    value_start = value_len_at + 4
    value_end = value_start + value_len
    if value_end > end:
        raise JournalCorruptionError(f"Truncated value at offset {offset}", version, offset)
    return bytes(buf[key_start:value_len_at]), bytes(buf[value_start:value_end]), value_end


@dataclass(frozen=True)
class SegmentSummary:
    """
    Footer facts of a sealed segment.

    Attributes:
        version: Journal version of the segment
        record_count: Number of records appended
        byte_length: Length of the record stream in bytes
        checksum: hash_data over the record stream
    """

    version: int
    record_count: int
    byte_length: int
    checksum: bytes


# =============================================================================
# MOLECULES - Segments
# =============================================================================


class JournalSegment:
    """
    One version's append-only record stream.

    Subclasses supply the byte storage; this class owns offset bookkeeping,
    capacity checks, the running checksum and the sealed state.
    """

    def __init__(self, version: int, hash_fn: HashFunction = DEFAULT_HASH):
        self.version = version
        self.hash_fn = hash_fn
        self.record_count = 0
        self.byte_length = 0
        self.summary: Optional[SegmentSummary] = None
        self._offsets: set[int] = set()
        self._hasher = new_data_hasher(hash_fn)

    @property
    def sealed(self) -> bool:
        return self.summary is not None

    def append(self, key: bytes, value: bytes) -> int:
        """
        Append a record and return the offset of its first byte.

        Raises:
            JournalStateError: If the segment is sealed
            JournalCapacityError: If the offset would not fit in 52 bits
        """
        if self.sealed:
            raise JournalStateError(f"Segment {self.version} is sealed; append refused")

        offset = self.byte_length
        if offset > MAX_JOURNAL_OFFSET:
            raise JournalCapacityError(
                f"Segment {self.version} offset {offset} exceeds 52-bit addressing"
            )

        record = encode_record(key, value)
        self._write(record)
        self._hasher.update(record)
        self._offsets.add(offset)
        self.byte_length += len(record)
        self.record_count += 1
        return offset

    def read(self, offset: int) -> tuple[bytes, bytes]:
        """
        Read back the (key, value) record starting at `offset`.

        Raises:
            JournalCorruptionError: If no record starts at `offset`
        """
        if offset not in self._offsets:
            raise JournalCorruptionError(
                f"No record starts at offset {offset} of segment {self.version}",
                self.version,
                offset,
            )
        key, value, _ = decode_record(self._read_span(offset), 0, self.version)
        return key, value

    def seal(self) -> SegmentSummary:
        """
        Make the segment immutable and record its footer summary.

        Raises:
            JournalStateError: If the segment is already sealed
        """
        if self.sealed:
            raise JournalStateError(f"Segment {self.version} is already sealed")

        summary = SegmentSummary(
            version=self.version,
            record_count=self.record_count,
            byte_length=self.byte_length,
            checksum=self._hasher.digest(),
        )
        self._finish(summary)
        self.summary = summary
        logger.debug(
            f"Sealed journal segment {self.version}: "
            f"{summary.record_count} records, {summary.byte_length} bytes"
        )
        return summary

    def _index(self, stream: bytes | bytearray) -> None:
        """Rebuild offsets, counts and checksum from an existing record stream."""
        offset = 0
        while offset < len(stream):
            self._offsets.add(offset)
            _, _, offset = decode_record(stream, offset, self.version)
            self.record_count += 1
        self.byte_length = len(stream)
        self._hasher.update(stream)

    # Storage hooks
    def _write(self, record: bytes) -> None:
        raise NotImplementedError

    def _read_span(self, offset: int) -> bytes | memoryview:
        raise NotImplementedError

    def _finish(self, summary: SegmentSummary) -> None:
        pass

    def close(self) -> None:
        """Release storage handles; the records stay readable."""
        pass


class MemorySegment(JournalSegment):
    """RAM-backed segment with the same semantics as a file segment."""

    def __init__(self, version: int, hash_fn: HashFunction = DEFAULT_HASH):
        super().__init__(version, hash_fn)
        self._buf = bytearray()

    def _write(self, record: bytes) -> None:
        self._buf += record

    def _read_span(self, offset: int) -> memoryview:
        return memoryview(self._buf)[offset:]


class FileSegment(JournalSegment):
    """
    File-backed segment `<version>.journal`.

    Appends go through a buffered handle; seal writes the footer, flushes and
    fsyncs, then closes the handle. Sealed segments are read by reopening
    the file.
    """

    def __init__(self, version: int, path: Path, hash_fn: HashFunction = DEFAULT_HASH):
        super().__init__(version, hash_fn)
        self.path = path
        self._handle = None

    @classmethod
    def create(cls, version: int, path: Path, hash_fn: HashFunction = DEFAULT_HASH) -> "FileSegment":
        """Create a fresh segment file and write its header."""
        segment = cls(version, path, hash_fn)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            segment._handle = open(path, "w+b")
            segment._handle.write(_HEADER.pack(JOURNAL_MAGIC, JOURNAL_FORMAT_VERSION, version))
        except OSError as e:
            raise JournalStorageError(f"Cannot create journal segment {path}: {e}") from e
        logger.debug(f"Opened journal segment {path}")
        return segment

    @classmethod
    def open_sealed(cls, version: int, path: Path, hash_fn: HashFunction = DEFAULT_HASH) -> "FileSegment":
        """
        Load an existing sealed segment, validating header, footer and checksum.

        Raises:
            JournalCorruptionError: If the file is damaged or does not match `version`
            JournalStorageError: If the file cannot be read
        """
        try:
            raw = path.read_bytes()
        except OSError as e:
            raise JournalStorageError(f"Cannot read journal segment {path}: {e}") from e

        if len(raw) < _HEADER.size + _FOOTER.size:
            raise JournalCorruptionError(f"Journal segment {path} is truncated", version)
        magic, fmt, file_version = _HEADER.unpack_from(raw, 0)
        if magic != JOURNAL_MAGIC or fmt != JOURNAL_FORMAT_VERSION or file_version != version:
            raise JournalCorruptionError(f"Journal segment {path} has a foreign header", version)

        count, length, checksum = _FOOTER.unpack_from(raw, len(raw) - _FOOTER.size)
        stream = raw[_HEADER.size:len(raw) - _FOOTER.size]
        if length != len(stream):
            raise JournalCorruptionError(f"Journal segment {path} length mismatch", version)

        segment = cls(version, path, hash_fn)
        segment._index(stream)
        summary = SegmentSummary(version, segment.record_count, segment.byte_length, segment._hasher.digest())
        if summary.record_count != count or summary.checksum != checksum:
            raise JournalCorruptionError(f"Journal segment {path} failed its checksum", version)
        segment.summary = summary
        return segment

    def _write(self, record: bytes) -> None:
        if self._handle is None:
            raise JournalStateError(f"Segment {self.path} is closed; append refused")
        try:
            self._handle.write(record)
        except OSError as e:
            raise JournalStorageError(f"Write to {self.path} failed: {e}") from e

    def _read_span(self, offset: int) -> bytes:
        position = _HEADER.size + offset
        limit = self.byte_length - offset
        try:
            if self._handle is not None:
                self._handle.flush()
                self._handle.seek(position)
                data = self._handle.read(limit)
                self._handle.seek(0, os.SEEK_END)
                return data
            with open(self.path, "rb") as f:
                f.seek(position)
                return f.read(limit)
        except OSError as e:
            raise JournalStorageError(f"Read from {self.path} failed: {e}") from e

    def _finish(self, summary: SegmentSummary) -> None:
        if self._handle is None:
            raise JournalStateError(f"Segment {self.path} is closed; seal refused")
        try:
            self._handle.write(_FOOTER.pack(summary.record_count, summary.byte_length, summary.checksum))
            self._handle.flush()
            os.fsync(self._handle.fileno())
            self._handle.close()
        except OSError as e:
            raise JournalStorageError(f"Sealing {self.path} failed: {e}") from e
        self._handle = None

    def close(self) -> None:
        """Close an unsealed segment's handle; later reads reopen the file."""
        if self._handle is None:
            return
        try:
            self._handle.close()
        except OSError as e:
            logger.warning(f"Closing {self.path} failed: {e}")
        self._handle = None
        logger.debug(f"Closed unsealed journal segment {self.path}")


# =============================================================================
# MOLECULES - Journal
# =============================================================================


class Journal:
    """
    Version-segmented journal.

    Args:
        directory: Where `<version>.journal` files live; None keeps every
            segment in memory
        hash_fn: Hash function for segment checksums
    """

    def __init__(self, directory: Optional[Path | str] = None, hash_fn: HashFunction = DEFAULT_HASH):
        self.directory = resolve_absolute_path(directory) if directory is not None else None
        self.hash_fn = hash_fn
        self._segments: dict[int, JournalSegment] = {}

    @property
    def in_memory(self) -> bool:
        return self.directory is None

    def segment_path(self, version: int) -> Optional[Path]:
        """Path of the segment file for `version` (None in memory mode)."""
        if self.directory is None:
            return None
        return self.directory / f"{version}.journal"

    def _segment(self, version: int, create: bool) -> JournalSegment:
        segment = self._segments.get(version)
        if segment is not None:
            return segment

        path = self.segment_path(version)
        if path is not None and path.exists():
            segment = FileSegment.open_sealed(version, path, self.hash_fn)
        elif not create:
            raise JournalCorruptionError(f"No journal segment for version {version}", version)
        elif path is None:
            segment = MemorySegment(version, self.hash_fn)
        else:
            segment = FileSegment.create(version, path, self.hash_fn)

        self._segments[version] = segment
        return segment

    def append(self, version: int, key: bytes, value: bytes) -> int:
        """Append a (key, value) record to `version`'s segment and return its offset."""
        return self._segment(version, create=True).append(key, value)

    def read(self, version: int, offset: int) -> tuple[bytes, bytes]:
        """Read the (key, value) record at `offset` of `version`'s segment."""
        return self._segment(version, create=False).read(offset)

    def seal(self, version: int) -> SegmentSummary:
        """Seal `version`'s segment, creating an empty one if nothing was appended."""
        return self._segment(version, create=True).seal()

    def has_open_segment(self, version: int) -> bool:
        """True if `version` has a segment that still accepts appends."""
        segment = self._segments.get(version)
        return segment is not None and not segment.sealed

    def is_sealed(self, version: int) -> bool:
        segment = self._segments.get(version)
        return segment is not None and segment.sealed

    def close(self) -> None:
        """Close every segment's storage handle."""
        for segment in self._segments.values():
            segment.close()
