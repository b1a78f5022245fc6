"""
Test Molecules: Journal
=======================

Tests for version-segmented journals in memory and on disk.
"""

from pathlib import Path
from unittest.mock import patch

import pytest

from src.ads.errors import (
    JournalCapacityError,
    JournalCorruptionError,
    JournalStateError,
    JournalStorageError,
)
from src.ads.hashing_atoms import hash_data
from src.ads.journal_molecules import (
    FileSegment,
    Journal,
    MemorySegment,
    decode_record,
    encode_record,
)


class TestRecordCodec:
    """Tests for encode_record() / decode_record()."""

    def test_length_prefixed_layout(self):
        """A record is key_len | key | value_len | value."""
        record = encode_record(b"ab", b"xyz")
        assert record == b"\x02\x00\x00\x00ab\x03\x00\x00\x00xyz"
        assert decode_record(record, 0, 1) == (b"ab", b"xyz", len(record))

    @pytest.mark.parametrize("cut", [2, 5, 8, 10])
    def test_truncated_record_raises(self, cut: int):
        """Cutting a record anywhere raises JournalCorruptionError with its offset."""
        record = encode_record(b"ab", b"xyz")
        with pytest.raises(JournalCorruptionError) as exc_info:
            decode_record(record[:cut], 0, 4)
        assert exc_info.value.version == 4
        assert exc_info.value.offset == 0


class TestMemoryJournal:
    """Tests for Journal without a directory."""

    def test_offsets_are_byte_positions(self):
        """append() returns each record's first byte offset."""
        # Arrange
        journal = Journal()

        # Act
        first = journal.append(1, b"k1", b"v1")
        second = journal.append(1, b"k2", b"value-2")

        # Assert
        assert journal.in_memory
        assert first == 0
        assert second == len(encode_record(b"k1", b"v1"))
        assert journal.read(1, second) == (b"k2", b"value-2")
        assert journal.read(1, first) == (b"k1", b"v1")

    def test_versions_are_separate_segments(self):
        """Each version numbers its offsets from zero."""
        journal = Journal()
        journal.append(1, b"a", b"1")
        assert journal.append(2, b"b", b"2") == 0
        assert journal.read(2, 0) == (b"b", b"2")

    def test_read_between_records_raises(self):
        """Offsets that are not record starts are rejected."""
        journal = Journal()
        journal.append(1, b"key", b"value")
        with pytest.raises(JournalCorruptionError) as exc_info:
            journal.read(1, 3)
        assert exc_info.value.offset == 3

    def test_read_unknown_version_raises(self):
        """Reading a version that was never written fails."""
        with pytest.raises(JournalCorruptionError):
            Journal().read(9, 0)

    def test_seal_summarizes_and_freezes(self):
        """seal() records count, length and checksum; later appends fail."""
        # Arrange
        journal = Journal()
        journal.append(3, b"a", b"1")
        journal.append(3, b"b", b"22")

        # Act
        summary = journal.seal(3)

        # Assert
        stream = encode_record(b"a", b"1") + encode_record(b"b", b"22")
        assert summary.record_count == 2
        assert summary.byte_length == len(stream)
        assert summary.checksum == hash_data(stream)
        assert journal.is_sealed(3)
        assert not journal.has_open_segment(3)
        with pytest.raises(JournalStateError):
            journal.append(3, b"c", b"3")
        assert journal.read(3, 0) == (b"a", b"1")

    def test_double_seal_raises(self):
        """Sealing twice is an error."""
        journal = Journal()
        journal.seal(1)
        with pytest.raises(JournalStateError):
            journal.seal(1)

    def test_capacity_limit(self):
        """Offsets past 52-bit addressing are refused."""
        segment = MemorySegment(1)
        with patch("src.ads.journal_molecules.MAX_JOURNAL_OFFSET", 4):
            segment.append(b"key", b"value")
            with pytest.raises(JournalCapacityError):
                segment.append(b"key2", b"value")


class TestFileJournal:
    """Tests for Journal backed by `<version>.journal` files."""

    def test_segment_file_survives_reopen(self, tmp_path: Path):
        """A sealed segment is readable from a fresh Journal on the same directory."""
        # Arrange
        journal = Journal(tmp_path)
        offset = journal.append(5, b"key", b"value")
        journal.append(5, b"other", b"x" * 100)
        journal.seal(5)

        # Act
        reopened = Journal(tmp_path)

        # Assert
        assert (tmp_path / "5.journal").exists()
        assert journal.segment_path(5) == tmp_path.resolve() / "5.journal"
        assert reopened.read(5, offset) == (b"key", b"value")
        assert reopened.is_sealed(5)

    def test_reads_before_seal(self, tmp_path: Path):
        """Records are readable while the segment is still open."""
        journal = Journal(tmp_path)
        journal.append(1, b"a", b"1")
        offset = journal.append(1, b"b", b"2")
        assert journal.read(1, offset) == (b"b", b"2")
        assert journal.append(1, b"c", b"3") > offset

    def test_corrupted_segment_is_detected(self, tmp_path: Path):
        """A flipped payload byte fails the checksum on reopen."""
        # Arrange
        journal = Journal(tmp_path)
        journal.append(2, b"key", b"value")
        journal.seal(2)
        path = tmp_path / "2.journal"
        data = bytearray(path.read_bytes())
        data[30] ^= 0x01
        path.write_bytes(bytes(data))

        # Act / Assert
        with pytest.raises(JournalCorruptionError):
            Journal(tmp_path).read(2, 0)

    def test_truncated_segment_is_detected(self, tmp_path: Path):
        """A segment cut short is rejected."""
        journal = Journal(tmp_path)
        journal.append(2, b"key", b"value")
        journal.seal(2)
        path = tmp_path / "2.journal"
        path.write_bytes(path.read_bytes()[:10])

        with pytest.raises(JournalCorruptionError):
            Journal(tmp_path).read(2, 0)

    def test_wrong_version_header(self, tmp_path: Path):
        """A segment renamed to another version is rejected."""
        journal = Journal(tmp_path)
        journal.append(2, b"key", b"value")
        journal.seal(2)
        (tmp_path / "2.journal").rename(tmp_path / "3.journal")

        with pytest.raises(JournalCorruptionError):
            Journal(tmp_path).read(3, 0)

    def test_unwritable_directory(self, tmp_path: Path):
        """File system failures surface as JournalStorageError."""
        blocker = tmp_path / "not-a-dir"
        blocker.write_text("x")
        with pytest.raises(JournalStorageError):
            FileSegment.create(1, blocker / "1.journal")

    def test_close_releases_open_handles(self, tmp_path: Path):
        """close() drops the handle of every unsealed segment; records stay readable."""
        # Arrange
        journal = Journal(tmp_path)
        offset = journal.append(1, b"a", b"1")
        journal.seal(1)
        journal.append(2, b"b", b"2")
        open_segment = journal._segments[2]

        # Act
        journal.close()

        # Assert
        assert open_segment._handle is None
        assert journal.read(1, offset) == (b"a", b"1")
        assert journal.read(2, 0) == (b"b", b"2")

    def test_closed_segment_refuses_writes(self, tmp_path: Path):
        """Appends and seals after close() raise JournalStateError."""
        journal = Journal(tmp_path)
        journal.append(1, b"a", b"1")
        journal.close()

        with pytest.raises(JournalStateError):
            journal.append(1, b"b", b"2")
        with pytest.raises(JournalStateError):
            journal.seal(1)

    def test_close_twice(self, tmp_path: Path):
        journal = Journal(tmp_path)
        journal.append(1, b"a", b"1")
        journal.close()
        journal.close()
        assert journal.has_open_segment(1)

    def test_memory_close_is_noop(self):
        """Memory segments keep accepting appends after close()."""
        journal = Journal()
        journal.append(1, b"a", b"1")
        journal.close()
        assert journal.append(1, b"b", b"2") > 0
