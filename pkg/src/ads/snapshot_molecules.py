"""
Snapshot Molecules - Versioned Entry-Stream Files
=================================================

A snapshot holds the nodes changed in one version, written as packed
40-byte entries (see entry_atoms). Every subtree touched in the version
gets a contiguous entry range; untouched subtrees keep an empty range and
are still listed in the directory with their root digest and version.

File layout (little-endian):

    header     magic | format u32 | hash id u32 | version u64 |
               shard_bits u8 | subtree_bits u8 | 6 pad | entry count u64 |
               key region length u64
    directory  2^implicit_levels records: start u64 | count u64 |
               root hash 32 | root version u64
    entries    entry count x 40 bytes
    key region records: key_len u32 | key | journal value offset u64
    trailer    global root 32 | checksum 32 (hash_data of all prior bytes)

Writer emission per node, with "current" meaning version == snapshot
version:
- leaf: Leaf(value hash, leaf version) then Key(key hash, key offset)
- both children current: save(left), Internal(h_right, right, tag 0),
  save(right), Internal(h_left, left, tag = index of the first Internal)
- one child current: save(current child), External(older child)
- no child current (only possible at a subtree root): External(right),
  External(left)
"""

import logging
import os
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import ClassVar, Iterator, Optional

from .arena_atoms import ShardArenas, is_leaf_ref
from .config_atoms import HASH_SIZE, MAX_TAG, SNAPSHOT_FORMAT_VERSION, SNAPSHOT_MAGIC
from .dispatch_organisms import ShardedStore, bridge_from_levels, fold_levels, fold_subtree_roots
from .entry_atoms import (
    ENTRY_SIZE,
    Entry,
    EntryKind,
    encode_entries,
    external_entry,
    internal_entry,
    iter_entries,
    key_entry,
    leaf_entry,
)
from .errors import HashDomainError, SnapshotCorruptionError, SnapshotFormatError
from .hashing_atoms import HashFunction, get_hash_function, hash_data
from .topology_atoms import Topology
from .tree_molecules import Subtree
from .utils import resolve_absolute_path

# Configure module logger
logger = logging.getLogger(__name__)

_HEADER = struct.Struct("<8sIIQBB6xQQ")
_TRAILER_SIZE = 2 * HASH_SIZE
_KEY_LEN = struct.Struct("<I")
_VALUE_OFFSET = struct.Struct("<Q")


# =============================================================================
# ATOMS - Records
# =============================================================================


@dataclass(frozen=True)
class DirectoryRecord:
    """Entry range and root of one subtree inside a snapshot."""

    layout: ClassVar[struct.Struct] = struct.Struct(f"<QQ{HASH_SIZE}sQ")

    start: int
    count: int
    root_hash: bytes
    root_version: int

    def pack(self) -> bytes:
        return self.layout.pack(self.start, self.count, self.root_hash, self.root_version)

    @classmethod
    def unpack_from(cls, buf: bytes | memoryview, offset: int) -> "DirectoryRecord":
        return cls(*cls.layout.unpack_from(buf, offset))


@dataclass(frozen=True)
class SubtreeEntries:
    """Decoded entry range of one subtree; entry i has file index start + i."""

    index: int
    start: int
    entries: list[Entry]

    @property
    def end(self) -> int:
        return self.start + len(self.entries)


@dataclass(frozen=True)
class KeyRecord:
    """A key written in the snapshot's version, as recorded by a Key/Leaf pair."""

    key: bytes
    key_hash: bytes
    value_offset: int
    version: int


@dataclass(frozen=True)
class SnapshotSummary:
    version: int
    path: Optional[Path]
    entry_count: int
    byte_length: int
    root: bytes


def snapshot_path(directory: Path | str, version: int) -> Path:
    """File name of the snapshot for `version` inside `directory`."""
    return resolve_absolute_path(directory) / f"snapshot-{version}.snap"


def list_snapshots(directory: Path | str) -> dict[int, Path]:
    """Snapshot files in `directory`, keyed by version."""
    found: dict[int, Path] = {}
    root = resolve_absolute_path(directory)
    if not root.is_dir():
        return found
    for path in root.glob("snapshot-*.snap"):
        stem = path.stem.removeprefix("snapshot-")
        if stem.isdigit():
            found[int(stem)] = path
    return dict(sorted(found.items()))


# =============================================================================
# MOLECULES - Writer
# =============================================================================


@dataclass
class _Frame:
    """An internal node whose current children are still being emitted."""

    ref: int
    depth: int
    left: int
    right: int
    left_current: bool
    right_current: bool
    first: Optional[int] = None


class _EntryWriter:
    """
    Emission of one version's current nodes.

    Driven by Subtree.dirty_nodes_of_version: the preorder stream of current
    references is consumed with an explicit stack, so a node's closing
    entries are written once its last current child has been emitted.
    """

    def __init__(self, version: int):
        self.version = version
        self.entries: list[Entry] = []
        self.keys = bytearray()
        self.arenas: Optional[ShardArenas] = None

    def _version_tag(self, version: int) -> int:
        if version > MAX_TAG:
            raise SnapshotFormatError(f"Version {version} does not fit a 48-bit snapshot tag")
        return version

    def write(self, subtree: Subtree) -> None:
        """Emit the entries of one touched, non-empty subtree."""
        arenas = self.arenas = subtree.arenas
        refs: Iterator[int] = subtree.dirty_nodes_of_version(self.version)
        if arenas.ref_version(subtree.root) != self.version:
            # Touched by deletes only: the root stands in with its older children
            refs = iter((subtree.root,))

        stack: list[_Frame] = []
        for ref in refs:
            done = self._enter(ref, stack)
            while done and stack:
                done = self._child_done(stack)
        if stack:
            raise SnapshotFormatError(f"Subtree {subtree.subtree_index}: {len(stack)} nodes left open")

    def _enter(self, ref: int, stack: list[_Frame]) -> bool:
        """Start emitting `ref`; True when it is already complete."""
        arenas = self.arenas
        entries = self.entries

        if is_leaf_ref(ref):
            leaves = arenas.leaves
            slot = ~ref
            key = leaves.key[slot]
            key_offset = len(self.keys)
            self.keys += _KEY_LEN.pack(len(key)) + key + _VALUE_OFFSET.pack(leaves.value_offset[slot])
            entries.append(leaf_entry(leaves.value_hash[slot], self._version_tag(leaves.version[slot])))
            entries.append(key_entry(leaves.key_hash[slot], key_offset))
            return True

        nodes = arenas.nodes
        depth = nodes.depth[ref]
        left = nodes.children[ref << 1]
        right = nodes.children[(ref << 1) | 1]
        left_version = arenas.ref_version(left)
        right_version = arenas.ref_version(right)
        left_current = left_version == self.version
        right_current = right_version == self.version

        if not (left_current or right_current):
            entries.append(external_entry(arenas.ref_hash(right), self._version_tag(right_version), depth, True))
            entries.append(external_entry(arenas.ref_hash(left), self._version_tag(left_version), depth, False))
            return True
        stack.append(_Frame(ref, depth, left, right, left_current, right_current))
        return False

    def _child_done(self, stack: list[_Frame]) -> bool:
        """A current child of the top frame finished; True when the frame closed."""
        arenas = self.arenas
        entries = self.entries
        frame = stack[-1]

        if frame.left_current and frame.right_current:
            if frame.first is None:
                frame.first = len(entries)
                entries.append(internal_entry(arenas.ref_hash(frame.right), 0, frame.depth, True, is_leaf_ref(frame.left)))
                return False
            entries.append(internal_entry(arenas.ref_hash(frame.left), frame.first, frame.depth, False, is_leaf_ref(frame.right)))
        elif frame.left_current:
            tag = self._version_tag(arenas.ref_version(frame.right))
            entries.append(external_entry(arenas.ref_hash(frame.right), tag, frame.depth, True))
        else:
            tag = self._version_tag(arenas.ref_version(frame.left))
            entries.append(external_entry(arenas.ref_hash(frame.left), tag, frame.depth, False))
        stack.pop()
        return True


def encode_snapshot(store: ShardedStore, version: int) -> bytes:
    """
    Serialize `version` of a committed store into snapshot bytes.

    Raises:
        SnapshotFormatError: If the store has uncommitted changes or a
            field does not fit the format
    """
    if store.dirty:
        raise SnapshotFormatError("Store has uncommitted changes; commit before snapshotting")
    if store.last_commit is None or store.last_commit.version != version:
        raise SnapshotFormatError(f"Version {version} is not the store's last committed version")
    if version > MAX_TAG:
        raise SnapshotFormatError(f"Version {version} does not fit a 48-bit snapshot tag")

    topology = store.topology
    writer = _EntryWriter(version)
    directory: list[DirectoryRecord] = []
    for subtree in store.subtrees():
        start = len(writer.entries)
        if subtree.root is not None and subtree.touched_version == version:
            writer.write(subtree)
        directory.append(
            DirectoryRecord(start, len(writer.entries) - start, subtree.root_hash, subtree.root_version)
        )

    if len(writer.entries) > MAX_TAG:
        raise SnapshotFormatError(f"{len(writer.entries)} entries exceed 48-bit entry tags")

    root = fold_subtree_roots([r.root_hash for r in directory], version, topology, store.hash_fn)
    body = bytearray(
        _HEADER.pack(
            SNAPSHOT_MAGIC,
            SNAPSHOT_FORMAT_VERSION,
            store.hash_fn.ident,
            version,
            topology.shard_bits,
            topology.subtree_bits,
            len(writer.entries),
            len(writer.keys),
        )
    )
    for record in directory:
        body += record.pack()
    body += encode_entries(writer.entries)
    body += writer.keys
    body += root
    body += hash_data(bytes(body), store.hash_fn)
    return bytes(body)


def write_snapshot(store: ShardedStore, version: int, directory: Path | str) -> SnapshotSummary:
    """
    Write `snapshot-<version>.snap` into `directory`.

    The file is written to a temporary name, fsynced and renamed into place.
    """
    data = encode_snapshot(store, version)
    path = snapshot_path(directory, version)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".snap.tmp")
    try:
        with open(tmp, "wb") as f:
            f.write(data)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, path)
    except BaseException:
        tmp.unlink(missing_ok=True)
        raise

    entry_count = _HEADER.unpack_from(data, 0)[6]
    root = data[-_TRAILER_SIZE:-HASH_SIZE]
    logger.debug(f"Wrote snapshot {path.name}: {entry_count} entries, {len(data)} bytes")
    return SnapshotSummary(version, path, entry_count, len(data), root)


# =============================================================================
# MOLECULES - Reader
# =============================================================================


class SnapshotFile:
    """
    Parsed, checksum-verified snapshot.

    Attributes:
        version: Snapshot version
        hash_fn: Hash function named in the header
        topology: Topology the file was written with
        directory: One DirectoryRecord per subtree, in global_index order
        entry_count: Total entries in the stream
        root: Global root from the trailer (recomputed and checked on load)
    """

    def __init__(self, data: bytes, source: str = "<bytes>"):
        self.data = data
        self.source = source
        view = memoryview(data)

        if len(data) >= len(SNAPSHOT_MAGIC) and data[: len(SNAPSHOT_MAGIC)] != SNAPSHOT_MAGIC:
            raise SnapshotFormatError(f"{source}: not a snapshot file")
        if len(data) < _HEADER.size + _TRAILER_SIZE:
            raise SnapshotCorruptionError(f"{source}: truncated ({len(data)} bytes)")

        (_, fmt, hash_ident, version, shard_bits, subtree_bits, entry_count, key_len) = _HEADER.unpack_from(view, 0)
        if fmt != SNAPSHOT_FORMAT_VERSION:
            raise SnapshotFormatError(f"{source}: unsupported format version {fmt}")
        try:
            self.hash_fn: HashFunction = get_hash_function(hash_ident)
            self.topology = Topology(shard_bits, subtree_bits)
        except (HashDomainError, ValueError) as e:
            raise SnapshotFormatError(f"{source}: {e}") from e

        dir_size = self.topology.subtree_count * DirectoryRecord.layout.size
        expected = _HEADER.size + dir_size + entry_count * ENTRY_SIZE + key_len + _TRAILER_SIZE
        if len(data) != expected:
            raise SnapshotCorruptionError(f"{source}: expected {expected} bytes, found {len(data)}")
        if hash_data(view[:-HASH_SIZE], self.hash_fn) != data[-HASH_SIZE:]:
            raise SnapshotCorruptionError(f"{source}: checksum mismatch")

        self.version = version
        self.entry_count = entry_count
        self.root = data[-_TRAILER_SIZE:-HASH_SIZE]
        self._entries_at = _HEADER.size + dir_size
        self._keys_at = self._entries_at + entry_count * ENTRY_SIZE
        self._keys_len = key_len

        self.directory: list[DirectoryRecord] = []
        next_start = 0
        for i in range(self.topology.subtree_count):
            record = DirectoryRecord.unpack_from(view, _HEADER.size + i * DirectoryRecord.layout.size)
            if record.start != next_start:
                raise SnapshotFormatError(f"{source}: subtree {i} range starts at {record.start}, expected {next_start}")
            next_start += record.count
            self.directory.append(record)
        if next_start != entry_count:
            raise SnapshotFormatError(f"{source}: directory covers {next_start} of {entry_count} entries")

        self._levels = fold_levels(self.subtree_roots, version, self.topology, self.hash_fn)
        if self._levels[-1][0] != self.root:
            raise SnapshotCorruptionError(f"{source}: directory does not fold to the trailer root")

    @classmethod
    def open(cls, path: Path | str) -> "SnapshotFile":
        path = resolve_absolute_path(path)
        try:
            data = path.read_bytes()
        except OSError as e:
            raise SnapshotCorruptionError(f"Cannot read snapshot {path}: {e}") from e
        return cls(data, source=path.name)

    @property
    def subtree_roots(self) -> list[bytes]:
        return [record.root_hash for record in self.directory]

    def bridge(self, index: int) -> list[bytes]:
        """Implicit-level sibling digests folding subtree `index` into the root."""
        return bridge_from_levels(self._levels, index)

    def read_entries(self, index: int) -> SubtreeEntries:
        """Decode the entry range of subtree `index` (global_index order)."""
        record = self.directory[index]
        begin = self._entries_at + record.start * ENTRY_SIZE
        view = memoryview(self.data)[begin:begin + record.count * ENTRY_SIZE]
        return SubtreeEntries(index, record.start, list(iter_entries(view)))

    def all_entries(self) -> list[Entry]:
        view = memoryview(self.data)[self._entries_at:self._keys_at]
        return list(iter_entries(view))

    def key_record(self, offset: int) -> tuple[bytes, int]:
        """Return (key bytes, journal value offset) stored at a key-region offset."""
        if offset + _KEY_LEN.size > self._keys_len:
            raise SnapshotFormatError(f"{self.source}: key offset {offset} outside the key region")
        base = self._keys_at + offset
        (key_len,) = _KEY_LEN.unpack_from(self.data, base)
        end = offset + _KEY_LEN.size + key_len + _VALUE_OFFSET.size
        if end > self._keys_len:
            raise SnapshotFormatError(f"{self.source}: key record at {offset} overruns the key region")
        key_start = base + _KEY_LEN.size
        key = self.data[key_start:key_start + key_len]
        (value_offset,) = _VALUE_OFFSET.unpack_from(self.data, key_start + key_len)
        return key, value_offset

    def key_records(self) -> Iterator[KeyRecord]:
        """Every key written in this version, in file order."""
        entries = self.all_entries()
        for i, entry in enumerate(entries):
            if entry.kind is not EntryKind.KEY:
                continue
            if i == 0 or entries[i - 1].kind is not EntryKind.LEAF:
                raise SnapshotFormatError(f"{self.source}: Key entry {i} is not preceded by its Leaf")
            key, value_offset = self.key_record(entry.tag)
            yield KeyRecord(key, entry.hash, value_offset, entries[i - 1].tag)

    def encode(self) -> bytes:
        """Re-serialize from the decoded fields (identical to the loaded bytes)."""
        body = bytearray(self.data[:_HEADER.size])
        for record in self.directory:
            body += record.pack()
        body += encode_entries(self.all_entries())
        body += self.data[self._keys_at:self._keys_at + self._keys_len]
        body += self.root
        body += hash_data(bytes(body), self.hash_fn)
        return bytes(body)
