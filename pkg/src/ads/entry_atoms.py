"""
Entry Atoms - Packed 40-Byte Snapshot Entries
=============================================

A snapshot entry is a 32-byte hash followed by a 64-bit little-endian word:

    bits 0-1   kind (0 Internal, 1 External, 2 Key, 3 Leaf)
    bit  2     is_right
    bit  3     next_is_leaf
    bits 4-15  depth (0xfff for Key and Leaf entries)
    bits 16-63 tag

The tag is an entry index for Internal entries, a version for External and
Leaf entries and a key-region offset for Key entries.
"""

import struct
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, Iterator

from .config_atoms import HASH_SIZE, LEAF_DEPTH, MAX_TAG
from .errors import SnapshotFormatError, StoreError

_ENTRY = struct.Struct(f"<{HASH_SIZE}sQ")

ENTRY_SIZE: int = _ENTRY.size  # 40

_KIND_MASK = 0x3
_IS_RIGHT_BIT = 1 << 2
_NEXT_IS_LEAF_BIT = 1 << 3
_DEPTH_SHIFT = 4
_DEPTH_MASK = 0xFFF
_TAG_SHIFT = 16


class EntryKind(IntEnum):
    """Kind field of a packed entry word."""

    INTERNAL = 0
    EXTERNAL = 1
    KEY = 2
    LEAF = 3


@dataclass(frozen=True)
class Entry:
    """
    One decoded snapshot entry.

    Attributes:
        kind: Entry kind
        hash: Hash of the following node (Internal/External), hash_data of
            the key (Key) or of the value (Leaf)
        tag: Entry index, version or key-region offset depending on kind
        depth: Branching depth; LEAF_DEPTH for Key and Leaf entries
        is_right: Whether the node described is a right child
        next_is_leaf: Whether the node reached next is a leaf
    """

    kind: EntryKind
    hash: bytes
    tag: int
    depth: int = LEAF_DEPTH
    is_right: bool = False
    next_is_leaf: bool = False

    @property
    def word(self) -> int:
        return pack_word(self.kind, self.is_right, self.next_is_leaf, self.depth, self.tag)


# =============================================================================
# ATOMS - Word packing
# =============================================================================


def pack_word(kind: EntryKind, is_right: bool, next_is_leaf: bool, depth: int, tag: int) -> int:
    """Pack entry fields into the 64-bit word."""
    return (
        int(kind)
        | (_IS_RIGHT_BIT if is_right else 0)
        | (_NEXT_IS_LEAF_BIT if next_is_leaf else 0)
        | (depth << _DEPTH_SHIFT)
        | (tag << _TAG_SHIFT)
    )


def unpack_word(word: int) -> tuple[EntryKind, bool, bool, int, int]:
    """Split a 64-bit word into (kind, is_right, next_is_leaf, depth, tag)."""
    return (
        EntryKind(word & _KIND_MASK),
        bool(word & _IS_RIGHT_BIT),
        bool(word & _NEXT_IS_LEAF_BIT),
        (word >> _DEPTH_SHIFT) & _DEPTH_MASK,
        word >> _TAG_SHIFT,
    )


def check_entry(entry: Entry, error_cls: type[StoreError] = SnapshotFormatError) -> Entry:
    """
    Validate field ranges and kind/depth pairing.

    Raises:
        error_cls: If the entry cannot be represented or is inconsistent
    """
    if len(entry.hash) != HASH_SIZE:
        raise error_cls(f"Entry hash must be {HASH_SIZE} bytes, got {len(entry.hash)}")
    if not 0 <= entry.tag <= MAX_TAG:
        raise error_cls(f"Entry tag {entry.tag} does not fit in 48 bits")
    if entry.kind in (EntryKind.KEY, EntryKind.LEAF):
        if entry.depth != LEAF_DEPTH:
            raise error_cls(f"{entry.kind.name} entry must carry depth {LEAF_DEPTH:#x}, got {entry.depth:#x}")
        if entry.is_right or entry.next_is_leaf:
            raise error_cls(f"{entry.kind.name} entry carries branch flags")
    elif not 0 <= entry.depth < LEAF_DEPTH:
        raise error_cls(f"{entry.kind.name} entry depth {entry.depth:#x} is out of range")
    elif entry.kind is EntryKind.EXTERNAL and entry.next_is_leaf:
        raise error_cls("EXTERNAL entry carries next_is_leaf")
    return entry


# =============================================================================
# ATOMS - Constructors
# =============================================================================


def internal_entry(peer_hash: bytes, tag: int, depth: int, is_right: bool, next_is_leaf: bool) -> Entry:
    return Entry(EntryKind.INTERNAL, peer_hash, tag, depth, is_right, next_is_leaf)


def external_entry(node_hash: bytes, version: int, depth: int, is_right: bool) -> Entry:
    return Entry(EntryKind.EXTERNAL, node_hash, version, depth, is_right)


def key_entry(key_hash: bytes, key_offset: int) -> Entry:
    return Entry(EntryKind.KEY, key_hash, key_offset)


def leaf_entry(value_hash: bytes, version: int) -> Entry:
    return Entry(EntryKind.LEAF, value_hash, version)


# =============================================================================
# ATOMS - Codec
# =============================================================================


def encode_entry(entry: Entry, error_cls: type[StoreError] = SnapshotFormatError) -> bytes:
    """Serialize one entry to exactly ENTRY_SIZE bytes."""
    check_entry(entry, error_cls)
    return _ENTRY.pack(entry.hash, entry.word)


def decode_entry(
    buf: bytes | memoryview,
    offset: int = 0,
    error_cls: type[StoreError] = SnapshotFormatError,
) -> Entry:
    """Decode and validate the entry at `offset`."""
    if offset + ENTRY_SIZE > len(buf):
        raise error_cls(f"Entry at byte {offset} is truncated")
    digest, word = _ENTRY.unpack_from(buf, offset)
    kind, is_right, next_is_leaf, depth, tag = unpack_word(word)
    return check_entry(Entry(kind, digest, tag, depth, is_right, next_is_leaf), error_cls)


def encode_entries(entries: Iterable[Entry], error_cls: type[StoreError] = SnapshotFormatError) -> bytes:
    return b"".join(encode_entry(entry, error_cls) for entry in entries)


def iter_entries(
    buf: bytes | memoryview,
    error_cls: type[StoreError] = SnapshotFormatError,
) -> Iterator[Entry]:
    """Decode a packed entry stream."""
    if len(buf) % ENTRY_SIZE:
        raise error_cls(f"Entry stream of {len(buf)} bytes is not a multiple of {ENTRY_SIZE}")
    for offset in range(0, len(buf), ENTRY_SIZE):
        yield decode_entry(buf, offset, error_cls)
