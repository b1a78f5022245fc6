"""
Arena Atoms - Slab Storage for Tree Nodes
=========================================

Each shard keeps two slabs: one for internal nodes, one for leaves. Slabs
are parallel growable lists indexed by integer slot, so a node is a column
position rather than an object. Freed slots go to a free list and are
reused before the slab grows.

Child references are plain ints:
- ref >= 0 is an internal node slot
- ref < 0 is a leaf slot, stored as its bitwise complement (~slot)

The two child references of internal node i sit in adjacent slots
2*i (left) and 2*i + 1 (right), so a sibling's slot is `slot ^ 1`.
"""

from typing import Optional

from .config_atoms import EMPTY_HASH


# =============================================================================
# ATOMS - Reference encoding
# =============================================================================


def leaf_ref(slot: int) -> int:
    """Encode a leaf slot as a child reference."""
    return ~slot


def leaf_slot(ref: int) -> int:
    """Decode a leaf child reference back to its slot."""
    return ~ref


def is_leaf_ref(ref: int) -> bool:
    """True if the reference points into the leaf slab."""
    return ref < 0


def child_slot(node: int, side: int) -> int:
    """Slot holding the child reference of `node` on `side` (0 left, 1 right)."""
    return (node << 1) | side


def sibling_slot(slot: int) -> int:
    """Slot of the sibling reference, by index arithmetic."""
    return slot ^ 1


# =============================================================================
# ATOMS - Slabs
# =============================================================================


class NodeArena:
    """
    Slab of internal nodes.

    Attributes:
        depth: Branching bit index per node
        version: Version of the last change below the node
        hash: Cached digest (valid when not dirty)
        dirty: Whether the cached digest is stale
        children: Child references, two adjacent slots per node
    """

    __slots__ = ("depth", "version", "hash", "dirty", "children", "_free", "_live")

    def __init__(self) -> None:
        self.depth: list[int] = []
        self.version: list[int] = []
        self.hash: list[bytes] = []
        self.dirty: list[bool] = []
        self.children: list[int] = []
        self._free: list[int] = []
        self._live = 0

    def allocate(self, depth: int, left: int, right: int) -> int:
        """Place a new dirty internal node and return its slot."""
        self._live += 1
        if self._free:
            slot = self._free.pop()
            self.depth[slot] = depth
            self.version[slot] = 0
            self.hash[slot] = EMPTY_HASH
            self.dirty[slot] = True
            self.children[slot << 1] = left
            self.children[(slot << 1) | 1] = right
            return slot

        slot = len(self.depth)
        self.depth.append(depth)
        self.version.append(0)
        self.hash.append(EMPTY_HASH)
        self.dirty.append(True)
        self.children.append(left)
        self.children.append(right)
        return slot

    def release(self, slot: int) -> None:
        """Return a slot to the free list."""
        self._live -= 1
        self.dirty[slot] = False
        self._free.append(slot)

    def capacity(self) -> int:
        """Slots allocated so far, live or free."""
        return len(self.depth)

    def __len__(self) -> int:
        return self._live


class LeafArena:
    """
    Slab of leaf records.

    Attributes:
        key_hash: hash_data(key) per leaf
        key: Full key bytes (kept for pre-image disambiguation)
        value_offset: Journal offset of the record holding the value
        value_hash: hash_data(value)
        version: Version in which the value was written
        hash: Cached leaf digest (valid when not dirty)
        dirty: Whether the cached digest is stale
    """

    __slots__ = (
        "key_hash", "key", "value_offset", "value_hash",
        "version", "hash", "dirty", "_free", "_live",
    )

    def __init__(self) -> None:
        self.key_hash: list[bytes] = []
        self.key: list[bytes] = []
        self.value_offset: list[int] = []
        self.value_hash: list[bytes] = []
        self.version: list[int] = []
        self.hash: list[bytes] = []
        self.dirty: list[bool] = []
        self._free: list[int] = []
        self._live = 0

    def allocate(
        self,
        key_hash: bytes,
        key: bytes,
        value_offset: int,
        value_hash: bytes,
        version: int,
    ) -> int:
        """Place a new dirty leaf and return its slot."""
        self._live += 1
        if self._free:
            slot = self._free.pop()
            self.key_hash[slot] = key_hash
            self.key[slot] = key
            self.value_offset[slot] = value_offset
            self.value_hash[slot] = value_hash
            self.version[slot] = version
            self.hash[slot] = EMPTY_HASH
            self.dirty[slot] = True
            return slot

        slot = len(self.key_hash)
        self.key_hash.append(key_hash)
        self.key.append(key)
        self.value_offset.append(value_offset)
        self.value_hash.append(value_hash)
        self.version.append(version)
        self.hash.append(EMPTY_HASH)
        self.dirty.append(True)
        return slot

    def release(self, slot: int) -> None:
        """Return a slot to the free list, dropping the key bytes it held."""
        self._live -= 1
        self.key[slot] = b""
        self.dirty[slot] = False
        self._free.append(slot)

    def capacity(self) -> int:
        """Slots allocated so far, live or free."""
        return len(self.key_hash)

    def __len__(self) -> int:
        return self._live


class ShardArenas:
    """The node and leaf slabs owned by one shard's writer."""

    __slots__ = ("nodes", "leaves")

    def __init__(self) -> None:
        self.nodes = NodeArena()
        self.leaves = LeafArena()

    def ref_hash(self, ref: Optional[int]) -> bytes:
        """Cached digest behind a child reference (EMPTY_HASH for None)."""
        if ref is None:
            return EMPTY_HASH
        if ref < 0:
            return self.leaves.hash[~ref]
        return self.nodes.hash[ref]

    def ref_version(self, ref: Optional[int]) -> int:
        """Version behind a child reference (0 for None)."""
        if ref is None:
            return 0
        if ref < 0:
            return self.leaves.version[~ref]
        return self.nodes.version[ref]
