"""
Tree Molecules - Versioned Sparse Merkle Subtrees
=================================================

One Subtree holds the leaves routed to a single (shard, subtree) slot. The
tree is a crit-bit tree over key hashes: every internal node branches on
the first bit at which the keys below it differ, so internal nodes always
have two children and depths strictly increase toward the leaves.

Writes only mark the touched path dirty. Hashes are recomputed lazily by
recompute_subtree_root, one depth level at a time (deepest first) through
batch_hash. An internal node's version is the max of its children's.

Nodes and leaves live in the owning shard's ShardArenas; a Subtree only
holds its root reference.
"""

import logging
from collections import defaultdict
from dataclasses import dataclass
from enum import Enum
from typing import Iterator, Optional

from .arena_atoms import (
    ShardArenas,
    child_slot,
    is_leaf_ref,
    leaf_ref,
    leaf_slot,
    sibling_slot,
)
from .config_atoms import LEAF_DEPTH, MAX_VERSION
from .errors import (
    HashDomainError,
    IntegrityError,
    JournalCorruptionError,
    RoutingError,
    VersionRegressionError,
)
from .hashing_atoms import (
    DEFAULT_HASH,
    HashFunction,
    batch_hash,
    first_differing_bit,
    hash_data,
    key_bit,
    make_salt,
)
from .journal_molecules import Journal
from .topology_atoms import Topology, route

# Configure module logger
logger = logging.getLogger(__name__)


class PutOutcome(Enum):
    """Result of a put."""

    INSERTED = "inserted"
    UPDATED = "updated"


class DeleteOutcome(Enum):
    """Result of a delete."""

    DELETED = "deleted"
    ABSENT = "absent"


@dataclass(frozen=True)
class LeafInfo:
    """Read-only view of one live leaf."""

    key: bytes
    key_hash: bytes
    value_hash: bytes
    value_offset: int
    version: int


class Subtree:
    """
    Sparse Merkle subtree for one (shard_id, subtree_index) slot.

    Args:
        shard_id: Owning shard
        subtree_index: Index inside the shard
        topology: Store topology, used for the routing check
        arenas: The shard's node and leaf slabs
        journal: The shard's journal; values are appended on put
        hash_fn: Hash function for every digest
        prefetch: Compute the path slots of a key before descending

    Attributes:
        root: Root child reference, None while empty
        leaf_count: Number of live leaves
        max_version: Newest version written into the subtree
        touched_version: Last version in which a put or delete changed it
        rehashed: Node and leaf digests computed so far
    """

    def __init__(
        self,
        shard_id: int,
        subtree_index: int,
        topology: Topology,
        arenas: ShardArenas,
        journal: Journal,
        hash_fn: HashFunction = DEFAULT_HASH,
        prefetch: bool = False,
    ):
        self.shard_id = shard_id
        self.subtree_index = subtree_index
        self.topology = topology
        self.arenas = arenas
        self.journal = journal
        self.hash_fn = hash_fn
        self.prefetch = prefetch

        self.root: Optional[int] = None
        self.leaf_count = 0
        self.max_version = 0
        self.touched_version: Optional[int] = None
        self.rehashed = 0
        self.dirty = False
        self._dirty_nodes: set[int] = set()
        self._dirty_leaves: set[int] = set()

    # -------------------------------------------------------------------------
    # Navigation
    # -------------------------------------------------------------------------

    def _walk(self, key_hash: bytes) -> tuple[list[int], Optional[int]]:
        """Follow key bits from the root; return (child slots taken, final ref)."""
        nodes = self.arenas.nodes
        depth = nodes.depth
        children = nodes.children
        path: list[int] = []
        ref = self.root
        while ref is not None and ref >= 0:
            slot = child_slot(ref, key_bit(key_hash, depth[ref]))
            path.append(slot)
            ref = children[slot]
        return path, ref

    def path_slots(self, key_hash: bytes) -> list[int]:
        """
        Child slots visited when descending for `key_hash`.

        Slot addresses follow from the key bits and the adjacent-sibling
        layout; `slot >> 1` is the node and `slot ^ 1` the sibling reference.
        """
        return self._walk(key_hash)[0]

    def _descend(self, key_hash: bytes) -> tuple[list[int], Optional[int]]:
        """
        (child slots, final ref) for `key_hash`.

        With prefetch on, the slot list is computed up front and the descent
        reads the final reference from its last slot.
        """
        if not self.prefetch:
            return self._walk(key_hash)
        slots = self.path_slots(key_hash)
        ref = self.arenas.nodes.children[slots[-1]] if slots else self.root
        return slots, ref

    def _check_route(self, key: bytes, key_hash: bytes) -> None:
        expected = route(key_hash, self.topology)
        actual = (self.shard_id, self.subtree_index)
        if expected != actual:
            raise RoutingError(key, expected, actual)

    def _check_write(self, key: bytes, key_hash: bytes, version: int) -> None:
        self._check_route(key, key_hash)
        if not 0 <= version <= MAX_VERSION:
            raise HashDomainError(f"Version {version} outside [0, 2^52)")
        if version < self.max_version:
            raise VersionRegressionError(version, self.max_version)

    def _mark_path(self, path: list[int]) -> None:
        nodes = self.arenas.nodes
        for slot in path:
            node = slot >> 1
            nodes.dirty[node] = True
            self._dirty_nodes.add(node)

    def _touch(self, version: int) -> None:
        self.max_version = max(self.max_version, version)
        self.touched_version = version
        self.dirty = True

    # -------------------------------------------------------------------------
    # Writes
    # -------------------------------------------------------------------------

    def put(self, key: bytes, value: bytes, version: int, key_hash: Optional[bytes] = None) -> PutOutcome:
        """
        Insert or overwrite `key` at `version`.

        The value goes to the journal; the leaf keeps its offset and hash.
        Ancestors are only marked dirty.

        Raises:
            RoutingError: If the key belongs to another subtree
            VersionRegressionError: If version is older than the newest write
            IntegrityError: On a full key-hash collision between distinct keys
        """
        kh = key_hash if key_hash is not None else hash_data(key, self.hash_fn)
        self._check_write(key, kh, version)

        leaves = self.arenas.leaves
        path, ref = self._descend(kh)

        crit = None
        if ref is not None:
            existing = leaf_slot(ref)
            crit = first_differing_bit(kh, leaves.key_hash[existing])
            if crit is None and leaves.key[existing] != key:
                raise IntegrityError(
                    f"Keys {key[:16].hex()} and {leaves.key[existing][:16].hex()} "
                    f"share key hash {kh.hex()}"
                )

        offset = self.journal.append(version, key, value)
        value_hash = hash_data(value, self.hash_fn)
        self._touch(version)

        if ref is not None and crit is None:
            leaves.value_offset[existing] = offset
            leaves.value_hash[existing] = value_hash
            leaves.version[existing] = version
            leaves.dirty[existing] = True
            self._dirty_leaves.add(existing)
            self._mark_path(path)
            return PutOutcome.UPDATED

        new_slot = leaves.allocate(kh, key, offset, value_hash, version)
        self._dirty_leaves.add(new_slot)
        self.leaf_count += 1
        new_ref = leaf_ref(new_slot)

        if ref is None:
            self.root = new_ref
            return PutOutcome.INSERTED

        # The new branch goes above the first node deeper than the crit bit
        nodes = self.arenas.nodes
        i = 0
        while i < len(path) and nodes.depth[path[i] >> 1] < crit:
            i += 1
        displaced = self.root if i == 0 else nodes.children[path[i - 1]]
        if key_bit(kh, crit):
            node = nodes.allocate(crit, displaced, new_ref)
        else:
            node = nodes.allocate(crit, new_ref, displaced)
        self._dirty_nodes.add(node)

        if i == 0:
            self.root = node
        else:
            nodes.children[path[i - 1]] = node
        self._mark_path(path[:i])
        return PutOutcome.INSERTED

    def delete(self, key: bytes, version: int, key_hash: Optional[bytes] = None) -> DeleteOutcome:
        """
        Remove `key` if present; its parent collapses into the grandparent.

        Raises:
            RoutingError: If the key belongs to another subtree
            VersionRegressionError: If version is older than the newest write
        """
        kh = key_hash if key_hash is not None else hash_data(key, self.hash_fn)
        self._check_write(key, kh, version)

        leaves = self.arenas.leaves
        path, ref = self._descend(kh)
        if ref is None:
            return DeleteOutcome.ABSENT
        slot = leaf_slot(ref)
        if leaves.key_hash[slot] != kh or leaves.key[slot] != key:
            return DeleteOutcome.ABSENT

        nodes = self.arenas.nodes
        if not path:
            self.root = None
        else:
            parent_slot = path[-1]
            parent = parent_slot >> 1
            sibling = nodes.children[sibling_slot(parent_slot)]
            if len(path) == 1:
                self.root = sibling
            else:
                nodes.children[path[-2]] = sibling
            nodes.release(parent)
            self._dirty_nodes.discard(parent)
            self._mark_path(path[:-1])

        leaves.release(slot)
        self._dirty_leaves.discard(slot)
        self.leaf_count -= 1
        self._touch(version)
        return DeleteOutcome.DELETED

    # -------------------------------------------------------------------------
    # Reads
    # -------------------------------------------------------------------------

    def get(self, key: bytes, key_hash: Optional[bytes] = None) -> Optional[tuple[bytes, int]]:
        """
        Return (value, version) for `key`, or None if absent.

        A leaf whose key bytes differ from `key` counts as absent.
        """
        kh = key_hash if key_hash is not None else hash_data(key, self.hash_fn)
        self._check_route(key, kh)

        _, ref = self._descend(kh)
        if ref is None:
            return None
        leaves = self.arenas.leaves
        slot = leaf_slot(ref)
        if leaves.key_hash[slot] != kh or leaves.key[slot] != key:
            return None

        version = leaves.version[slot]
        stored_key, value = self.journal.read(version, leaves.value_offset[slot])
        if stored_key != key:
            raise JournalCorruptionError(
                f"Journal record at {leaves.value_offset[slot]} holds a different key",
                version,
                leaves.value_offset[slot],
            )
        return value, version

    @property
    def root_hash(self) -> bytes:
        """Cached root digest; call recompute_subtree_root first if dirty."""
        return self.arenas.ref_hash(self.root)

    @property
    def root_version(self) -> int:
        return self.arenas.ref_version(self.root)

    def leaves(self) -> Iterator[LeafInfo]:
        """Live leaves in left-to-right tree order."""
        leaves = self.arenas.leaves
        for ref in self._preorder(self.root, None):
            if is_leaf_ref(ref):
                slot = leaf_slot(ref)
                yield LeafInfo(
                    key=leaves.key[slot],
                    key_hash=leaves.key_hash[slot],
                    value_hash=leaves.value_hash[slot],
                    value_offset=leaves.value_offset[slot],
                    version=leaves.version[slot],
                )

    # -------------------------------------------------------------------------
    # Hashing
    # -------------------------------------------------------------------------

    def recompute_subtree_root(self, version: Optional[int] = None) -> bytes:
        """
        Rehash every dirty leaf and node, deepest level first.

        Args:
            version: Epoch being committed; must not be older than any write

        Returns:
            The subtree root digest (EMPTY_HASH when empty)
        """
        if version is not None and version < self.max_version:
            raise VersionRegressionError(version, self.max_version)
        if not self.dirty:
            return self.root_hash

        hash_fn = self.hash_fn
        leaves = self.arenas.leaves
        if self._dirty_leaves:
            slots = list(self._dirty_leaves)
            jobs = [
                (make_salt(leaves.version[s], LEAF_DEPTH), leaves.key_hash[s] + leaves.value_hash[s])
                for s in slots
            ]
            for s, digest in zip(slots, batch_hash(jobs, hash_fn)):
                leaves.hash[s] = digest
                leaves.dirty[s] = False
            self.rehashed += len(slots)
            self._dirty_leaves.clear()

        nodes = self.arenas.nodes
        by_depth: dict[int, list[int]] = defaultdict(list)
        for node in self._dirty_nodes:
            by_depth[nodes.depth[node]].append(node)

        ref_hash = self.arenas.ref_hash
        ref_version = self.arenas.ref_version
        children = nodes.children
        for depth in sorted(by_depth, reverse=True):
            level = by_depth[depth]
            jobs = []
            for node in level:
                left = children[node << 1]
                right = children[(node << 1) | 1]
                node_version = max(ref_version(left), ref_version(right))
                nodes.version[node] = node_version
                jobs.append((make_salt(node_version, depth), ref_hash(left) + ref_hash(right)))
            for node, digest in zip(level, batch_hash(jobs, hash_fn)):
                nodes.hash[node] = digest
                nodes.dirty[node] = False
            self.rehashed += len(level)

        self._dirty_nodes.clear()
        self.dirty = False
        return self.root_hash

    def dirty_nodes_of_version(self, version: int) -> Iterator[int]:
        """
        Yield child references whose version equals `version`.

        Order is depth-first, left child first, pruned below any node of an
        older version. Requires a clean (recomputed) subtree.
        """
        return self._preorder(self.root, version)

    def _preorder(self, ref: Optional[int], version: Optional[int]) -> Iterator[int]:
        if ref is None:
            return
        ref_version = self.arenas.ref_version
        children = self.arenas.nodes.children
        stack = [ref]
        while stack:
            current = stack.pop()
            if version is not None and ref_version(current) != version:
                continue
            yield current
            if current >= 0:
                stack.append(children[(current << 1) | 1])
                stack.append(children[current << 1])
