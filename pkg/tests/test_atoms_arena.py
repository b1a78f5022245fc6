"""
Test Atoms: Arenas
==================

Tests for child-reference encoding and the node/leaf slabs.
"""

from src.ads.arena_atoms import (
    LeafArena,
    NodeArena,
    ShardArenas,
    child_slot,
    is_leaf_ref,
    leaf_ref,
    leaf_slot,
    sibling_slot,
)
from src.ads.config_atoms import EMPTY_HASH


class TestReferences:
    """Tests for reference and slot arithmetic."""

    def test_leaf_refs_are_negative(self):
        """Leaf references are complements of their slot and never collide with node slots."""
        for slot in (0, 1, 1000):
            ref = leaf_ref(slot)
            assert is_leaf_ref(ref)
            assert leaf_slot(ref) == slot
        assert not is_leaf_ref(0)

    def test_children_are_adjacent(self):
        """Node i keeps its children at slots 2i and 2i + 1."""
        assert child_slot(3, 0) == 6
        assert child_slot(3, 1) == 7
        assert sibling_slot(6) == 7
        assert sibling_slot(7) == 6


class TestNodeArena:
    """Tests for NodeArena."""

    def test_allocate_appends_dirty_nodes(self):
        """New nodes start dirty, at version 0, holding their children."""
        # Arrange
        arena = NodeArena()

        # Act
        first = arena.allocate(4, leaf_ref(0), leaf_ref(1))
        second = arena.allocate(9, first, leaf_ref(2))

        # Assert
        assert (first, second) == (0, 1)
        assert arena.dirty[second] is True
        assert arena.version[second] == 0
        assert arena.depth[second] == 9
        assert arena.children[child_slot(second, 0)] == first
        assert arena.children[child_slot(second, 1)] == leaf_ref(2)
        assert len(arena) == 2

    def test_released_slots_are_reused(self):
        """A released slot is handed out again before the slab grows."""
        arena = NodeArena()
        a = arena.allocate(1, leaf_ref(0), leaf_ref(1))
        arena.allocate(2, leaf_ref(2), leaf_ref(3))

        arena.release(a)
        reused = arena.allocate(7, leaf_ref(4), leaf_ref(5))

        assert reused == a
        assert arena.depth[reused] == 7
        assert arena.capacity() == 2
        assert len(arena) == 2


class TestLeafArena:
    """Tests for LeafArena."""

    def test_release_drops_key_bytes(self):
        """Released leaves forget their key and are reused."""
        # Arrange
        arena = LeafArena()
        slot = arena.allocate(b"h" * 32, b"key", 0, b"v" * 32, 3)

        # Act
        arena.release(slot)

        # Assert
        assert arena.key[slot] == b""
        assert len(arena) == 0
        assert arena.allocate(b"g" * 32, b"other", 8, b"w" * 32, 4) == slot
        assert arena.version[slot] == 4


class TestShardArenas:
    """Tests for ShardArenas lookups."""

    def test_empty_reference(self):
        """A missing child hashes to EMPTY_HASH at version 0."""
        arenas = ShardArenas()
        assert arenas.ref_hash(None) == EMPTY_HASH
        assert arenas.ref_version(None) == 0

    def test_dispatches_on_reference_sign(self):
        """Negative references read the leaf slab, others the node slab."""
        arenas = ShardArenas()
        leaf = arenas.leaves.allocate(b"k" * 32, b"key", 0, b"v" * 32, 6)
        node = arenas.nodes.allocate(3, leaf_ref(leaf), leaf_ref(leaf))
        arenas.leaves.hash[leaf] = b"L" * 32
        arenas.nodes.hash[node] = b"N" * 32
        arenas.nodes.version[node] = 6

        assert arenas.ref_hash(leaf_ref(leaf)) == b"L" * 32
        assert arenas.ref_version(leaf_ref(leaf)) == 6
        assert arenas.ref_hash(node) == b"N" * 32
        assert arenas.ref_version(node) == 6
