"""
Topology Atoms - Shard and Subtree Routing
==========================================

The key space is split by the leading bits of each key hash: the first
shard_bits pick the shard (one writer each), the next subtree_bits pick the
subtree inside it. Bits are read in the tree's extraction order, bit d
being (h[d // 8] >> (d % 8)) & 1, and packed most significant first.
"""

from dataclasses import dataclass

from .config_atoms import DEFAULT_SHARD_BITS, DEFAULT_SUBTREE_BITS, LEAF_DEPTH
from .hashing_atoms import key_bit


@dataclass(frozen=True)
class Topology:
    """
    Shard and subtree fan-out.

    Attributes:
        shard_bits: log2 of the number of shards
        subtree_bits: log2 of the number of subtrees per shard
    """

    shard_bits: int = DEFAULT_SHARD_BITS
    subtree_bits: int = DEFAULT_SUBTREE_BITS

    def __post_init__(self) -> None:
        if self.shard_bits < 0 or self.subtree_bits < 0:
            raise ValueError("shard_bits and subtree_bits must be non-negative")
        if self.implicit_levels >= LEAF_DEPTH or self.implicit_levels > 32:
            raise ValueError(f"Topology {self.shard_bits}/{self.subtree_bits} has too many implicit levels")

    @property
    def implicit_levels(self) -> int:
        return self.shard_bits + self.subtree_bits

    @property
    def shard_count(self) -> int:
        return 1 << self.shard_bits

    @property
    def subtrees_per_shard(self) -> int:
        return 1 << self.subtree_bits

    @property
    def subtree_count(self) -> int:
        return 1 << self.implicit_levels


def _leading_bits(key_hash: bytes, start: int, count: int) -> int:
    value = 0
    for depth in range(start, start + count):
        value = (value << 1) | key_bit(key_hash, depth)
    return value


def route(key_hash: bytes, topology: Topology) -> tuple[int, int]:
    """Return (shard_id, subtree_index) for a key hash."""
    shard_id = _leading_bits(key_hash, 0, topology.shard_bits)
    subtree_index = _leading_bits(key_hash, topology.shard_bits, topology.subtree_bits)
    return shard_id, subtree_index


def global_index(key_hash: bytes, topology: Topology) -> int:
    """Position of the key's subtree among all 2^implicit_levels subtrees."""
    return _leading_bits(key_hash, 0, topology.implicit_levels)


def split_index(index: int, topology: Topology) -> tuple[int, int]:
    """Inverse of global_index packing: (shard_id, subtree_index)."""
    return index >> topology.subtree_bits, index & (topology.subtrees_per_shard - 1)
