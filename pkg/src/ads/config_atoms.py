"""
Config Atoms - Pure Constants and Format Parameters
===================================================

Pure constants shared by the store, snapshot and proof layers: bit widths,
reserved sentinels, default topology, file magics and benchmark knobs.

No dependencies, no side effects - just configuration values.
"""

# =============================================================================
# ATOMS - Field widths and sentinels
# =============================================================================

# Versions are 52-bit epoch numbers; they share a 64-bit salt word with depth
VERSION_BITS: int = 52
MAX_VERSION: int = (1 << VERSION_BITS) - 1

# Depth is a 12-bit branching bit index; 0xfff is reserved for leaves
DEPTH_BITS: int = 12
LEAF_DEPTH: int = 0xFFF

# Digest width in bytes for every node, key and value hash
HASH_SIZE: int = 32

# Empty subtrees hash to the all-zeros constant
EMPTY_HASH: bytes = b"\x00" * HASH_SIZE

# Journal offsets are 52-bit byte offsets inside a version segment
JOURNAL_OFFSET_BITS: int = 52
MAX_JOURNAL_OFFSET: int = (1 << JOURNAL_OFFSET_BITS) - 1

# Packed entry tags (entry indexes, key offsets, versions inside snapshots)
TAG_BITS: int = 48
MAX_TAG: int = (1 << TAG_BITS) - 1

# =============================================================================
# ATOMS - Topology defaults
# =============================================================================

# Desk-scale topology: 8 shards x 256 subtrees
DEFAULT_SHARD_BITS: int = 3
DEFAULT_SUBTREE_BITS: int = 8

# Server-scale topology (64 cores): 64 shards x 1024 subtrees
SERVER_SHARD_BITS: int = 6
SERVER_SUBTREE_BITS: int = 10

# Batched hashing processes jobs in lanes of this width
HASH_LANE_WIDTH: int = 16

# =============================================================================
# ATOMS - File formats
# =============================================================================

JOURNAL_MAGIC: bytes = b"ADSJRNL\x00"
JOURNAL_FORMAT_VERSION: int = 1

SNAPSHOT_MAGIC: bytes = b"ADSSNAP\x00"
SNAPSHOT_FORMAT_VERSION: int = 1

PROOF_MAGIC: bytes = b"ADSPRF\x00\x00"
PROOF_FORMAT_VERSION: int = 1

# =============================================================================
# ATOMS - Benchmark defaults
# =============================================================================

# Ops per epoch; each epoch ends in a commit
DEFAULT_EPOCH_OPS: int = 1 << 16

# Share of ops excluded from throughput while the store fills
WARMUP_FRACTION: float = 0.10

# Default workload mix: updates / inserts / deletes in percent
DEFAULT_MIX: tuple[int, int, int] = (90, 5, 5)

DEFAULT_VALUE_SIZE: int = 32

# Identifier recorded in run reports so streams can be reproduced elsewhere
PRNG_ALGORITHM: str = "numpy.PCG64"
