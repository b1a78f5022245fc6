"""
ADS Module
==========

Authenticated key/value store: salted hashing, versioned sparse Merkle
subtrees over per-shard slabs, version-segmented journals, entry-stream
snapshots, inclusion/exclusion/external-version proofs and the benchmark
harness that drives them.
"""

from .utils import (
    resolve_absolute_path,
    get_project_root,
    short_hex,
    format_rate,
)

from .errors import (
    StoreError,
    HashDomainError,
    RoutingError,
    VersionRegressionError,
    IntegrityError,
    JournalCapacityError,
    JournalCorruptionError,
    JournalStateError,
    JournalStorageError,
    SnapshotFormatError,
    SnapshotCorruptionError,
    ProofFormatError,
    InvalidProofError,
    ShardWorkerError,
)

from .config_atoms import (
    EMPTY_HASH,
    LEAF_DEPTH,
    MAX_VERSION,
    DEFAULT_SHARD_BITS,
    DEFAULT_SUBTREE_BITS,
    DEFAULT_EPOCH_OPS,
)

from .hashing_atoms import (
    HashFunction,
    BLAKE2S,
    SHA256,
    DEFAULT_HASH,
    get_hash_function,
    available_hash_functions,
    make_salt,
    key_bit,
    hash_data,
    hash_leaf,
    hash_internal,
    batch_hash,
    batch_hash_scalar,
)

from .entry_atoms import (
    ENTRY_SIZE,
    Entry,
    EntryKind,
    encode_entry,
    decode_entry,
)

from .topology_atoms import (
    Topology,
    route,
    global_index,
)

from .workload_atoms import (
    OpKind,
    WorkloadConfig,
    Workload,
    generate_ops,
)

from .journal_molecules import (
    Journal,
    SegmentSummary,
)

from .tree_molecules import (
    Subtree,
    PutOutcome,
    DeleteOutcome,
    LeafInfo,
)

from .dispatch_organisms import (
    ShardedStore,
    ProcessShardedStore,
    partition_batch,
    BatchResult,
    CommitResult,
    fold_subtree_roots,
    bridge_for,
    fold_bridge,
)

from .snapshot_molecules import (
    SnapshotFile,
    SnapshotSummary,
    write_snapshot,
    encode_snapshot,
    snapshot_path,
    list_snapshots,
)

from .proof_organisms import (
    Proof,
    PathStep,
    Anchor,
    AnchorKind,
    Verdict,
    VerdictKind,
    traverse,
    build_proof,
    verify,
    follow_redirect,
    encode_proof,
    decode_proof,
)

from .bench_organisms import (
    RunReport,
    VerifyRunResult,
    Comparison,
    run,
    compare_prefetch,
    compare_shards,
    verify_run,
    save_report,
    load_report,
)

__all__ = [
    # Utilities
    "resolve_absolute_path",
    "get_project_root",
    "short_hex",
    "format_rate",
    # Errors
    "StoreError",
    "HashDomainError",
    "RoutingError",
    "VersionRegressionError",
    "IntegrityError",
    "JournalCapacityError",
    "JournalCorruptionError",
    "JournalStateError",
    "JournalStorageError",
    "SnapshotFormatError",
    "SnapshotCorruptionError",
    "ProofFormatError",
    "InvalidProofError",
    "ShardWorkerError",
    # Constants (atoms)
    "EMPTY_HASH",
    "LEAF_DEPTH",
    "MAX_VERSION",
    "DEFAULT_SHARD_BITS",
    "DEFAULT_SUBTREE_BITS",
    "DEFAULT_EPOCH_OPS",
    # Hashing (atoms)
    "HashFunction",
    "BLAKE2S",
    "SHA256",
    "DEFAULT_HASH",
    "get_hash_function",
    "available_hash_functions",
    "make_salt",
    "key_bit",
    "hash_data",
    "hash_leaf",
    "hash_internal",
    "batch_hash",
    "batch_hash_scalar",
    # Entries and routing (atoms)
    "ENTRY_SIZE",
    "Entry",
    "EntryKind",
    "encode_entry",
    "decode_entry",
    "Topology",
    "route",
    "global_index",
    # Workloads (atoms)
    "OpKind",
    "WorkloadConfig",
    "Workload",
    "generate_ops",
    # Journal, tree, snapshot (molecules)
    "Journal",
    "SegmentSummary",
    "Subtree",
    "PutOutcome",
    "DeleteOutcome",
    "LeafInfo",
    "SnapshotFile",
    "SnapshotSummary",
    "write_snapshot",
    "encode_snapshot",
    "snapshot_path",
    "list_snapshots",
    # Store and proofs (organisms)
    "ShardedStore",
    "ProcessShardedStore",
    "partition_batch",
    "BatchResult",
    "CommitResult",
    "fold_subtree_roots",
    "bridge_for",
    "fold_bridge",
    "Proof",
    "PathStep",
    "Anchor",
    "AnchorKind",
    "Verdict",
    "VerdictKind",
    "traverse",
    "build_proof",
    "verify",
    "follow_redirect",
    "encode_proof",
    "decode_proof",
    # Bench (organisms)
    "RunReport",
    "VerifyRunResult",
    "Comparison",
    "run",
    "compare_prefetch",
    "compare_shards",
    "verify_run",
    "save_report",
    "load_report",
]
