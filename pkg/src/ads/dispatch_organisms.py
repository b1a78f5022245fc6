"""
Dispatch Organisms - Sharded Store and Global Root
==================================================

ShardedStore splits the key space into 2^shard_bits shards, each owning
2^subtree_bits subtrees, one slab pair and one journal. A batch is
partitioned by route and every shard applies its part on its own worker;
shards share no mutable state, so no locks are taken.

At commit the dirty subtrees are rehashed and the subtree roots are folded
pairwise through the implicit top levels: depths implicit_levels-1 down
to 0, every hash salted with the epoch version. Subtree slots are ordered
by global_index (shard-major), so the pair (2i, 2i+1) is (left, right).

ProcessShardedStore applies the same batches with every shard hosted in
its own long-lived worker process; only partitions, counts and subtree
roots cross the process boundary.
"""

import logging
from concurrent.futures import Future, ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .arena_atoms import ShardArenas
from .errors import ShardWorkerError, StoreError
from .hashing_atoms import (
    DEFAULT_HASH,
    HashFunction,
    batch_hash,
    get_hash_function,
    hash_data,
    hash_internal,
    make_salt,
)
from .journal_molecules import Journal
from .topology_atoms import Topology, global_index, route, split_index
from .tree_molecules import DeleteOutcome, PutOutcome, Subtree
from .utils import resolve_absolute_path, short_hex

# Configure module logger
logger = logging.getLogger(__name__)

# An update is (key, value); a None value deletes the key
Update = tuple[bytes, Optional[bytes]]


# =============================================================================
# ATOMS - Implicit level fold
# =============================================================================


def _fold_level(level: Sequence[bytes], version: int, depth: int, hash_fn: HashFunction) -> list[bytes]:
    salt = make_salt(version, depth)
    return batch_hash([(salt, level[i] + level[i + 1]) for i in range(0, len(level), 2)], hash_fn)


def fold_levels(
    digests: Sequence[bytes],
    version: int,
    topology: Topology,
    hash_fn: HashFunction = DEFAULT_HASH,
) -> list[list[bytes]]:
    """
    Every level of the implicit fold: levels[0] are the subtree digests,
    levels[-1] holds only the global root.
    """
    if len(digests) != topology.subtree_count:
        raise ValueError(f"Expected {topology.subtree_count} subtree digests, got {len(digests)}")
    levels = [list(digests)]
    for depth in range(topology.implicit_levels - 1, -1, -1):
        levels.append(_fold_level(levels[-1], version, depth, hash_fn))
    return levels


def fold_subtree_roots(
    digests: Sequence[bytes],
    version: int,
    topology: Topology,
    hash_fn: HashFunction = DEFAULT_HASH,
) -> bytes:
    """
    Fold 2^implicit_levels subtree digests (global_index order) into the root.

    With zero implicit levels the only subtree root is the global root.
    """
    return fold_levels(digests, version, topology, hash_fn)[-1][0]


def bridge_for(
    digests: Sequence[bytes],
    index: int,
    version: int,
    topology: Topology,
    hash_fn: HashFunction = DEFAULT_HASH,
) -> list[bytes]:
    """
    Sibling digests that fold subtree `index` up to the global root.

    Returns:
        implicit_levels digests, the deepest implicit level first
    """
    return bridge_from_levels(fold_levels(digests, version, topology, hash_fn), index)


def bridge_from_levels(levels: Sequence[Sequence[bytes]], index: int) -> list[bytes]:
    """Bridge digests for `index` read off precomputed fold levels."""
    return [level[(index >> i) ^ 1] for i, level in enumerate(levels[:-1])]


def fold_bridge(
    subtree_root: bytes,
    index: int,
    bridge: Sequence[bytes],
    version: int,
    topology: Topology,
    hash_fn: HashFunction = DEFAULT_HASH,
) -> bytes:
    """Verifier-side fold of one subtree root with its bridge digests."""
    if len(bridge) != topology.implicit_levels:
        raise ValueError(f"Bridge needs {topology.implicit_levels} digests, got {len(bridge)}")
    digest = subtree_root
    position = index
    for sibling, depth in zip(bridge, range(topology.implicit_levels - 1, -1, -1)):
        if position & 1:
            digest = hash_internal(sibling, digest, version, depth, hash_fn)
        else:
            digest = hash_internal(digest, sibling, version, depth, hash_fn)
        position >>= 1
    return digest


def partition_batch(
    updates: Sequence[Update],
    topology: Topology,
    hash_fn: HashFunction = DEFAULT_HASH,
) -> list[list[tuple[int, bytes, bytes, Optional[bytes]]]]:
    """
    Split one epoch's updates into per-shard work lists.

    Later updates to the same key replace earlier ones. Each work item is
    (subtree_index, key_hash, key, value).
    """
    latest: dict[bytes, Optional[bytes]] = {}
    for key, value in updates:
        latest[key] = value

    work: list[list[tuple[int, bytes, bytes, Optional[bytes]]]] = [[] for _ in range(topology.shard_count)]
    for key, value in latest.items():
        key_hash = hash_data(key, hash_fn)
        shard_id, subtree_index = route(key_hash, topology)
        work[shard_id].append((subtree_index, key_hash, key, value))
    return work


# =============================================================================
# ATOMS - Results
# =============================================================================


@dataclass
class BatchResult:
    """
    Outcome of one apply_batch call.

    Attributes:
        version: Epoch version of the batch
        inserted / updated / deleted / absent: Per-outcome counts
        errors: Failed keys mapped to the error their shard raised
    """

    version: int
    inserted: int = 0
    updated: int = 0
    deleted: int = 0
    absent: int = 0
    errors: dict[bytes, StoreError] = field(default_factory=dict)

    @property
    def applied(self) -> int:
        return self.inserted + self.updated + self.deleted

    @property
    def ok(self) -> bool:
        return not self.errors

    def merge(self, other: "BatchResult") -> None:
        self.inserted += other.inserted
        self.updated += other.updated
        self.deleted += other.deleted
        self.absent += other.absent
        self.errors.update(other.errors)


@dataclass(frozen=True)
class CommitResult:
    """
    Outcome of a commit.

    Counters are store totals, so committing twice without updates yields
    equal results.

    Attributes:
        root: Global state root
        version: Epoch version salting the implicit levels
        subtree_roots: Subtree root digests in global_index order
        updates_applied: Puts and effective deletes applied since creation
        nodes_rehashed: Leaf and node digests computed since creation
    """

    root: bytes
    version: int
    subtree_roots: tuple[bytes, ...]
    updates_applied: int
    nodes_rehashed: int


# =============================================================================
# MOLECULES - Shard
# =============================================================================


class Shard:
    """One writer's slice of the store: its subtrees, slabs and journal."""

    def __init__(
        self,
        shard_id: int,
        topology: Topology,
        journal: Journal,
        hash_fn: HashFunction = DEFAULT_HASH,
        prefetch: bool = False,
    ):
        self.shard_id = shard_id
        self.journal = journal
        self.arenas = ShardArenas()
        self.subtrees = [
            Subtree(shard_id, index, topology, self.arenas, journal, hash_fn, prefetch)
            for index in range(topology.subtrees_per_shard)
        ]
        self.updates_applied = 0

    def apply(self, work: list[tuple[int, bytes, bytes, Optional[bytes]]], version: int) -> BatchResult:
        """Apply (subtree_index, key_hash, key, value) items in order."""
        result = BatchResult(version)
        for subtree_index, key_hash, key, value in work:
            subtree = self.subtrees[subtree_index]
            try:
                if value is None:
                    if subtree.delete(key, version, key_hash) is DeleteOutcome.DELETED:
                        result.deleted += 1
                    else:
                        result.absent += 1
                elif subtree.put(key, value, version, key_hash) is PutOutcome.INSERTED:
                    result.inserted += 1
                else:
                    result.updated += 1
            except StoreError as e:
                logger.error(f"Shard {self.shard_id}: update to {key[:8].hex()} failed: {e}")
                result.errors[key] = e
        self.updates_applied += result.applied
        return result

    def recompute(self, version: int) -> list[bytes]:
        """Rehash dirty subtrees; return every subtree root of the shard."""
        return [subtree.recompute_subtree_root(version) for subtree in self.subtrees]

    def seal(self, version: int) -> None:
        if self.journal.has_open_segment(version):
            self.journal.seal(version)

    @property
    def rehashed(self) -> int:
        return sum(subtree.rehashed for subtree in self.subtrees)


# =============================================================================
# ORGANISMS - Sharded store
# =============================================================================


class ShardedStore:
    """
    Authenticated key/value store over sharded sparse Merkle subtrees.

    Args:
        topology: Shard and subtree fan-out
        journal_dir: Root directory for per-shard journals (`shard-NNN/`);
            None keeps journals in memory
        hash_fn: Hash function for every digest
        threads: Worker threads for apply and commit (default: shard count)
        prefetch: Compute key paths ahead of each descent
    """

    def __init__(
        self,
        topology: Optional[Topology] = None,
        journal_dir: Optional[Path | str] = None,
        hash_fn: HashFunction = DEFAULT_HASH,
        threads: Optional[int] = None,
        prefetch: bool = False,
    ):
        self.topology = topology or Topology()
        self.hash_fn = hash_fn
        self.journal_dir = resolve_absolute_path(journal_dir) if journal_dir is not None else None
        self.threads = max(1, threads if threads is not None else self.topology.shard_count)
        self.shards = [
            Shard(shard_id, self.topology, self._make_journal(shard_id), hash_fn, prefetch)
            for shard_id in range(self.topology.shard_count)
        ]
        self.last_commit: Optional[CommitResult] = None
        self._executor: Optional[ThreadPoolExecutor] = None
        if self.threads > 1 and self.topology.shard_count > 1:
            self._executor = ThreadPoolExecutor(max_workers=self.threads, thread_name_prefix="ads-shard")
        logger.debug(
            f"Store ready: {self.topology.shard_count} shards x "
            f"{self.topology.subtrees_per_shard} subtrees, {self.threads} threads, hash {hash_fn.name}"
        )

    def _make_journal(self, shard_id: int) -> Journal:
        if self.journal_dir is None:
            return Journal(None, self.hash_fn)
        return Journal(self.journal_dir / f"shard-{shard_id:03d}", self.hash_fn)

    def _map(self, fn, items):
        if self._executor is None:
            return [fn(item) for item in items]
        return list(self._executor.map(fn, items))

    # -------------------------------------------------------------------------
    # Lookup helpers
    # -------------------------------------------------------------------------

    def subtree(self, shard_id: int, subtree_index: int) -> Subtree:
        return self.shards[shard_id].subtrees[subtree_index]

    def subtree_at(self, index: int) -> Subtree:
        """Subtree by global_index."""
        return self.subtree(*split_index(index, self.topology))

    def subtrees(self) -> list[Subtree]:
        """Every subtree in global_index order."""
        return [subtree for shard in self.shards for subtree in shard.subtrees]

    def subtree_for(self, key: bytes) -> Subtree:
        shard_id, subtree_index = route(hash_data(key, self.hash_fn), self.topology)
        return self.subtree(shard_id, subtree_index)

    def journal_for(self, key: bytes) -> Journal:
        """Journal of the shard that owns `key`."""
        return self.subtree_for(key).journal

    def global_index(self, key: bytes) -> int:
        return global_index(hash_data(key, self.hash_fn), self.topology)

    # -------------------------------------------------------------------------
    # Operations
    # -------------------------------------------------------------------------

    def apply_batch(self, updates: Sequence[Update], version: int) -> BatchResult:
        """
        Apply one epoch's updates.

        Later updates to the same key replace earlier ones before any tree
        work. Per-key failures are collected in the result and never abort
        the rest of the batch.
        """
        work = partition_batch(updates, self.topology, self.hash_fn)
        busy = [(shard, items) for shard, items in zip(self.shards, work) if items]
        result = BatchResult(version)
        for part in self._map(lambda job: job[0].apply(job[1], version), busy):
            result.merge(part)

        if result.errors:
            logger.warning(f"Batch at version {version}: {len(result.errors)} updates failed")
        return result

    def commit(self, version: int) -> CommitResult:
        """
        Recompute dirty subtrees, seal this version's journal segments and
        fold the global root.
        """
        per_shard = self._map(lambda shard: shard.recompute(version), self.shards)
        digests = tuple(digest for roots in per_shard for digest in roots)
        for shard in self.shards:
            shard.seal(version)

        root = fold_subtree_roots(digests, version, self.topology, self.hash_fn)
        result = CommitResult(
            root=root,
            version=version,
            subtree_roots=digests,
            updates_applied=sum(shard.updates_applied for shard in self.shards),
            nodes_rehashed=sum(shard.rehashed for shard in self.shards),
        )
        self.last_commit = result
        logger.info(f"Committed version {version}: root {short_hex(root)}")
        return result

    def get(self, key: bytes) -> Optional[tuple[bytes, int]]:
        """Return (value, version) for `key`, or None if absent."""
        key_hash = hash_data(key, self.hash_fn)
        shard_id, subtree_index = route(key_hash, self.topology)
        return self.subtree(shard_id, subtree_index).get(key, key_hash)

    @property
    def dirty(self) -> bool:
        return any(subtree.dirty for subtree in self.subtrees())

    def close(self) -> None:
        """Stop the worker threads and close every shard's journal."""
        if self._executor is not None:
            self._executor.shutdown(wait=True)
            self._executor = None
        for shard in self.shards:
            shard.journal.close()

    def __enter__(self) -> "ShardedStore":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


# =============================================================================
# ORGANISMS - Process-hosted shards
# =============================================================================

# The shard owned by this worker process (set by _host_shard)
_hosted: Optional[Shard] = None


def _host_shard(
    shard_id: int,
    topology: Topology,
    journal_dir: Optional[str],
    hash_name: str,
    prefetch: bool,
) -> None:
    """Worker initializer: build the shard this process owns."""
    global _hosted
    hash_fn = get_hash_function(hash_name)
    directory = Path(journal_dir) / f"shard-{shard_id:03d}" if journal_dir is not None else None
    _hosted = Shard(shard_id, topology, Journal(directory, hash_fn), hash_fn, prefetch)


def _hosted_apply(work: list[tuple[int, bytes, bytes, Optional[bytes]]], version: int) -> BatchResult:
    result = _hosted.apply(work, version)
    # Errors cross the process boundary as plain StoreErrors
    result.errors = {key: StoreError(str(e)) for key, e in result.errors.items()}
    return result


def _hosted_commit(version: int) -> tuple[list[bytes], int, int]:
    try:
        roots = _hosted.recompute(version)
        _hosted.seal(version)
    except StoreError as e:
        raise StoreError(str(e)) from None
    return roots, _hosted.updates_applied, _hosted.rehashed


def _hosted_get(subtree_index: int, key: bytes, key_hash: bytes) -> Optional[tuple[bytes, int]]:
    try:
        return _hosted.subtrees[subtree_index].get(key, key_hash)
    except StoreError as e:
        raise StoreError(str(e)) from None


def _hosted_close() -> None:
    _hosted.journal.close()


class ProcessShardedStore:
    """
    Sharded store whose shards each live in a dedicated worker process.

    Every shard is built once by its worker's initializer and kept for the
    store's lifetime; apply_batch sends each worker its partition of the
    batch and commit collects the subtree roots. Hashing therefore runs in
    parallel across shards. Roots equal ShardedStore's for the same updates.

    The tree slabs stay inside the workers, so snapshots and proofs need
    the in-process ShardedStore.

    Args:
        topology: Shard and subtree fan-out
        journal_dir: Root directory for per-shard journals; None keeps
            journals in worker memory
        hash_fn: Hash function for every digest
        prefetch: Compute key paths ahead of each descent
    """

    def __init__(
        self,
        topology: Optional[Topology] = None,
        journal_dir: Optional[Path | str] = None,
        hash_fn: HashFunction = DEFAULT_HASH,
        prefetch: bool = False,
    ):
        self.topology = topology or Topology()
        self.hash_fn = hash_fn
        self.journal_dir = resolve_absolute_path(journal_dir) if journal_dir is not None else None
        self.last_commit: Optional[CommitResult] = None
        directory = str(self.journal_dir) if self.journal_dir is not None else None
        self._pools: list[ProcessPoolExecutor] = [
            ProcessPoolExecutor(
                max_workers=1,
                initializer=_host_shard,
                initargs=(shard_id, self.topology, directory, hash_fn.name, prefetch),
            )
            for shard_id in range(self.topology.shard_count)
        ]
        logger.debug(f"Process store ready: {self.topology.shard_count} shard workers, hash {hash_fn.name}")

    def _gather(self, futures: list[tuple[int, Future]]) -> list:
        results = []
        for shard_id, future in futures:
            try:
                results.append(future.result())
            except StoreError:
                raise
            except Exception as e:
                raise ShardWorkerError(shard_id, str(e) or type(e).__name__) from e
        return results

    def apply_batch(self, updates: Sequence[Update], version: int) -> BatchResult:
        """Apply one epoch's updates; same semantics as ShardedStore.apply_batch."""
        work = partition_batch(updates, self.topology, self.hash_fn)
        futures = [
            (shard_id, self._pools[shard_id].submit(_hosted_apply, items, version))
            for shard_id, items in enumerate(work)
            if items
        ]
        result = BatchResult(version)
        for part in self._gather(futures):
            result.merge(part)

        if result.errors:
            logger.warning(f"Batch at version {version}: {len(result.errors)} updates failed")
        return result

    def commit(self, version: int) -> CommitResult:
        """Recompute and seal in every worker, then fold the global root here."""
        futures = [(shard_id, pool.submit(_hosted_commit, version)) for shard_id, pool in enumerate(self._pools)]
        parts = self._gather(futures)
        digests = tuple(digest for roots, _, _ in parts for digest in roots)

        root = fold_subtree_roots(digests, version, self.topology, self.hash_fn)
        result = CommitResult(
            root=root,
            version=version,
            subtree_roots=digests,
            updates_applied=sum(applied for _, applied, _ in parts),
            nodes_rehashed=sum(rehashed for _, _, rehashed in parts),
        )
        self.last_commit = result
        logger.info(f"Committed version {version}: root {short_hex(root)}")
        return result

    def get(self, key: bytes) -> Optional[tuple[bytes, int]]:
        """Return (value, version) for `key`, or None if absent."""
        key_hash = hash_data(key, self.hash_fn)
        shard_id, subtree_index = route(key_hash, self.topology)
        future = self._pools[shard_id].submit(_hosted_get, subtree_index, key, key_hash)
        return self._gather([(shard_id, future)])[0]

    def close(self) -> None:
        """Close the workers' journals and stop the worker processes."""
        for shard_id, pool in enumerate(self._pools):
            try:
                pool.submit(_hosted_close).result()
            except Exception as e:
                logger.warning(f"Shard {shard_id}: closing journals failed: {e}")
            pool.shutdown(wait=True)
        self._pools = []

    def __enter__(self) -> "ProcessShardedStore":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
