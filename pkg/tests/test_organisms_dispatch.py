"""
Test Organisms: Sharded Store
=============================

Tests for batch application, commits and the implicit-level fold, checked
against the from-scratch reference rebuild.
"""

from pathlib import Path

import numpy as np
import pytest

from src.ads.config_atoms import EMPTY_HASH
from src.ads.dispatch_organisms import (
    ProcessShardedStore,
    ShardedStore,
    bridge_for,
    bridge_from_levels,
    fold_bridge,
    fold_levels,
    fold_subtree_roots,
)
from src.ads.errors import JournalStateError, StoreError, VersionRegressionError
from src.ads.topology_atoms import Topology
from src.ads.workload_atoms import WorkloadConfig, generate_ops

from tests.reference_trees import key_in_subtree, reference_fold, reference_root


def _digests(count: int, seed: int = 0) -> list[bytes]:
    rng = np.random.Generator(np.random.PCG64(seed))
    return [rng.bytes(32) for _ in range(count)]


class TestImplicitFold:
    """Tests for fold_subtree_roots() and bridges."""

    def test_matches_reference_fold(self):
        """The batched fold equals the pairwise reference fold."""
        topology = Topology(2, 3)
        digests = _digests(topology.subtree_count)
        assert fold_subtree_roots(digests, 7, topology) == reference_fold(digests, 7, 5)

    def test_zero_levels_is_identity(self):
        """With one subtree its root is the global root."""
        digest = _digests(1)[0]
        assert fold_subtree_roots([digest], 3, Topology(0, 0)) == digest

    def test_wrong_digest_count(self):
        """The digest list must cover every subtree."""
        with pytest.raises(ValueError):
            fold_subtree_roots(_digests(3), 1, Topology(1, 1))

    def test_bridge_folds_every_subtree_to_the_root(self):
        """Each subtree root plus its bridge reproduces the global root."""
        # Arrange
        topology = Topology(1, 2)
        digests = _digests(topology.subtree_count, seed=4)
        root = fold_subtree_roots(digests, 2, topology)
        levels = fold_levels(digests, 2, topology)

        for index, digest in enumerate(digests):
            # Act
            bridge = bridge_for(digests, index, 2, topology)

            # Assert
            assert bridge == bridge_from_levels(levels, index)
            assert len(bridge) == topology.implicit_levels
            assert fold_bridge(digest, index, bridge, 2, topology) == root

    def test_version_salts_the_fold(self):
        """The same digests folded under two versions give two roots."""
        topology = Topology(1, 1)
        digests = _digests(4)
        assert fold_subtree_roots(digests, 1, topology) != fold_subtree_roots(digests, 2, topology)


class TestApplyBatch:
    """Tests for ShardedStore.apply_batch()."""

    def test_last_writer_wins(self):
        """A later update to the same key in one batch replaces the earlier one."""
        with ShardedStore(Topology(1, 1)) as store:
            result = store.apply_batch([(b"k", b"first"), (b"j", b"x"), (b"k", b"second")], 1)
            assert result.inserted == 2
            assert store.get(b"k") == (b"second", 1)

            store.apply_batch([(b"k", b"again"), (b"k", None)], 2)
            assert store.get(b"k") is None

    def test_counts_outcomes(self):
        """Inserted, updated, deleted and absent keys are counted."""
        with ShardedStore(Topology(1, 1)) as store:
            store.apply_batch([(b"a", b"1"), (b"b", b"2")], 1)
            result = store.apply_batch([(b"a", b"3"), (b"b", None), (b"c", None), (b"d", b"4")], 2)

            assert (result.inserted, result.updated, result.deleted, result.absent) == (1, 1, 1, 1)
            assert result.applied == 3
            assert result.ok

    def test_per_key_errors_do_not_abort(self):
        """A failing key is reported while the rest of the batch applies."""
        # Arrange
        topology = Topology(2, 0)
        store = ShardedStore(topology, threads=1)
        early = key_in_subtree(0, topology)
        other = key_in_subtree(3, topology)
        store.apply_batch([(early, b"v")], 5)
        store.commit(5)

        # Act
        result = store.apply_batch([(early, b"late"), (other, b"fine")], 3)

        # Assert
        assert not result.ok
        assert isinstance(result.errors[early], VersionRegressionError)
        assert result.inserted == 1
        assert store.get(other) == (b"fine", 3)
        assert store.get(early) == (b"v", 5)

    def test_order_across_keys_does_not_matter(self):
        """Any permutation of a batch of distinct keys commits the same root."""
        # Arrange
        rng = np.random.Generator(np.random.PCG64(8))
        updates = [(rng.bytes(16), rng.bytes(8)) for _ in range(300)]
        shuffled = [updates[int(i)] for i in rng.permutation(len(updates))]

        # Act
        with ShardedStore(Topology(2, 2)) as a, ShardedStore(Topology(2, 2)) as b:
            a.apply_batch(updates, 1)
            b.apply_batch(shuffled, 1)

            # Assert
            assert a.commit(1).root == b.commit(1).root


class TestCommit:
    """Tests for ShardedStore.commit()."""

    def test_empty_store_root(self):
        """An empty store commits the fold of empty-subtree constants."""
        topology = Topology(1, 2)
        with ShardedStore(topology) as store:
            result = store.commit(1)
        assert result.root == reference_fold([EMPTY_HASH] * topology.subtree_count, 1, 3)
        assert result.subtree_roots == (EMPTY_HASH,) * topology.subtree_count

    def test_one_subtree_changes_the_root(self):
        """A single non-empty subtree moves the root off the empty value."""
        topology = Topology(1, 2)
        with ShardedStore(topology) as empty, ShardedStore(topology) as one:
            one.apply_batch([(b"k", b"v")], 1)
            assert one.commit(1).root != empty.commit(1).root

    def test_commit_is_idempotent(self):
        """Committing twice, with an empty batch in between, gives equal results."""
        with ShardedStore(Topology(1, 1)) as store:
            store.apply_batch([(b"a", b"1"), (b"b", b"2")], 1)
            first = store.commit(1)
            store.apply_batch([], 1)
            second = store.commit(1)
        assert first == second
        assert first.updates_applied == 2

    def test_threads_do_not_change_roots(self):
        """Serial and threaded application commit the same root."""
        rng = np.random.Generator(np.random.PCG64(10))
        updates = [(rng.bytes(16), rng.bytes(8)) for _ in range(500)]
        with ShardedStore(Topology(3, 1), threads=1) as serial, ShardedStore(Topology(3, 1), threads=8) as threaded:
            serial.apply_batch(updates, 1)
            threaded.apply_batch(updates, 1)
            assert serial.commit(1).root == threaded.commit(1).root

    def test_shard_split_does_not_change_roots(self):
        """For fixed implicit levels, moving bits between shards and subtrees keeps the root."""
        rng = np.random.Generator(np.random.PCG64(12))
        updates = [(rng.bytes(16), rng.bytes(8)) for _ in range(400)]
        roots = set()
        for shard_bits in range(4):
            with ShardedStore(Topology(shard_bits, 3 - shard_bits)) as store:
                store.apply_batch(updates, 1)
                roots.add(store.commit(1).root)
        assert len(roots) == 1

    def test_same_content_other_version(self):
        """Identical content committed under two versions gives two roots."""
        with ShardedStore(Topology(0, 0)) as a, ShardedStore(Topology(0, 0)) as b:
            a.apply_batch([(b"k", b"v")], 1)
            b.apply_batch([(b"k", b"v")], 2)
            assert a.commit(1).root != b.commit(2).root

    def test_aba_sequence(self):
        """put A, put B, put A across versions ends away from the first root."""
        with ShardedStore(Topology(1, 1)) as store:
            store.apply_batch([(b"k", b"A")], 1)
            first = store.commit(1).root
            store.apply_batch([(b"k", b"B")], 2)
            store.commit(2)
            store.apply_batch([(b"k", b"A")], 3)
            assert store.commit(3).root != first

    def test_journal_files_per_shard(self, tmp_path: Path):
        """With a journal directory every shard seals `<version>.journal` on commit."""
        # Arrange
        topology = Topology(1, 0)
        keys = [key_in_subtree(0, topology), key_in_subtree(1, topology)]

        # Act
        with ShardedStore(topology, journal_dir=tmp_path) as store:
            store.apply_batch([(k, b"v") for k in keys], 1)
            store.commit(1)

            # Assert
            assert (tmp_path / "shard-000" / "1.journal").exists()
            assert (tmp_path / "shard-001" / "1.journal").exists()
            assert store.journal_for(keys[1]).is_sealed(1)
            assert store.get(keys[0]) == (b"v", 1)


class TestLookups:
    """Tests for subtree lookup helpers."""

    def test_subtree_for_matches_global_index(self):
        """subtree_for(key) is subtree_at(global_index(key))."""
        with ShardedStore(Topology(2, 2)) as store:
            for i in range(40):
                key = str(i).encode()
                assert store.subtree_for(key) is store.subtree_at(store.global_index(key))
            assert len(store.subtrees()) == 16


class TestOracleEquivalence:
    """Incremental commits against a full rebuild after every epoch."""

    @pytest.mark.parametrize("shard_bits", [0, 1, 2, 3])
    def test_random_workload_matches_rebuild(self, shard_bits: int):
        """10,000 ops at 90/5/5 over 1,024 keys: every epoch root equals the rebuild."""
        # Arrange
        config = WorkloadConfig(seed=shard_bits, key_count=1024, op_count=10_000, shard_bits=shard_bits, subtree_bits=2)
        workload = generate_ops(config)
        stream = workload.preload + workload.ops
        model: dict[bytes, tuple[bytes, int]] = {}

        with ShardedStore(config.topology) as store:
            for version, start in enumerate(range(0, len(stream), 1000), start=1):
                chunk = stream[start:start + 1000]

                # Act
                store.apply_batch([(key, value) for _, key, value in chunk], version)
                committed = store.commit(version)
                for _, key, value in chunk:
                    if value is None:
                        model.pop(key, None)
                    else:
                        model[key] = (value, version)

                # Assert
                assert committed.root == reference_root(model, config.topology, version)


class TestClose:
    """Tests for ShardedStore.close()."""

    def test_close_releases_journal_handles(self, tmp_path: Path):
        """Unsealed file segments are closed with the store and refuse later appends."""
        # Arrange
        topology = Topology(1, 0)
        key = key_in_subtree(0, topology)
        store = ShardedStore(topology, journal_dir=tmp_path)
        store.apply_batch([(key, b"v")], 1)
        segment = store.journal_for(key)._segments[1]
        assert segment._handle is not None

        # Act
        store.close()

        # Assert
        assert segment._handle is None
        with pytest.raises(JournalStateError):
            store.journal_for(key).append(1, b"late", b"x")

    def test_context_manager_closes(self, tmp_path: Path):
        topology = Topology(1, 0)
        key = key_in_subtree(1, topology)
        with ShardedStore(topology, journal_dir=tmp_path) as store:
            store.apply_batch([(key, b"v")], 1)
            segment = store.journal_for(key)._segments[1]
        assert segment._handle is None


class TestProcessShardedStore:
    """Tests for shards hosted in worker processes."""

    def test_roots_match_threaded_store(self):
        """Process-hosted shards commit the same roots as threads, epoch by epoch."""
        # Arrange
        config = WorkloadConfig(seed=4, key_count=256, op_count=1500, shard_bits=2, subtree_bits=1)
        workload = generate_ops(config)
        stream = workload.preload + workload.ops

        with ShardedStore(config.topology) as threaded, ProcessShardedStore(config.topology) as hosted:
            for version, start in enumerate(range(0, len(stream), 400), start=1):
                batch = [(key, value) for _, key, value in stream[start:start + 400]]

                # Act
                expected_batch = threaded.apply_batch(batch, version)
                actual_batch = hosted.apply_batch(batch, version)
                expected = threaded.commit(version)
                actual = hosted.commit(version)

                # Assert
                assert actual == expected
                assert actual_batch.applied == expected_batch.applied
                assert hosted.last_commit == actual

    def test_get_reads_from_the_worker(self):
        topology = Topology(1, 1)
        with ProcessShardedStore(topology) as store:
            store.apply_batch([(b"alpha", b"1"), (b"beta", b"2"), (b"alpha", b"3")], 1)
            store.commit(1)
            assert store.get(b"alpha") == (b"3", 1)
            assert store.get(b"beta") == (b"2", 1)
            assert store.get(b"gamma") is None

    def test_per_key_errors_come_back(self):
        """A rejected key is reported as a StoreError; the rest of the batch applies."""
        # Arrange
        topology = Topology(2, 0)
        early = key_in_subtree(0, topology)
        other = key_in_subtree(3, topology)
        with ProcessShardedStore(topology) as store:
            store.apply_batch([(early, b"v")], 5)
            store.commit(5)

            # Act
            result = store.apply_batch([(early, b"late"), (other, b"fine")], 3)

            # Assert
            assert isinstance(result.errors[early], StoreError)
            assert result.inserted == 1
            assert store.get(early) == (b"v", 5)

    def test_journal_files_are_sealed_by_the_workers(self, tmp_path: Path):
        topology = Topology(1, 0)
        keys = [key_in_subtree(0, topology), key_in_subtree(1, topology)]
        with ProcessShardedStore(topology, journal_dir=tmp_path) as store:
            store.apply_batch([(k, b"v") for k in keys], 1)
            store.commit(1)
        assert (tmp_path / "shard-000" / "1.journal").exists()
        assert (tmp_path / "shard-001" / "1.journal").exists()

    def test_worker_store_errors_surface(self):
        """A store error inside a worker is raised in the caller as StoreError."""
        with ProcessShardedStore(Topology(1, 0)) as store:
            store.apply_batch([(b"k", b"v")], 4)
            with pytest.raises(StoreError):
                store.commit(2)
