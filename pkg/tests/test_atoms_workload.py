"""
Test Atoms: Workload Generation
===============================

Tests for WorkloadConfig validation and the deterministic op stream.
"""

import pytest

from src.ads.workload_atoms import KEY_SIZE, OpKind, WorkloadConfig, generate_ops


def _replay_live(workload) -> list[int]:
    """Live key count after each op; asserts updates/deletes only target live keys."""
    live = {key for _, key, _ in workload.preload}
    counts = []
    for kind, key, value in workload.ops:
        if kind is OpKind.INSERT:
            assert key not in live
            live.add(key)
        else:
            assert key in live, f"{kind.value} of a key that is not live"
            if kind is OpKind.DELETE:
                assert value is None
                live.remove(key)
        counts.append(len(live))
    return counts


class TestWorkloadConfig:
    """Tests for WorkloadConfig."""

    def test_defaults_validate(self):
        """The default config is valid and echoes to a dict."""
        config = WorkloadConfig()
        data = config.to_dict()
        assert data["mix"] == [90, 5, 5]
        assert data["hash_name"] == "blake2s"
        assert data["workers"] == "thread"
        assert config.topology.shard_count == 8

    @pytest.mark.parametrize(
        "overrides",
        [
            {"mix": (50, 50, 1)},
            {"mix": (100, 0)},
            {"epoch_ops": 0},
            {"key_count": -1},
            {"snapshot_period_ms": -5},
            {"threads": 0},
            {"seed": -1},
            {"shard_bits": -1},
            {"workers": "fiber"},
            {"workers": "process", "snapshot_period_ms": 100},
        ],
    )
    def test_invalid_fields_raise(self, overrides: dict):
        """Every invalid field is rejected with ValueError."""
        with pytest.raises(ValueError):
            WorkloadConfig(**overrides)


class TestGenerateOps:
    """Tests for generate_ops()."""

    def test_same_seed_same_stream(self):
        """A seed fully determines the stream."""
        config = WorkloadConfig(seed=42, key_count=64, op_count=500)
        assert generate_ops(config) == generate_ops(config)

    def test_different_seed_different_stream(self):
        """Different seeds give different keys."""
        a = generate_ops(WorkloadConfig(seed=1, key_count=8, op_count=8))
        b = generate_ops(WorkloadConfig(seed=2, key_count=8, op_count=8))
        assert a.preload != b.preload

    def test_preload_shapes(self):
        """Preload inserts 32-byte keys with value_size values."""
        workload = generate_ops(WorkloadConfig(key_count=10, op_count=0, value_size=7))
        assert len(workload.preload) == 10
        assert all(kind is OpKind.INSERT for kind, _, _ in workload.preload)
        assert all(len(key) == KEY_SIZE and len(value) == 7 for _, key, value in workload.preload)
        assert workload.ops == []

    def test_update_only_mix_keeps_live_count(self):
        """A 100/0/0 mix over preloaded keys never changes the live key count."""
        # Arrange
        config = WorkloadConfig(seed=5, key_count=100, op_count=2_000, mix=(100, 0, 0))

        # Act
        workload = generate_ops(config)

        # Assert
        assert all(kind is OpKind.UPDATE for kind, _, _ in workload.ops)
        assert set(_replay_live(workload)) == {100}

    def test_realized_mix_within_one_percent(self):
        """10^5 ops at 90/5/5 realize each share within 1%."""
        # Arrange
        config = WorkloadConfig(seed=9, key_count=1024, op_count=100_000, value_size=8)

        # Act
        workload = generate_ops(config)

        # Assert
        n = len(workload.ops)
        shares = {kind: sum(1 for k, _, _ in workload.ops if k is kind) / n for kind in OpKind}
        assert abs(shares[OpKind.UPDATE] - 0.90) < 0.01
        assert abs(shares[OpKind.INSERT] - 0.05) < 0.01
        assert abs(shares[OpKind.DELETE] - 0.05) < 0.01
        _replay_live(workload)

    def test_delete_on_empty_set_becomes_insert(self):
        """With nothing live, a requested delete degenerates to an insert."""
        # Arrange
        config = WorkloadConfig(seed=3, key_count=0, op_count=200, mix=(0, 0, 100))

        # Act
        workload = generate_ops(config)

        # Assert
        assert workload.ops[0][0] is OpKind.INSERT
        counts = _replay_live(workload)
        assert max(counts) == 1
        assert [kind for kind, _, _ in workload.ops[:4]] == [
            OpKind.INSERT, OpKind.DELETE, OpKind.INSERT, OpKind.DELETE,
        ]
