"""
Workload Atoms - Benchmark Configuration and Operation Streams
==============================================================

WorkloadConfig describes one benchmark run; generate_ops turns it into a
deterministic stream of updates, inserts and deletes over uniformly random
32-byte keys.

Streams come from numpy's PCG64 generator seeded with config.seed. Draw
order is fixed: preload keys and values first, then per op its kind, its
target (inserts draw a fresh key, updates and deletes pick a live key) and,
for updates and inserts, its value. An update or delete requested while no
key is live becomes an insert.
"""

from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .config_atoms import (
    DEFAULT_EPOCH_OPS,
    DEFAULT_MIX,
    DEFAULT_SHARD_BITS,
    DEFAULT_SUBTREE_BITS,
    DEFAULT_VALUE_SIZE,
)
from .topology_atoms import Topology

KEY_SIZE: int = 32
WORKER_MODES: tuple[str, ...] = ("thread", "process")


class OpKind(Enum):
    UPDATE = "update"
    INSERT = "insert"
    DELETE = "delete"


# (kind, key, value); value is None for deletes
Op = tuple[OpKind, bytes, Optional[bytes]]


@dataclass
class WorkloadConfig:
    """
    Parameters of one benchmark run.

    Attributes:
        seed: PCG64 seed
        key_count: Keys inserted before the measured stream
        op_count: Operations in the measured stream
        mix: (update, insert, delete) percentages summing to 100
        value_size: Value length in bytes
        snapshot_period_ms: Wall-clock snapshot period; 0 disables snapshots
        shard_bits / subtree_bits: Store topology
        epoch_ops: Operations per epoch (one version, one commit)
        threads: Worker threads (None: one per shard)
        workers: "thread" (shards share this process) or "process" (one
            worker process per shard; snapshots unavailable)
        prefetch: Compute key paths ahead of each descent
        hash_name: Registered hash function name
        snapshot_dir / journal_dir: Output directories (None: disabled / in memory)
    """

    seed: int = 0
    key_count: int = 1024
    op_count: int = 10_000
    mix: tuple[int, int, int] = DEFAULT_MIX
    value_size: int = DEFAULT_VALUE_SIZE
    snapshot_period_ms: int = 0
    shard_bits: int = DEFAULT_SHARD_BITS
    subtree_bits: int = DEFAULT_SUBTREE_BITS
    epoch_ops: int = DEFAULT_EPOCH_OPS
    threads: Optional[int] = None
    workers: str = "thread"
    prefetch: bool = False
    hash_name: str = "blake2s"
    snapshot_dir: Optional[str] = None
    journal_dir: Optional[str] = None

    def __post_init__(self) -> None:
        self.mix = tuple(int(p) for p in self.mix)
        self.validate()

    def validate(self) -> None:
        """
        Raises:
            ValueError: Naming the first offending field
        """
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.key_count < 0:
            raise ValueError(f"key_count must be >= 0, got {self.key_count}")
        if self.op_count < 0:
            raise ValueError(f"op_count must be >= 0, got {self.op_count}")
        if len(self.mix) != 3 or any(p < 0 for p in self.mix) or sum(self.mix) != 100:
            raise ValueError(f"mix must be three non-negative percentages summing to 100, got {self.mix}")
        if self.value_size < 0:
            raise ValueError(f"value_size must be >= 0, got {self.value_size}")
        if self.snapshot_period_ms < 0:
            raise ValueError(f"snapshot_period_ms must be >= 0, got {self.snapshot_period_ms}")
        if self.epoch_ops < 1:
            raise ValueError(f"epoch_ops must be >= 1, got {self.epoch_ops}")
        if self.threads is not None and self.threads < 1:
            raise ValueError(f"threads must be >= 1, got {self.threads}")
        if self.workers not in WORKER_MODES:
            raise ValueError(f"workers must be one of {', '.join(WORKER_MODES)}, got {self.workers!r}")
        if self.workers == "process" and self.snapshot_period_ms > 0:
            raise ValueError("snapshots need thread workers; process workers keep the tree slabs to themselves")
        Topology(self.shard_bits, self.subtree_bits)

    @property
    def topology(self) -> Topology:
        return Topology(self.shard_bits, self.subtree_bits)

    def to_dict(self) -> dict:
        data = asdict(self)
        data["mix"] = list(self.mix)
        return data


@dataclass
class Workload:
    """Preload inserts followed by the measured operation stream."""

    preload: list[Op] = field(default_factory=list)
    ops: list[Op] = field(default_factory=list)


class _LiveKeys:
    """Live key set with O(1) insert, removal and uniform choice."""

    def __init__(self) -> None:
        self.keys: list[bytes] = []
        self.position: dict[bytes, int] = {}

    def __len__(self) -> int:
        return len(self.keys)

    def add(self, key: bytes) -> None:
        if key not in self.position:
            self.position[key] = len(self.keys)
            self.keys.append(key)

    def remove(self, key: bytes) -> None:
        i = self.position.pop(key)
        last = self.keys.pop()
        if i < len(self.keys):
            self.keys[i] = last
            self.position[last] = i

    def pick(self, rng: np.random.Generator) -> bytes:
        return self.keys[int(rng.integers(len(self.keys)))]


def generate_ops(config: WorkloadConfig) -> Workload:
    """Deterministic workload for `config`; equal seeds give equal streams."""
    rng = np.random.Generator(np.random.PCG64(config.seed))
    live = _LiveKeys()
    workload = Workload()

    for _ in range(config.key_count):
        key = rng.bytes(KEY_SIZE)
        live.add(key)
        workload.preload.append((OpKind.INSERT, key, rng.bytes(config.value_size)))

    update_pct, insert_pct, _ = config.mix
    draws = rng.integers(0, 100, size=config.op_count)
    for draw in draws:
        if draw < update_pct:
            kind = OpKind.UPDATE
        elif draw < update_pct + insert_pct:
            kind = OpKind.INSERT
        else:
            kind = OpKind.DELETE
        if kind is not OpKind.INSERT and not live:
            kind = OpKind.INSERT

        if kind is OpKind.INSERT:
            key = rng.bytes(KEY_SIZE)
            live.add(key)
        else:
            key = live.pick(rng)

        if kind is OpKind.DELETE:
            live.remove(key)
            workload.ops.append((kind, key, None))
        else:
            workload.ops.append((kind, key, rng.bytes(config.value_size)))

    return workload
