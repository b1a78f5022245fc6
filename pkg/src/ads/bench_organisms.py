"""
Bench Organisms - Benchmark Runs, Reports and Verification
==========================================================

run() drives a workload through the store in epochs: each epoch applies
one batch at a fresh version and commits it. When snapshots are enabled a
snapshot is written at the first epoch boundary after each period elapses,
and once more after the final epoch.

Throughput covers the measured window only: the first WARMUP_FRACTION of
the operation stream runs as its own epochs before the clock starts.

compare_prefetch() and compare_shards() re-run one seed with a single setting
changed and record both rates and their ratio.

verify_run() re-opens every snapshot of a run, checks its root against the
report and verifies proofs for sampled present and absent keys.
"""

import json
import logging
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .config_atoms import PRNG_ALGORITHM, WARMUP_FRACTION
from .dispatch_organisms import ProcessShardedStore, ShardedStore
from .errors import InvalidProofError, StoreError
from .hashing_atoms import get_hash_function
from .proof_organisms import VerdictKind, build_proof, follow_redirect, verify
from .snapshot_molecules import SnapshotFile, list_snapshots, write_snapshot
from .utils import format_rate, resolve_absolute_path, short_hex
from .workload_atoms import KEY_SIZE, Op, WorkloadConfig, generate_ops

# Configure module logger
logger = logging.getLogger(__name__)


# =============================================================================
# ATOMS - Report data
# =============================================================================


@dataclass
class EpochRecord:
    """One committed epoch."""

    version: int
    ops: int
    root: str
    apply_ms: float
    commit_ms: float
    measured: bool


@dataclass
class SnapshotRecord:
    """One snapshot written during a run."""

    version: int
    path: str
    bytes: int
    entries: int
    root: str


@dataclass
class Comparison:
    """
    Two runs of one seed that differ in a single setting.

    Attributes:
        name: What was varied ("prefetch", "shards")
        baseline / variant: Settings of the two runs, for display
        baseline_rate / variant_rate: Measured updates per second
        ratio: variant_rate / baseline_rate (0.0 when the baseline measured nothing)
        roots_match: Whether both runs committed the same final root
    """

    name: str
    baseline: str
    variant: str
    baseline_rate: float
    variant_rate: float
    ratio: float
    roots_match: bool

    @property
    def delta(self) -> float:
        """Relative change of the variant over the baseline."""
        return self.ratio - 1.0 if self.ratio else 0.0


@dataclass
class RunReport:
    """
    Machine-readable result of one run.

    Attributes:
        config: Echo of the WorkloadConfig
        prng: Generator identifier used for the stream
        final_version / final_root: Last committed version and its root (hex)
        total_ops: Preload plus measured operations
        measured_ops / measured_seconds / updates_per_sec: Post-warmup window
        snapshot_bytes: Total bytes of snapshot files written
        errors: Updates rejected by the store
        epochs / snapshots: Per-epoch and per-snapshot records
        comparisons: Side-by-side runs requested with the report
    """

    config: dict
    prng: str
    final_version: int
    final_root: str
    total_ops: int
    measured_ops: int
    measured_seconds: float
    updates_per_sec: float
    snapshot_bytes: int = 0
    errors: int = 0
    epochs: list[EpochRecord] = field(default_factory=list)
    snapshots: list[SnapshotRecord] = field(default_factory=list)
    comparisons: list[Comparison] = field(default_factory=list)

    def roots(self) -> dict[int, bytes]:
        """Committed root per version."""
        return {e.version: bytes.fromhex(e.root) for e in self.epochs}


@dataclass
class VerifyRunResult:
    """
    Outcome of verify_run.

    Attributes:
        passed: True when no check failed
        snapshots_checked / proofs_checked: Work done
        redirects_followed: ExternalVersion verdicts chased into an older snapshot
        unresolved: Absent-key redirects that could not be followed: no
            snapshot for the named version, or the older proof does not
            reveal the redirect node
        failures: One message per failed check, naming key and version
    """

    passed: bool = True
    snapshots_checked: int = 0
    proofs_checked: int = 0
    redirects_followed: int = 0
    unresolved: int = 0
    failures: list[str] = field(default_factory=list)

    def fail(self, message: str) -> None:
        logger.error(message)
        self.failures.append(message)
        self.passed = False


# =============================================================================
# MOLECULES - Report persistence
# =============================================================================


def save_report(report: RunReport, file_path: Path | str) -> bool:
    """
    Write a run report as JSON.

    Returns:
        True if the save succeeded, False on error
    """
    path = resolve_absolute_path(file_path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(asdict(report), f, indent=2)
        logger.debug(f"Saved run report to {path}")
        return True
    except (OSError, TypeError, ValueError) as e:
        logger.error(f"Failed to save run report to {path}: {e}")
        return False


def load_report(file_path: Path | str) -> Optional[RunReport]:
    """
    Load a run report written by save_report.

    Returns:
        The report, or None if the file is missing or invalid
    """
    path = resolve_absolute_path(file_path)
    if not path.exists():
        logger.debug(f"Run report not found: {path}")
        return None
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
        data["epochs"] = [EpochRecord(**e) for e in data.get("epochs", [])]
        data["snapshots"] = [SnapshotRecord(**s) for s in data.get("snapshots", [])]
        data["comparisons"] = [Comparison(**c) for c in data.get("comparisons", [])]
        return RunReport(**data)
    except json.JSONDecodeError as e:
        logger.error(f"Invalid JSON in run report {path}: {e}")
        return None
    except (OSError, TypeError, KeyError) as e:
        logger.error(f"Failed to load run report from {path}: {e}")
        return None


# =============================================================================
# ORGANISMS - Run
# =============================================================================


def _chunks(ops: list[Op], size: int) -> list[list[Op]]:
    return [ops[i:i + size] for i in range(0, len(ops), size)]


def run(config: WorkloadConfig, on_epoch: Optional[Callable[[EpochRecord], None]] = None) -> RunReport:
    """
    Execute a benchmark run.

    Args:
        config: Run parameters
        on_epoch: Called after every committed epoch (progress output)

    Returns:
        The run report
    """
    hash_fn = get_hash_function(config.hash_name)
    workload = generate_ops(config)
    warmup = int(len(workload.ops) * WARMUP_FRACTION)
    snapshots_on = config.snapshot_period_ms > 0 and config.snapshot_dir is not None

    epochs: list[EpochRecord] = []
    snapshots: list[SnapshotRecord] = []
    errors = 0
    version = 0
    last_commit = None

    if config.workers == "process":
        store = ProcessShardedStore(config.topology, config.journal_dir, hash_fn, config.prefetch)
    else:
        store = ShardedStore(config.topology, config.journal_dir, hash_fn, config.threads, config.prefetch)
    last_snapshot = time.perf_counter()
    overrun_reported = False

    def snapshot(at_version: int) -> None:
        summary = write_snapshot(store, at_version, config.snapshot_dir)
        snapshots.append(
            SnapshotRecord(at_version, str(summary.path), summary.byte_length, summary.entry_count, summary.root.hex())
        )

    def run_epoch(ops: list[Op], measured: bool) -> None:
        nonlocal version, errors, last_commit, last_snapshot, overrun_reported
        version += 1
        started = time.perf_counter()
        batch = store.apply_batch([(key, value) for _, key, value in ops], version)
        applied = time.perf_counter()
        last_commit = store.commit(version)
        committed = time.perf_counter()
        errors += len(batch.errors)

        record = EpochRecord(
            version=version,
            ops=len(ops),
            root=last_commit.root.hex(),
            apply_ms=(applied - started) * 1000,
            commit_ms=(committed - applied) * 1000,
            measured=measured,
        )
        epochs.append(record)

        since_ms = (committed - last_snapshot) * 1000
        if snapshots_on and since_ms >= config.snapshot_period_ms:
            # Cadence is checked at epoch boundaries only
            if since_ms > 2 * config.snapshot_period_ms and not overrun_reported:
                logger.warning(
                    f"Snapshot at version {version} came {since_ms:.0f} ms after the previous one "
                    f"(period {config.snapshot_period_ms} ms); epochs are longer than the period"
                )
                overrun_reported = True
            snapshot(version)
            last_snapshot = time.perf_counter()
        if on_epoch is not None:
            on_epoch(record)

    try:
        for chunk in _chunks(workload.preload, config.epoch_ops):
            run_epoch(chunk, measured=False)
        for chunk in _chunks(workload.ops[:warmup], config.epoch_ops):
            run_epoch(chunk, measured=False)

        window_start = time.perf_counter()
        for chunk in _chunks(workload.ops[warmup:], config.epoch_ops):
            run_epoch(chunk, measured=True)
        window_seconds = time.perf_counter() - window_start

        if last_commit is None:
            last_commit = store.commit(version)
        if snapshots_on and (not snapshots or snapshots[-1].version != version):
            snapshot(version)
    finally:
        store.close()

    measured_ops = len(workload.ops) - warmup
    rate = measured_ops / window_seconds if measured_ops and window_seconds > 0 else 0.0
    report = RunReport(
        config=config.to_dict(),
        prng=PRNG_ALGORITHM,
        final_version=version,
        final_root=last_commit.root.hex(),
        total_ops=len(workload.preload) + len(workload.ops),
        measured_ops=measured_ops,
        measured_seconds=window_seconds,
        updates_per_sec=rate,
        snapshot_bytes=sum(s.bytes for s in snapshots),
        errors=errors,
        epochs=epochs,
        snapshots=snapshots,
    )
    logger.info(
        f"Run finished: {report.total_ops} ops over {version} versions, "
        f"{format_rate(measured_ops, window_seconds)}, root {report.final_root[:12]}"
    )
    return report


def _compare(name: str, baseline: WorkloadConfig, variant: WorkloadConfig, labels: tuple[str, str]) -> Comparison:
    first = run(baseline)
    second = run(variant)
    ratio = second.updates_per_sec / first.updates_per_sec if first.updates_per_sec > 0 else 0.0
    comparison = Comparison(
        name=name,
        baseline=labels[0],
        variant=labels[1],
        baseline_rate=first.updates_per_sec,
        variant_rate=second.updates_per_sec,
        ratio=ratio,
        roots_match=first.final_root == second.final_root,
    )
    logger.info(
        f"{name}: {labels[0]} {first.updates_per_sec:,.0f} ups, {labels[1]} {second.updates_per_sec:,.0f} ups "
        f"(x{ratio:.2f})"
    )
    if not comparison.roots_match:
        logger.error(f"{name}: {labels[0]} and {labels[1]} committed different roots")
    return comparison


def compare_prefetch(config: WorkloadConfig) -> Comparison:
    """
    Run `config` with prefetch off, then on, and compare measured rates.

    Snapshots are disabled for both runs; everything else is kept.
    """
    plain = replace(config, snapshot_period_ms=0, snapshot_dir=None)
    return _compare(
        "prefetch",
        replace(plain, prefetch=False),
        replace(plain, prefetch=True),
        ("prefetch off", "prefetch on"),
    )


def compare_shards(config: WorkloadConfig) -> Comparison:
    """
    Run `config` on one shard, then on its own shard count, and compare.

    The single-shard run keeps the same number of subtrees, so both runs
    commit identical roots. Snapshots are disabled for both runs.
    """
    plain = replace(config, snapshot_period_ms=0, snapshot_dir=None)
    single = replace(plain, shard_bits=0, subtree_bits=config.shard_bits + config.subtree_bits)
    shards = config.topology.shard_count
    return _compare(
        "shards",
        single,
        plain,
        ("1 shard", f"{shards} shards ({config.workers} workers)"),
    )


# =============================================================================
# ORGANISMS - Verification of a finished run
# =============================================================================


def _check_key(
    key: bytes,
    snapshot: SnapshotFile,
    trusted: bytes,
    expect_present: bool,
    loaded: dict[int, Optional[SnapshotFile]],
    roots: dict[int, bytes],
    result: VerifyRunResult,
) -> None:
    label = f"key {short_hex(key)} in version {snapshot.version}"
    try:
        verdict = verify(build_proof(key, snapshot), trusted)
        result.proofs_checked += 1
        while verdict.kind is VerdictKind.EXTERNAL_VERSION:
            older = loaded.get(verdict.version)
            if older is None or verdict.version not in roots:
                logger.warning(f"{label}: redirect to version {verdict.version} has no snapshot")
                result.unresolved += 1
                return
            try:
                verdict = follow_redirect(key, verdict, build_proof(key, older), roots[verdict.version])
            except InvalidProofError as e:
                # Nodes regrouped by a delete carry a version whose snapshot predates them
                if expect_present:
                    raise
                logger.warning(f"{label}: redirect to version {verdict.version} not followed: {e.reason}")
                result.unresolved += 1
                return
            result.proofs_checked += 1
            result.redirects_followed += 1
    except StoreError as e:
        result.fail(f"{label}: {e}")
        return

    if expect_present and verdict.kind is VerdictKind.EXCLUSION:
        result.fail(f"{label}: present key verified as {verdict.kind.value}")
    elif not expect_present and verdict.kind is VerdictKind.INCLUSION:
        result.fail(f"{label}: absent key verified as inclusion")


def verify_run(
    report: RunReport,
    snapshot_dir: Path | str,
    samples: int = 16,
    seed: int = 0,
    trusted_roots: Optional[dict[int, bytes]] = None,
) -> VerifyRunResult:
    """
    Check every snapshot of a run against the report's committed roots.

    For each snapshot, `samples` keys written in that version must verify
    as Inclusion and `samples` random keys must never verify as Inclusion.
    ExternalVersion verdicts are followed with follow_redirect, hop by hop,
    while the named snapshot exists.

    Args:
        report: Report of the run
        snapshot_dir: Directory holding the run's snapshots
        samples: Present and absent keys checked per snapshot
        seed: Seed for sampling
        trusted_roots: Roots to trust instead of the report's (per version)
    """
    result = VerifyRunResult()
    roots = report.roots()
    if trusted_roots:
        roots.update(trusted_roots)
    rng = np.random.Generator(np.random.PCG64(seed))

    # Files left by other runs are ignored
    written = {s.version for s in report.snapshots}
    loaded: dict[int, Optional[SnapshotFile]] = {}
    for version, path in list_snapshots(snapshot_dir).items():
        if written and version not in written:
            continue
        try:
            loaded[version] = SnapshotFile.open(path)
        except StoreError as e:
            loaded[version] = None
            result.fail(f"snapshot {path.name}: {e}")

    for version in sorted(written - loaded.keys()):
        result.fail(f"snapshot {version}: listed in the report but missing from {snapshot_dir}")
    if not loaded:
        result.fail(f"no snapshots found in {snapshot_dir}")

    for version, snapshot in loaded.items():
        if snapshot is None:
            continue
        trusted = roots.get(version)
        if trusted is None:
            result.fail(f"snapshot {version}: no committed root in the report")
            continue
        if snapshot.root != trusted:
            result.fail(f"snapshot {version}: root {short_hex(snapshot.root)} differs from trusted {short_hex(trusted)}")
            continue
        result.snapshots_checked += 1

        try:
            records = list(snapshot.key_records())
        except StoreError as e:
            result.fail(f"snapshot {version}: {e}")
            continue
        if records:
            picks = rng.choice(len(records), size=min(samples, len(records)), replace=False)
            for i in picks:
                _check_key(records[int(i)].key, snapshot, trusted, True, loaded, roots, result)
        for _ in range(samples):
            _check_key(rng.bytes(KEY_SIZE), snapshot, trusted, False, loaded, roots, result)

    logger.info(
        f"Verified {result.snapshots_checked} snapshots, {result.proofs_checked} proofs: "
        f"{'pass' if result.passed else 'FAIL'}"
    )
    return result
