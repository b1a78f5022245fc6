"""
Progress Display Utilities
==========================

Functions for displaying the progress and results of benchmark runs.
"""

from src.ads.bench_organisms import Comparison, EpochRecord, RunReport, VerifyRunResult
from src.ads.utils import format_rate
from src.ads.workload_atoms import WorkloadConfig


def print_run_header(config: WorkloadConfig) -> None:
    """Print a formatted header describing the run."""
    topology = config.topology
    snapshots = f"every {config.snapshot_period_ms} ms" if config.snapshot_period_ms else "off"

    print("\n" + "=" * 70)
    print(f"  RUN: {config.key_count} keys, {config.op_count} ops, mix {'/'.join(map(str, config.mix))}")
    print("=" * 70)
    print(f"  Topology:  {topology.shard_count} shards x {topology.subtrees_per_shard} subtrees")
    workers = "one process per shard" if config.workers == "process" else f"{config.threads or topology.shard_count} threads"
    print(f"  Workers:   {workers}")
    print(f"  Epoch:     {config.epoch_ops} ops")
    print(f"  Snapshots: {snapshots}")
    print(f"  Hash:      {config.hash_name}   Seed: {config.seed}")
    print()


def print_epoch_progress(record: EpochRecord) -> None:
    """Print one line per committed epoch."""
    phase = "run " if record.measured else "warm"
    seconds = (record.apply_ms + record.commit_ms) / 1000
    print(
        f"  [{phase}] v{record.version:<6} {record.ops:>8} ops  "
        f"apply {record.apply_ms:8.1f} ms  commit {record.commit_ms:7.1f} ms  "
        f"{format_rate(record.ops, seconds):>12}  root {record.root[:12]}"
    )


def print_run_summary(report: RunReport) -> None:
    """Print the headline numbers of a finished run."""
    print(f"\nRun Summary:")
    print(f"  Versions committed: {report.final_version}")
    print(f"  Final root: {report.final_root}")
    print(f"  Throughput: {format_rate(report.measured_ops, report.measured_seconds)} "
          f"({report.measured_ops} ops in {report.measured_seconds:.2f} s after warmup)")
    print(f"  Snapshots: {len(report.snapshots)} ({report.snapshot_bytes} bytes)")
    if report.errors:
        print(f"  Rejected updates: {report.errors}")


def print_verify_summary(result: VerifyRunResult) -> None:
    """Print the outcome of verify_run."""
    status = "PASS" if result.passed else "FAIL"
    print(f"\nVerification: {status}")
    print(f"  Snapshots checked: {result.snapshots_checked}")
    print(f"  Proofs verified: {result.proofs_checked}")
    print(f"  Redirects followed: {result.redirects_followed} (unresolved: {result.unresolved})")
    for failure in result.failures[:10]:
        print(f"  - {failure}")
    if len(result.failures) > 10:
        print(f"  ... and {len(result.failures) - 10} more")


def print_comparison(comparison: Comparison) -> None:
    """Print two rates of one seed side by side."""
    print(f"\nComparison ({comparison.name}):")
    print(f"  {comparison.baseline:<28} {comparison.baseline_rate:>14,.0f} ups")
    print(f"  {comparison.variant:<28} {comparison.variant_rate:>14,.0f} ups")
    print(f"  Ratio: x{comparison.ratio:.2f} ({comparison.delta:+.1%})")
    if not comparison.roots_match:
        print("  WARNING: final roots differ")
