#!/usr/bin/env python3
"""
Authenticated Store Benchmark
=============================

Generates a seeded update/insert/delete workload, drives it through the
sharded store in epochs, optionally writes snapshots and verifies them,
and writes a JSON run report.

Example Usage:
    python bench.py --keys 131072 --ops 1048576
    python bench.py --keys 1024 --ops 10000 --snapshot-period-ms 500 --verify
"""

import argparse
import logging
import sys
from pathlib import Path

from bench_config import (
    DEFAULT_KEYS,
    DEFAULT_OPS,
    DEFAULT_SEED,
    DEFAULT_VERIFY_SAMPLES,
    HASH_NAME,
    JOURNAL_DIR,
    LOG_LEVEL,
    REPORT_PATH,
    SNAPSHOT_DIR,
)
from progress import (
    print_comparison,
    print_epoch_progress,
    print_run_header,
    print_run_summary,
    print_verify_summary,
)
from src.ads.bench_organisms import compare_prefetch, compare_shards, run, save_report, verify_run
from src.ads.config_atoms import DEFAULT_EPOCH_OPS, DEFAULT_SHARD_BITS, DEFAULT_SUBTREE_BITS, DEFAULT_VALUE_SIZE
from src.ads.errors import StoreError
from src.ads.hashing_atoms import available_hash_functions
from src.ads.workload_atoms import WORKER_MODES, WorkloadConfig


def _parse_mix(text: str) -> tuple[int, int, int]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"mix must be update,insert,delete percentages, got {text!r}")
    try:
        return tuple(int(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"mix must contain integers, got {text!r}")


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    """Parse command line arguments."""
    parser = argparse.ArgumentParser(
        description="Authenticated Store Benchmark - sharded sparse Merkle store harness",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Desk-scale in-memory run
  python bench.py --keys 131072 --ops 1048576

  # Snapshots every 500 ms, then verify proofs against the report
  python bench.py --snapshot-period-ms 500 --snapshot-dir ./runs/snaps --verify

  # Single shard against eight, one process per shard
  python bench.py --shard-bits 3 --workers process --compare-shards

Environment Variables:
  ADS_ROOT, ADS_SNAPSHOT_DIR, ADS_JOURNAL_DIR, ADS_REPORT_PATH,
  ADS_LOG_LEVEL, ADS_HASH    override the defaults in bench_config.py
        """,
    )

    parser.add_argument("--keys", type=int, default=DEFAULT_KEYS, help=f"Keys inserted before the measured stream (default: {DEFAULT_KEYS})")
    parser.add_argument("--ops", type=int, default=DEFAULT_OPS, help=f"Operations in the measured stream (default: {DEFAULT_OPS})")
    parser.add_argument("--mix", type=_parse_mix, default=(90, 5, 5), help="update,insert,delete percentages (default: 90,5,5)")
    parser.add_argument("--value-size", type=int, default=DEFAULT_VALUE_SIZE, help=f"Value size in bytes (default: {DEFAULT_VALUE_SIZE})")
    parser.add_argument("--seed", type=int, default=DEFAULT_SEED, help=f"PCG64 seed (default: {DEFAULT_SEED})")
    parser.add_argument("--shard-bits", type=int, default=DEFAULT_SHARD_BITS, help=f"log2 shard count (default: {DEFAULT_SHARD_BITS})")
    parser.add_argument("--subtree-bits", type=int, default=DEFAULT_SUBTREE_BITS, help=f"log2 subtrees per shard (default: {DEFAULT_SUBTREE_BITS})")
    parser.add_argument("--snapshot-period-ms", type=int, default=0, help="Snapshot period in ms; 0 disables snapshots (default: 0)")
    parser.add_argument("--snapshot-dir", type=Path, default=SNAPSHOT_DIR, help=f"Snapshot directory (default: {SNAPSHOT_DIR})")
    parser.add_argument("--journal-dir", type=Path, default=JOURNAL_DIR, help="Journal directory (default: in memory)")
    parser.add_argument("--threads", type=int, default=None, help="Worker threads (default: one per shard)")
    parser.add_argument("--workers", choices=WORKER_MODES, default="thread", help="Host shards on threads or in one process each (default: thread)")
    parser.add_argument("--epoch-ops", type=int, default=DEFAULT_EPOCH_OPS, help=f"Operations per epoch (default: {DEFAULT_EPOCH_OPS})")
    parser.add_argument("--prefetch", action="store_true", help="Compute key paths ahead of each descent")
    parser.add_argument("--hash", choices=available_hash_functions(), default=HASH_NAME, help=f"Hash function (default: {HASH_NAME})")
    parser.add_argument("--report", type=Path, default=REPORT_PATH, help=f"JSON report path (default: {REPORT_PATH})")
    parser.add_argument("--compare-prefetch", action="store_true", help="Also run the seed with prefetch off and on and report both rates")
    parser.add_argument("--compare-shards", action="store_true", help="Also run the seed on one shard and on --shard-bits shards and report both rates")
    parser.add_argument("--verify", action="store_true", help="Verify proofs from every snapshot after the run")
    parser.add_argument("--verify-samples", type=int, default=DEFAULT_VERIFY_SAMPLES, help=f"Present and absent keys per snapshot (default: {DEFAULT_VERIFY_SAMPLES})")
    parser.add_argument("--log-level", default=LOG_LEVEL, help=f"Logging level (default: {LOG_LEVEL})")
    parser.add_argument("--quiet", action="store_true", help="Suppress per-epoch progress lines")

    return parser.parse_args(argv)


def main(argv: list[str] | None = None) -> int:
    """Main entry point. Returns the process exit code."""
    args = parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    try:
        config = WorkloadConfig(
            seed=args.seed,
            key_count=args.keys,
            op_count=args.ops,
            mix=args.mix,
            value_size=args.value_size,
            snapshot_period_ms=args.snapshot_period_ms,
            shard_bits=args.shard_bits,
            subtree_bits=args.subtree_bits,
            epoch_ops=args.epoch_ops,
            threads=args.threads,
            workers=args.workers,
            prefetch=args.prefetch,
            hash_name=args.hash,
            snapshot_dir=str(args.snapshot_dir) if args.snapshot_period_ms else None,
            journal_dir=str(args.journal_dir) if args.journal_dir else None,
        )
    except ValueError as e:
        print(f"Error: {e}")
        return 2

    print_run_header(config)
    try:
        report = run(config, on_epoch=None if args.quiet else print_epoch_progress)
    except KeyboardInterrupt:
        print("\n\nInterrupted by user")
        return 130
    except StoreError as e:
        print(f"\nFatal store error: {e}")
        return 1

    print_run_summary(report)
    try:
        if args.compare_prefetch:
            report.comparisons.append(compare_prefetch(config))
        if args.compare_shards:
            report.comparisons.append(compare_shards(config))
    except KeyboardInterrupt:
        print("\n\nInterrupted by user")
        return 130
    except StoreError as e:
        print(f"\nFatal store error: {e}")
        return 1
    for comparison in report.comparisons:
        print_comparison(comparison)

    if not save_report(report, args.report):
        return 1
    print(f"  Report: {args.report}")

    ok = report.errors == 0
    if args.verify:
        if not config.snapshot_dir:
            print("\nError: --verify needs snapshots (--snapshot-period-ms > 0)")
            return 1
        result = verify_run(report, config.snapshot_dir, samples=args.verify_samples, seed=args.seed)
        print_verify_summary(result)
        ok = ok and result.passed

    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
