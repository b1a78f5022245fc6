"""
Bench Configuration
===================

Configuration constants for the benchmark harness.
Paths and defaults can be overridden with ADS_* environment variables.
"""

import os
from pathlib import Path

from src.ads.utils import get_project_root

# Harness root directory - where bench_config.py lives
HARNESS_ROOT = get_project_root()

# Working root for run artifacts. Override via ADS_ROOT to keep snapshots,
# journals and reports outside the repository.
ADS_ROOT = Path(os.environ.get("ADS_ROOT", HARNESS_ROOT / "runs"))

# ================================================
# PATH CONSTANTS FOR RUN ARTIFACTS
# ================================================

# Snapshot files (snapshot-<version>.snap)
SNAPSHOT_DIR = Path(os.environ.get("ADS_SNAPSHOT_DIR", ADS_ROOT / "snapshots"))

# Per-shard journal segments; unset keeps journals in memory
JOURNAL_DIR = Path(os.environ["ADS_JOURNAL_DIR"]) if os.environ.get("ADS_JOURNAL_DIR") else None

# JSON run report
REPORT_PATH = Path(os.environ.get("ADS_REPORT_PATH", ADS_ROOT / "report.json"))

# ================================================
# RUN DEFAULTS
# ================================================

# Root logger level for the CLI
LOG_LEVEL = os.environ.get("ADS_LOG_LEVEL", "WARNING").upper()

# Hash function name (see src.ads.hashing_atoms.available_hash_functions)
HASH_NAME = os.environ.get("ADS_HASH", "blake2s")

# Workload defaults for a desk-scale run
DEFAULT_KEYS = 1 << 17
DEFAULT_OPS = 1 << 20
DEFAULT_SEED = 0
DEFAULT_VERIFY_SAMPLES = 16
